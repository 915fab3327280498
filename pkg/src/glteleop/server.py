"""Live session server: framed TCP, a websocket gateway, and console HTTP.

One `Session` sits behind two transports that speak the identical wire
format: raw framed TCP for device bridges, and websocket binary messages for
the browser console (each ws message is one complete frame, 4-byte length
prefix included).  A fixed-rate ticker drives the session on simulated time
(`tick * dt`), so wall-clock jitter changes pacing but never state: the
session sees the same clock a headless run would.

The websocket port doubles as a tiny HTTP server: plain GET requests receive
the console bundle (when a directory is configured), `/model` the kinematic
description, and `/config` the controller settings — the console reads its
scaling factors from there and never invents its own.

Disconnection safety needs no special path: a vanished client simply stops
heartbeating, and the session's own watchdog releases authority and
safe-holds the arm within the heartbeat window.
"""

from __future__ import annotations

import asyncio
import json
import logging
import sys
from http import HTTPStatus
from pathlib import Path
from typing import Callable, Optional

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.http11 import Response

from .controller import ControllerConfig, config_from_dict
from .kinematics import IkConfig
from .models import RobotModel, load_model
from .protocol import (
    Error,
    FrameDecoder,
    ModeSwitch,
    ProtocolError,
    TeleopMessage,
    decode,
    encode,
)
from .session import ArmConfig, Session

log = logging.getLogger("glteleop.server")

ARM = "arm"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}

_PLACEHOLDER = """<!doctype html>
<title>glteleop session</title>
<h1>glteleop session server</h1>
<p>No console bundle configured (start with --console DIR to serve one).</p>
<ul>
<li><a href="/model">/model</a> — kinematic description</li>
<li><a href="/config">/config</a> — controller settings</li>
</ul>
"""


def model_to_dict(model: RobotModel) -> dict:
    """JSON-safe kinematic description, enough for client-side FK."""
    chain = model.chain
    return {
        "name": model.name,
        "model_version": model.model_version,
        "dof": chain.dof,
        "home": list(model.home),
        "euler_convention": model.euler_convention,
        "links": [
            {
                "translation": list(link.transform.position),
                "rotation_wxyz": list(link.transform.orientation.as_wxyz()),
                "axis": list(link.axis),
                "limit": list(chain.joint_limits[i]),
                "velocity_limit": chain.velocity_limits[i],
            }
            for i, link in enumerate(chain.links)
        ],
        "ee_offset": {
            "translation": list(chain.ee_offset.position),
            "rotation_wxyz": list(chain.ee_offset.orientation.as_wxyz()),
        },
        "effector": {
            "kind": model.effector_kind,
            "channels": model.effector_channels,
            "rate": model.effector_rate,
        },
    }


class _Client:
    """One connected peer: a sender identity plus a non-blocking send."""

    def __init__(self, sender: str, send: Callable[[bytes], None]):
        self.sender = sender
        self.send = send


class TeleopServer:
    """Owns the session, both listeners, and the tick task."""

    def __init__(
        self,
        *,
        host: str = "127.0.0.1",
        tcp_port: int = 0,
        ws_port: int = 0,
        session: str = "live",
        model: str = "piper6",
        decoupling: str = "temporal",
        console_dir: Optional[str | Path] = None,
        controller: Optional[ControllerConfig] = None,
        ik: Optional[IkConfig] = None,
    ):
        self.model = load_model(model)
        self.controller = controller if controller is not None else config_from_dict({})
        self.decoupling = decoupling
        self.session = Session(
            session,
            {
                ARM: ArmConfig(
                    model=self.model,
                    controller=self.controller,
                    decoupling=decoupling,
                    ik=ik if ik is not None else IkConfig(),
                )
            },
        )
        self.host = host
        self._want_tcp_port = tcp_port
        self._want_ws_port = ws_port
        self.tcp_port: Optional[int] = None
        self.ws_port: Optional[int] = None
        self.console_dir = Path(console_dir).resolve() if console_dir else None
        self._clients: dict[str, _Client] = {}
        self._tcp_writers: set[asyncio.StreamWriter] = set()
        self._inbound: list[tuple[str, TeleopMessage]] = []
        self._tick = 0
        self._next_client = 0
        self._server_seq = 0
        self._tcp_server: Optional[asyncio.Server] = None
        self._ws_server = None
        self._ticker: Optional[asyncio.Task] = None

    # ---- lifecycle ----

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.host, self._want_tcp_port
        )
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self._ws_server = await ws_serve(
            self._handle_ws,
            self.host,
            self._want_ws_port,
            process_request=self._process_request,
        )
        self.ws_port = next(iter(self._ws_server.sockets)).getsockname()[1]
        self._ticker = asyncio.create_task(self._tick_loop())
        log.info(
            "session %r up: tcp %s:%d, ws/http %s:%d, model %s, %s decoupling",
            self.session.session_id, self.host, self.tcp_port,
            self.host, self.ws_port, self.model.name, self.decoupling,
        )

    async def stop(self) -> None:
        if self._ticker is not None:
            self._ticker.cancel()
            try:
                await self._ticker
            except asyncio.CancelledError:
                pass
        if self._tcp_server is not None:
            self._tcp_server.close()
            for writer in list(self._tcp_writers):
                writer.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    # ---- shared plumbing ----

    def _register(self, kind: str, send: Callable[[bytes], None]) -> _Client:
        self._next_client += 1
        client = _Client(f"{kind}-{self._next_client}", send)
        self._clients[client.sender] = client
        log.info("%s connected", client.sender)
        return client

    def _unregister(self, client: _Client) -> None:
        self._clients.pop(client.sender, None)
        log.info("%s disconnected", client.sender)

    def _accept(self, client: _Client, frame: bytes) -> None:
        try:
            message = decode(frame)
        except ProtocolError as exc:
            log.warning("%s sent a bad frame: %s", client.sender, exc)
            self._server_seq += 1
            reply = TeleopMessage(
                session=self.session.session_id,
                arm=ARM,
                seq=self._server_seq,
                t_us=self._tick * self._dt_us(),
                payload=Error(code="bad-frame", text=str(exc)),
            )
            client.send(encode(reply))
            return
        if isinstance(message.payload, ModeSwitch):
            log.info("%s requests ModeSwitch(%s)", client.sender, message.payload.mode)
        self._inbound.append((client.sender, message))

    def _dt_us(self) -> int:
        return int(round(self.controller.dt * 1e6))

    async def _tick_loop(self) -> None:
        dt = self.controller.dt
        loop = asyncio.get_running_loop()
        next_time = loop.time() + dt
        while True:
            delay = next_time - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            next_time += dt
            if next_time < loop.time() - 1.0:
                # Fell far behind (suspended laptop, debugger): re-anchor
                # instead of machine-gunning catch-up ticks.
                next_time = loop.time() + dt
            batch, self._inbound = self._inbound, []
            self._tick += 1
            result = self.session.step(batch, self._tick * self._dt_us())
            for dest, message in result.outbound:
                frame = encode(message)
                if isinstance(message.payload, Error):
                    log.warning(
                        "error to %s: %s: %s",
                        dest or "all", message.payload.code, message.payload.text,
                    )
                if dest is None:
                    for client in list(self._clients.values()):
                        client.send(frame)
                elif dest in self._clients:
                    self._clients[dest].send(frame)
            for arm, arm_tick in result.ticks.items():
                for event in arm_tick.events:
                    log.info("tick %d %s: %s", self._tick, arm, event)

    # ---- TCP transport ----

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        client = self._register("tcp", lambda frame: self._tcp_send(writer, frame))
        self._tcp_writers.add(writer)
        decoder = FrameDecoder()
        try:
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    frames = decoder.feed(data)
                except ProtocolError as exc:
                    log.warning("%s: unrecoverable stream: %s", client.sender, exc)
                    break
                for frame in frames:
                    self._accept(client, frame)
        finally:
            self._tcp_writers.discard(writer)
            self._unregister(client)
            writer.close()

    @staticmethod
    def _tcp_send(writer: asyncio.StreamWriter, frame: bytes) -> None:
        if not writer.is_closing():
            writer.write(frame)

    # ---- websocket transport ----

    async def _handle_ws(self, connection) -> None:
        queue: asyncio.Queue[bytes] = asyncio.Queue()
        client = self._register("ws", queue.put_nowait)
        pump = asyncio.create_task(self._ws_pump(connection, queue))
        try:
            async for data in connection:
                if isinstance(data, str):
                    data = data.encode("utf-8")
                self._accept(client, data)
        except Exception:
            pass
        finally:
            pump.cancel()
            self._unregister(client)

    @staticmethod
    async def _ws_pump(connection, queue: asyncio.Queue) -> None:
        try:
            while True:
                frame = await queue.get()
                await connection.send(frame)
        except Exception:
            pass  # the receive side notices the closed connection

    # ---- console HTTP ----

    def _process_request(self, connection, request):
        if request.headers.get("Upgrade", "").lower() == "websocket":
            return None
        path = request.path.split("?", 1)[0]
        if path == "/model":
            return self._json_response(model_to_dict(self.model))
        if path == "/config":
            return self._json_response(self._config_dict())
        return self._static_response(path)

    def _config_dict(self) -> dict:
        return {
            "session": self.session.session_id,
            "arm": ARM,
            "decoupling": self.decoupling,
            "alpha_l": self.controller.scale.alpha_l,
            "alpha_r": self.controller.scale.alpha_r,
            "dt": self.controller.dt,
            "mirror_velocity_limit": self.controller.mirror_velocity_limit,
            "model": self.model.name,
        }

    @staticmethod
    def _http(status: HTTPStatus, content_type: str, body: bytes) -> Response:
        headers = Headers(
            [
                ("Content-Type", content_type),
                ("Content-Length", str(len(body))),
                ("Connection", "close"),
            ]
        )
        return Response(status.value, status.phrase, headers, body)

    def _json_response(self, doc: dict) -> Response:
        return self._http(
            HTTPStatus.OK, "application/json", json.dumps(doc).encode("utf-8")
        )

    def _not_found(self) -> Response:
        return self._http(HTTPStatus.NOT_FOUND, "text/plain", b"not found\n")

    def _static_response(self, path: str) -> Response:
        if self.console_dir is None:
            if path in ("/", "/index.html"):
                return self._http(
                    HTTPStatus.OK, "text/html; charset=utf-8",
                    _PLACEHOLDER.encode("utf-8"),
                )
            return self._not_found()
        name = path.lstrip("/") or "index.html"
        target = (self.console_dir / name).resolve()
        if not target.is_relative_to(self.console_dir) or not target.is_file():
            return self._not_found()
        return self._http(
            HTTPStatus.OK,
            _CONTENT_TYPES.get(target.suffix, "application/octet-stream"),
            target.read_bytes(),
        )


def serve_forever(
    *,
    host: str = "127.0.0.1",
    tcp_port: int = 7460,
    ws_port: int = 7461,
    session: str = "live",
    model: str = "piper6",
    decoupling: str = "temporal",
    console_dir: Optional[str] = None,
) -> int:
    """Blocking entry point for the CLI; returns a process exit code."""
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    async def _main() -> None:
        server = TeleopServer(
            host=host, tcp_port=tcp_port, ws_port=ws_port, session=session,
            model=model, decoupling=decoupling, console_dir=console_dir,
        )
        await server.start()
        try:
            await asyncio.Future()
        finally:
            await server.stop()

    try:
        asyncio.run(_main())
    except KeyboardInterrupt:
        pass
    return 0
