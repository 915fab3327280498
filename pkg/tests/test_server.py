"""Live server: transports, the tick loop, console HTTP, disconnect safety.

Each test drives a real `TeleopServer` on ephemeral localhost ports inside
its own `asyncio.run` loop, so no async test plugin is needed.  Wall-clock
pacing only affects how fast ticks fire — session state is a pure function
of tick count — so assertions are about eventually observing states, with
generous timeouts.
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct

from websockets.asyncio.client import connect as ws_connect

from glteleop.protocol import (
    CartesianCommand,
    Error,
    FrameDecoder,
    JointCommand,
    ModeSwitch,
    StateUpdate,
    TeleopMessage,
    decode,
    encode,
)
from glteleop.server import ARM, TeleopServer, model_to_dict

HOST = "127.0.0.1"
SESSION = "live"
WAIT = 5.0


# ---- scaffolding ----


def run_scenario(scenario, **server_kwargs):
    """Start a server on ephemeral ports, run one async scenario, tear down."""

    async def _main():
        server = TeleopServer(host=HOST, tcp_port=0, ws_port=0, **server_kwargs)
        await server.start()
        try:
            await asyncio.wait_for(scenario(server), timeout=30.0)
        finally:
            await server.stop()

    asyncio.run(_main())


class TcpPeer:
    """Framed-TCP test client with its own sequence counter."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self.seq = 0
        self.decoder = FrameDecoder()
        self.inbox: list[TeleopMessage] = []

    @classmethod
    async def connect(cls, port: int) -> "TcpPeer":
        reader, writer = await asyncio.open_connection(HOST, port)
        return cls(reader, writer)

    async def send(self, payload) -> None:
        self.seq += 1
        message = TeleopMessage(
            session=SESSION, arm=ARM, seq=self.seq, t_us=self.seq, payload=payload
        )
        self.writer.write(encode(message))
        await self.writer.drain()

    async def expect(self, want, timeout: float = WAIT) -> TeleopMessage:
        """Return the first inbound message satisfying `want`."""

        async def _scan():
            while True:
                while self.inbox:
                    message = self.inbox.pop(0)
                    if want(message):
                        return message
                data = await self.reader.read(65536)
                assert data, "connection closed while waiting for a message"
                for frame in self.decoder.feed(data):
                    self.inbox.append(decode(frame))

        return await asyncio.wait_for(_scan(), timeout)

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except OSError:
            pass


class WsPeer:
    """Websocket test client; one binary message per frame, prefix included."""

    def __init__(self, connection):
        self.connection = connection
        self.seq = 0

    async def send(self, payload) -> None:
        self.seq += 1
        message = TeleopMessage(
            session=SESSION, arm=ARM, seq=self.seq, t_us=self.seq, payload=payload
        )
        await self.connection.send(encode(message))

    async def expect(self, want, timeout: float = WAIT) -> TeleopMessage:
        async def _scan():
            while True:
                data = await self.connection.recv()
                assert isinstance(data, bytes)
                message = decode(data)
                if want(message):
                    return message

        return await asyncio.wait_for(_scan(), timeout)


async def http_get(port: int, path: str):
    """Raw HTTP GET against the websocket port; returns (status, headers, body)."""
    reader, writer = await asyncio.open_connection(HOST, port)
    writer.write(
        f"GET {path} HTTP/1.1\r\nHost: {HOST}\r\nConnection: close\r\n\r\n".encode()
    )
    await writer.drain()
    raw = await asyncio.wait_for(reader.read(-1), WAIT)
    writer.close()
    head, _, body = raw.partition(b"\r\n\r\n")
    lines = head.decode("latin-1").split("\r\n")
    status = int(lines[0].split(" ", 2)[1])
    headers = {}
    for line in lines[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    return status, headers, body


def is_state(message: TeleopMessage) -> bool:
    return isinstance(message.payload, StateUpdate)


# ---- transports ----


def test_tcp_client_streams_state_and_commands_joints():
    async def scenario(server):
        peer = await TcpPeer.connect(server.tcp_port)
        try:
            first = await peer.expect(is_state)
            assert first.session == SESSION
            assert first.arm == ARM
            assert first.payload.mode == "global"
            assert first.payload.safe_hold  # nobody is commanding yet

            target = list(server.model.home)
            target[5] += 0.05
            await peer.send(JointCommand(joints=tuple(target)))
            moved = await peer.expect(
                lambda m: is_state(m) and abs(m.payload.joints[5] - target[5]) < 1e-9
            )
            assert not moved.payload.safe_hold
            assert not moved.payload.estopped

            # Broadcasts carry strictly increasing seq and tick.
            a = await peer.expect(is_state)
            b = await peer.expect(is_state)
            assert b.seq > a.seq > moved.seq
            assert b.payload.tick > a.payload.tick
        finally:
            await peer.close()

    run_scenario(scenario)


def test_websocket_speaks_the_identical_wire_format():
    async def scenario(server):
        async with ws_connect(f"ws://{HOST}:{server.ws_port}/") as connection:
            peer = WsPeer(connection)
            first = await peer.expect(is_state)
            assert first.payload.mode == "global"

            target = list(server.model.home)
            target[4] += 0.03
            await peer.send(JointCommand(joints=tuple(target)))
            moved = await peer.expect(
                lambda m: is_state(m) and abs(m.payload.joints[4] - target[4]) < 1e-9
            )
            assert not moved.payload.safe_hold

    run_scenario(scenario)


def test_malformed_frame_draws_an_error_without_killing_the_stream():
    async def scenario(server):
        peer = await TcpPeer.connect(server.tcp_port)
        try:
            body = b"this is not json"
            peer.writer.write(struct.pack(">I", len(body)) + body)
            await peer.writer.drain()
            reply = await peer.expect(
                lambda m: isinstance(m.payload, Error) and m.payload.code == "bad-frame"
            )
            assert reply.session == SESSION
            await peer.expect(is_state)  # broadcasts keep flowing
        finally:
            await peer.close()

    run_scenario(scenario)


# ---- session semantics over the wire ----


def test_mode_switch_is_resolved_and_logged(caplog):
    async def scenario(server):
        peer = await TcpPeer.connect(server.tcp_port)
        try:
            await peer.send(
                CartesianCommand(
                    position=(0.0, 0.0, 0.0), orientation_wxyz=(1.0, 0.0, 0.0, 0.0)
                )
            )
            await peer.send(ModeSwitch(mode="local"))
            local = await peer.expect(
                lambda m: is_state(m) and m.payload.mode == "local"
            )
            assert not local.payload.estopped
        finally:
            await peer.close()

    with caplog.at_level(logging.INFO, logger="glteleop.server"):
        run_scenario(scenario)
    assert "requests ModeSwitch(local)" in caplog.text
    assert "local engaged at zero displacement" in caplog.text


def test_commander_silence_releases_the_arm_into_safe_hold():
    async def scenario(server):
        watcher = await TcpPeer.connect(server.tcp_port)
        commander = await TcpPeer.connect(server.tcp_port)
        try:
            await commander.send(JointCommand(joints=server.model.home))
            live = await watcher.expect(
                lambda m: is_state(m) and not m.payload.safe_hold
            )
            assert live.payload.mode == "global"

            await commander.close()
            released = await watcher.expect(
                lambda m: isinstance(m.payload, Error)
                and m.payload.code == "safe-hold"
            )
            assert "silent" in released.payload.text
            held = await watcher.expect(lambda m: is_state(m) and m.payload.safe_hold)
            assert not held.payload.estopped
        finally:
            await watcher.close()

    run_scenario(scenario)


# ---- console HTTP ----


def test_http_exposes_model_and_config():
    async def scenario(server):
        status, headers, body = await http_get(server.ws_port, "/model")
        assert status == 200
        assert headers["content-type"] == "application/json"
        assert int(headers["content-length"]) == len(body)
        doc = json.loads(body)
        assert doc == model_to_dict(server.model)
        assert doc["name"] == "piper6"
        assert doc["dof"] == 6
        assert len(doc["links"]) == 6

        status, headers, body = await http_get(server.ws_port, "/config")
        assert status == 200
        cfg = json.loads(body)
        assert cfg["session"] == SESSION
        assert cfg["arm"] == ARM
        assert cfg["alpha_l"] == server.controller.scale.alpha_l
        assert cfg["alpha_r"] == server.controller.scale.alpha_r
        assert cfg["dt"] == server.controller.dt
        assert cfg["decoupling"] == "temporal"
        assert cfg["model"] == "piper6"

        status, _, _ = await http_get(server.ws_port, "/missing")
        assert status == 404

    run_scenario(scenario)


def test_http_serves_placeholder_then_console_bundle(tmp_path):
    async def placeholder(server):
        status, headers, body = await http_get(server.ws_port, "/")
        assert status == 200
        assert headers["content-type"].startswith("text/html")
        assert b"glteleop" in body
        status, _, _ = await http_get(server.ws_port, "/app.js")
        assert status == 404

    run_scenario(placeholder)

    (tmp_path / "index.html").write_text("<h1>console</h1>")
    (tmp_path / "app.js").write_text("export const x = 1;\n")
    (tmp_path.parent / "secret.txt").write_text("outside the bundle")

    async def bundle(server):
        status, headers, body = await http_get(server.ws_port, "/")
        assert status == 200
        assert body == b"<h1>console</h1>"
        status, headers, body = await http_get(server.ws_port, "/app.js")
        assert status == 200
        assert headers["content-type"].startswith("text/javascript")
        assert body == b"export const x = 1;\n"
        status, _, _ = await http_get(server.ws_port, "/../secret.txt")
        assert status == 404

    run_scenario(bundle, console_dir=tmp_path)
