"""Framed wire protocol for teleoperation sessions.

Frame layout: a 4-byte big-endian unsigned body length, then a UTF-8 JSON
body of at most `MAX_FRAME` bytes:

    {"v": 1, "session": "...", "arm": "...", "seq": N, "t_us": N,
     "kind": "<payload class name>", "payload": {...}}

Every message carries exactly one payload.  Floats are serialized with
Python's shortest-round-trip repr, so `decode(encode(m)) == m` bit-exactly;
NaN/Infinity are rejected in both directions.  Sequence numbers are strictly
increasing per (session, sender) — enforced by the session layer, carried
here.  The identical frames travel over TCP and over the websocket gateway
(one websocket binary message per frame, prefix included).

Validation philosophy: the wire layer checks structure and finiteness only;
semantic ranges (unit quaternions, channel ranges, joint limits) belong to
the session/controller layers so that arbitrary finite values round-trip.

Errors: `FramingError` (length/truncation), `VersionError` (unsupported
`v`), `ProtocolError` (everything else malformed).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 20  # body bytes


class ProtocolError(Exception):
    """Malformed message body or payload."""


class FramingError(ProtocolError):
    """Malformed frame: bad length, truncation, or trailing bytes."""


class VersionError(ProtocolError):
    """Protocol version negotiation failure."""


# ---- field checkers ----


def _check_str(value, label: str, allow_empty: bool = False) -> str:
    if not isinstance(value, str) or (not allow_empty and not value):
        raise ValueError(f"{label} must be a non-empty string: {value!r}")
    return value


def _check_int(value, label: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{label} must be an integer: {value!r}")
    if not (0 <= value < 2**63):
        raise ValueError(f"{label} out of range: {value}")
    return value


def _check_bool(value, label: str) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"{label} must be a boolean: {value!r}")
    return value


def _check_float(value, label: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{label} must be a number: {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{label} must be finite: {value}")
    return value


def _check_floats(value, label: str, length: Optional[int] = None) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"{label} must be a list: {value!r}")
    out = tuple(_check_float(v, f"{label}[{i}]") for i, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ValueError(f"{label} must have {length} values, got {len(out)}")
    return out


def _check_keys(doc: dict, keys: set[str], kind: str) -> None:
    missing = keys - set(doc)
    if missing:
        raise ValueError(f"{kind}: missing field(s) {sorted(missing)}")
    extra = set(doc) - keys
    if extra:
        raise ValueError(f"{kind}: unexpected field(s) {sorted(extra)}")


# ---- payloads ----


@dataclass(frozen=True)
class JointCommand:
    """Master-side joint readings (the replica device stream)."""

    joints: tuple[float, ...]

    def __post_init__(self):
        joints = _check_floats(self.joints, "joints")
        if not joints:
            raise ValueError("joints must be non-empty")
        object.__setattr__(self, "joints", joints)

    def to_payload(self) -> dict:
        return {"joints": list(self.joints)}

    @classmethod
    def from_payload(cls, doc: dict) -> "JointCommand":
        _check_keys(doc, {"joints"}, "JointCommand")
        return cls(joints=tuple(doc["joints"]) if isinstance(doc["joints"], list) else doc["joints"])


@dataclass(frozen=True)
class CartesianCommand:
    """Master-side Cartesian stream: the raw stylus pose (temporal rigs) or
    the combined wrist orientation with a zero position (spatial rigs)."""

    position: tuple[float, float, float]
    orientation_wxyz: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "position", _check_floats(self.position, "position", 3))
        object.__setattr__(
            self,
            "orientation_wxyz",
            _check_floats(self.orientation_wxyz, "orientation_wxyz", 4),
        )

    def to_payload(self) -> dict:
        return {
            "position": list(self.position),
            "orientation_wxyz": list(self.orientation_wxyz),
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "CartesianCommand":
        _check_keys(doc, {"position", "orientation_wxyz"}, "CartesianCommand")
        return cls(position=doc["position"], orientation_wxyz=doc["orientation_wxyz"])


@dataclass(frozen=True)
class GripperCommand:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _check_float(self.value, "value"))

    def to_payload(self) -> dict:
        return {"value": self.value}

    @classmethod
    def from_payload(cls, doc: dict) -> "GripperCommand":
        _check_keys(doc, {"value"}, "GripperCommand")
        return cls(value=doc["value"])


@dataclass(frozen=True)
class HandCommand:
    """Retargeted hand channels (thumb bend, thumb rotation, index..pinky)."""

    channels: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", _check_floats(self.channels, "channels", 6))

    def to_payload(self) -> dict:
        return {"channels": list(self.channels)}

    @classmethod
    def from_payload(cls, doc: dict) -> "HandCommand":
        _check_keys(doc, {"channels"}, "HandCommand")
        return cls(channels=doc["channels"])


_MODES = ("global", "local")


@dataclass(frozen=True)
class ModeSwitch:
    """Pedal event requesting a temporal mode."""

    mode: str

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}: {self.mode!r}")

    def to_payload(self) -> dict:
        return {"mode": self.mode}

    @classmethod
    def from_payload(cls, doc: dict) -> "ModeSwitch":
        _check_keys(doc, {"mode"}, "ModeSwitch")
        return cls(mode=doc["mode"])


_STATE_MODES = ("global", "local", "spatial")


@dataclass(frozen=True)
class StateUpdate:
    """Per-tick slave state broadcast."""

    tick: int
    sim_time: float
    joints: tuple[float, ...]
    velocities: tuple[float, ...]
    ee_position: tuple[float, float, float]
    ee_orientation_wxyz: tuple[float, float, float, float]
    effector: tuple[float, ...]
    estopped: bool
    estop_reason: Optional[str]
    safe_hold: bool
    mode: str
    pending: bool

    def __post_init__(self):
        object.__setattr__(self, "tick", _check_int(self.tick, "tick"))
        object.__setattr__(self, "sim_time", _check_float(self.sim_time, "sim_time"))
        joints = _check_floats(self.joints, "joints")
        velocities = _check_floats(self.velocities, "velocities")
        if len(joints) != len(velocities):
            raise ValueError(
                f"joints/velocities length mismatch: {len(joints)} != {len(velocities)}"
            )
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "velocities", velocities)
        object.__setattr__(
            self, "ee_position", _check_floats(self.ee_position, "ee_position", 3)
        )
        object.__setattr__(
            self,
            "ee_orientation_wxyz",
            _check_floats(self.ee_orientation_wxyz, "ee_orientation_wxyz", 4),
        )
        object.__setattr__(self, "effector", _check_floats(self.effector, "effector"))
        object.__setattr__(self, "estopped", _check_bool(self.estopped, "estopped"))
        if self.estop_reason is not None:
            _check_str(self.estop_reason, "estop_reason", allow_empty=True)
        object.__setattr__(self, "safe_hold", _check_bool(self.safe_hold, "safe_hold"))
        if self.mode not in _STATE_MODES:
            raise ValueError(f"mode must be one of {_STATE_MODES}: {self.mode!r}")
        object.__setattr__(self, "pending", _check_bool(self.pending, "pending"))

    def to_payload(self) -> dict:
        return {
            "tick": self.tick,
            "sim_time": self.sim_time,
            "joints": list(self.joints),
            "velocities": list(self.velocities),
            "ee_position": list(self.ee_position),
            "ee_orientation_wxyz": list(self.ee_orientation_wxyz),
            "effector": list(self.effector),
            "estopped": self.estopped,
            "estop_reason": self.estop_reason,
            "safe_hold": self.safe_hold,
            "mode": self.mode,
            "pending": self.pending,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "StateUpdate":
        _check_keys(
            doc,
            {
                "tick",
                "sim_time",
                "joints",
                "velocities",
                "ee_position",
                "ee_orientation_wxyz",
                "effector",
                "estopped",
                "estop_reason",
                "safe_hold",
                "mode",
                "pending",
            },
            "StateUpdate",
        )
        return cls(**doc)


@dataclass(frozen=True)
class Heartbeat:
    def to_payload(self) -> dict:
        return {}

    @classmethod
    def from_payload(cls, doc: dict) -> "Heartbeat":
        _check_keys(doc, set(), "Heartbeat")
        return cls()


@dataclass(frozen=True)
class Estop:
    reason: str

    def __post_init__(self):
        _check_str(self.reason, "reason", allow_empty=True)

    def to_payload(self) -> dict:
        return {"reason": self.reason}

    @classmethod
    def from_payload(cls, doc: dict) -> "Estop":
        _check_keys(doc, {"reason"}, "Estop")
        return cls(reason=doc["reason"])


@dataclass(frozen=True)
class Reset:
    def to_payload(self) -> dict:
        return {}

    @classmethod
    def from_payload(cls, doc: dict) -> "Reset":
        _check_keys(doc, set(), "Reset")
        return cls()


@dataclass(frozen=True)
class Error:
    code: str
    text: str

    def __post_init__(self):
        _check_str(self.code, "code")
        _check_str(self.text, "text", allow_empty=True)

    def to_payload(self) -> dict:
        return {"code": self.code, "text": self.text}

    @classmethod
    def from_payload(cls, doc: dict) -> "Error":
        _check_keys(doc, {"code", "text"}, "Error")
        return cls(code=doc["code"], text=doc["text"])


Payload = Union[
    JointCommand,
    CartesianCommand,
    GripperCommand,
    HandCommand,
    ModeSwitch,
    StateUpdate,
    Heartbeat,
    Estop,
    Reset,
    Error,
]

_KINDS = {
    cls.__name__: cls
    for cls in (
        JointCommand,
        CartesianCommand,
        GripperCommand,
        HandCommand,
        ModeSwitch,
        StateUpdate,
        Heartbeat,
        Estop,
        Reset,
        Error,
    )
}

COMMAND_KINDS = (JointCommand, CartesianCommand, GripperCommand, HandCommand, ModeSwitch)


# ---- messages ----


@dataclass(frozen=True)
class TeleopMessage:
    session: str
    arm: str
    seq: int
    t_us: int
    payload: Payload

    def __post_init__(self):
        _check_str(self.session, "session")
        _check_str(self.arm, "arm")
        _check_int(self.seq, "seq")
        _check_int(self.t_us, "t_us")
        if type(self.payload).__name__ not in _KINDS:
            raise ValueError(f"unknown payload type: {type(self.payload)}")


_TOP_KEYS = {"v", "session", "arm", "seq", "t_us", "kind", "payload"}


def encode(message: TeleopMessage) -> bytes:
    """Serialize one message to a complete frame (prefix + body)."""
    body = {
        "v": PROTOCOL_VERSION,
        "session": message.session,
        "arm": message.arm,
        "seq": message.seq,
        "t_us": message.t_us,
        "kind": type(message.payload).__name__,
        "payload": message.payload.to_payload(),
    }
    try:
        data = json.dumps(
            body, separators=(",", ":"), sort_keys=True, allow_nan=False
        ).encode("utf-8")
    except ValueError as exc:
        raise ProtocolError(f"message not serializable: {exc}") from None
    if len(data) > MAX_FRAME:
        raise FramingError(f"encoded body is {len(data)} bytes, max {MAX_FRAME}")
    return struct.pack(">I", len(data)) + data


def _reject_constant(name: str):
    raise ProtocolError(f"non-finite JSON constant: {name}")


def decode_body(body: bytes) -> TeleopMessage:
    """Parse one frame body (without the length prefix)."""
    try:
        doc = json.loads(body.decode("utf-8"), parse_constant=_reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"body is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolError(f"body is not an object: {type(doc).__name__}")
    try:
        _check_keys(doc, _TOP_KEYS, "message")
    except ValueError as exc:
        raise ProtocolError(str(exc)) from None
    version = doc["v"]
    if isinstance(version, bool) or version != PROTOCOL_VERSION:
        raise VersionError(
            f"unsupported protocol version {version!r}, this peer speaks {PROTOCOL_VERSION}"
        )
    kind = doc["kind"]
    if not isinstance(kind, str) or kind not in _KINDS:
        raise ProtocolError(f"unknown payload kind {kind!r}")
    payload_doc = doc["payload"]
    if not isinstance(payload_doc, dict):
        raise ProtocolError(f"payload must be an object: {payload_doc!r}")
    try:
        payload = _KINDS[kind].from_payload(payload_doc)
        return TeleopMessage(
            session=doc["session"],
            arm=doc["arm"],
            seq=doc["seq"],
            t_us=doc["t_us"],
            payload=payload,
        )
    except (ValueError, TypeError) as exc:
        raise ProtocolError(str(exc)) from None


def decode(frame: bytes) -> TeleopMessage:
    """Parse exactly one complete frame (prefix + body)."""
    if len(frame) < 4:
        raise FramingError(f"truncated frame: {len(frame)} bytes")
    (length,) = struct.unpack(">I", frame[:4])
    if length > MAX_FRAME:
        raise FramingError(f"declared body length {length} exceeds max {MAX_FRAME}")
    if len(frame) - 4 < length:
        raise FramingError(
            f"truncated frame: declared {length} body bytes, got {len(frame) - 4}"
        )
    if len(frame) - 4 > length:
        raise FramingError(
            f"trailing bytes after frame: {len(frame) - 4 - length}"
        )
    return decode_body(frame[4:])


class FrameDecoder:
    """Incremental frame reassembly for a byte stream.

    `feed` returns complete frames (prefix included) as they materialize;
    partial data is buffered.  A declared length over `MAX_FRAME` raises
    immediately — the stream is unrecoverable after that.
    """

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= 4:
            (length,) = struct.unpack(">I", bytes(self._buf[:4]))
            if length > MAX_FRAME:
                raise FramingError(
                    f"declared body length {length} exceeds max {MAX_FRAME}"
                )
            if len(self._buf) - 4 < length:
                break
            frames.append(bytes(self._buf[: 4 + length]))
            del self._buf[: 4 + length]
        return frames

    @property
    def pending(self) -> bool:
        return bool(self._buf)
