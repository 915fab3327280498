"""Wire protocol tests: framing, round-trips, strict validation."""

from __future__ import annotations

import json
import math
import struct

import numpy as np
import pytest

from glteleop.protocol import (
    MAX_FRAME,
    PROTOCOL_VERSION,
    CartesianCommand,
    Error,
    Estop,
    FrameDecoder,
    FramingError,
    GripperCommand,
    HandCommand,
    Heartbeat,
    JointCommand,
    ModeSwitch,
    ProtocolError,
    Reset,
    StateUpdate,
    TeleopMessage,
    VersionError,
    decode,
    encode,
)


def msg(payload, seq=1, t_us=1000) -> TeleopMessage:
    return TeleopMessage(session="s1", arm="left", seq=seq, t_us=t_us, payload=payload)


def sample_state_update() -> StateUpdate:
    return StateUpdate(
        tick=42,
        sim_time=0.42,
        joints=(0.1, -0.2, 0.3),
        velocities=(0.0, 0.1, -0.1),
        ee_position=(0.4, 0.0, 0.6),
        ee_orientation_wxyz=(1.0, 0.0, 0.0, 0.0),
        effector=(0.5,),
        estopped=False,
        estop_reason=None,
        safe_hold=False,
        mode="global",
        pending=False,
    )


ALL_PAYLOADS = [
    JointCommand(joints=(0.1, 0.2, 0.3, -0.4, 0.5, 0.6)),
    CartesianCommand(
        position=(0.1, -0.2, 0.3),
        orientation_wxyz=(0.4, -0.3, 0.2, 0.845),
    ),
    GripperCommand(value=0.75),
    HandCommand(channels=(0.0, 0.1, 0.2, 0.2, 0.2, 0.2)),
    ModeSwitch(mode="local"),
    sample_state_update(),
    Heartbeat(),
    Estop(reason="operator stop"),
    Reset(),
    Error(code="stale-seq", text="sequence 4 after 9"),
]


# ---- round trips ----


@pytest.mark.parametrize("payload", ALL_PAYLOADS, ids=lambda p: type(p).__name__)
def test_round_trip_identity(payload):
    m = msg(payload)
    assert decode(encode(m)) == m


def test_round_trip_preserves_floats_bit_exactly():
    rng = np.random.default_rng(127)
    for _ in range(200):
        joints = tuple(float(v) for v in rng.uniform(-10, 10, 7))
        m = msg(JointCommand(joints=joints), seq=int(rng.integers(0, 2**40)))
        back = decode(encode(m))
        assert all(
            struct.pack("<d", a) == struct.pack("<d", b)
            for a, b in zip(back.payload.joints, joints)
        )


def test_frame_layout():
    data = encode(msg(Heartbeat()))
    length = struct.unpack(">I", data[:4])[0]
    assert length == len(data) - 4
    body = json.loads(data[4:].decode("utf-8"))
    assert body["v"] == PROTOCOL_VERSION
    assert body["kind"] == "Heartbeat"
    assert body["payload"] == {}


# ---- framing ----


def test_decoder_reassembles_byte_at_a_time():
    frames = [encode(msg(Heartbeat(), seq=i)) for i in range(1, 4)]
    stream = b"".join(frames)
    decoder = FrameDecoder()
    got = []
    for i in range(len(stream)):
        got.extend(decoder.feed(stream[i : i + 1]))
    assert len(got) == 3
    assert [decode(f).seq for f in got] == [1, 2, 3]
    assert not decoder.pending


def test_decoder_keeps_partial_frame():
    frame = encode(msg(Heartbeat()))
    decoder = FrameDecoder()
    assert decoder.feed(frame[:-1]) == []
    assert decoder.pending
    assert decoder.feed(frame[-1:]) == [frame]


def test_oversized_declared_length_rejected():
    decoder = FrameDecoder()
    with pytest.raises(FramingError, match="exceeds"):
        decoder.feed(struct.pack(">I", MAX_FRAME + 1))


def test_oversized_body_rejected_on_encode():
    big = Error(code="x", text="y" * (MAX_FRAME + 10))
    with pytest.raises(FramingError):
        encode(msg(big))


def test_decode_requires_exactly_one_frame():
    frame = encode(msg(Heartbeat()))
    with pytest.raises(FramingError, match="truncated"):
        decode(frame[:-2])
    with pytest.raises(FramingError, match="trailing"):
        decode(frame + b"!")
    with pytest.raises(FramingError):
        decode(b"\x00\x01")


# ---- validation ----


def raw_frame(body: dict) -> bytes:
    data = json.dumps(body).encode("utf-8")
    return struct.pack(">I", len(data)) + data


def base_body(**over):
    body = {
        "v": PROTOCOL_VERSION,
        "session": "s1",
        "arm": "left",
        "seq": 1,
        "t_us": 5,
        "kind": "Heartbeat",
        "payload": {},
    }
    body.update(over)
    return body


def test_version_mismatch():
    with pytest.raises(VersionError):
        decode(raw_frame(base_body(v=2)))


def test_unknown_kind_carries_kind_string():
    with pytest.raises(ProtocolError, match="WarpDrive"):
        decode(raw_frame(base_body(kind="WarpDrive")))


def test_non_json_body():
    data = b"\xff\xfe not json"
    with pytest.raises(ProtocolError):
        decode(struct.pack(">I", len(data)) + data)


def test_nan_rejected_on_decode():
    body = json.dumps(
        base_body(kind="GripperCommand", payload={"value": float("nan")})
    ).encode()
    with pytest.raises(ProtocolError):
        decode(struct.pack(">I", len(body)) + body)


def test_nan_rejected_on_encode():
    bad = msg(CartesianCommand(position=(0.0, 0.0, 0.0), orientation_wxyz=(1, 0, 0, 0)))
    object.__setattr__(bad.payload, "position", (float("inf"), 0.0, 0.0))
    with pytest.raises((ProtocolError, ValueError)):
        encode(bad)


def test_missing_field_rejected():
    body = base_body()
    del body["seq"]
    with pytest.raises(ProtocolError, match="seq"):
        decode(raw_frame(body))


def test_extra_top_level_field_rejected():
    with pytest.raises(ProtocolError, match="unexpected"):
        decode(raw_frame(base_body(debug=True)))


def test_extra_payload_field_rejected():
    body = base_body(kind="GripperCommand", payload={"value": 0.5, "turbo": 1})
    with pytest.raises(ProtocolError, match="turbo"):
        decode(raw_frame(body))


def test_wrong_type_fields_rejected():
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(seq="one")))
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(seq=True)))
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(seq=-1)))
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(session="")))


def test_mode_switch_value_validated():
    with pytest.raises(ProtocolError, match="mode"):
        decode(raw_frame(base_body(kind="ModeSwitch", payload={"mode": "turbo"})))
    with pytest.raises(ValueError):
        ModeSwitch(mode="turbo")


def test_payload_shape_validated():
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(kind="CartesianCommand", payload={
            "position": [0.0, 0.0], "orientation_wxyz": [1.0, 0.0, 0.0, 0.0]})))
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(kind="HandCommand", payload={"channels": [0.1] * 5})))
    with pytest.raises(ProtocolError):
        decode(raw_frame(base_body(kind="JointCommand", payload={"joints": []})))


# ---- fuzz (small here; the acceptance suite runs the full count) ----


def random_message(rng) -> TeleopMessage:
    kind = rng.integers(0, 6)
    if kind == 0:
        payload = JointCommand(
            joints=tuple(float(v) for v in rng.uniform(-7, 7, int(rng.integers(1, 9))))
        )
    elif kind == 1:
        payload = CartesianCommand(
            position=tuple(float(v) for v in rng.uniform(-2, 2, 3)),
            orientation_wxyz=tuple(float(v) for v in rng.normal(size=4)),
        )
    elif kind == 2:
        payload = GripperCommand(value=float(rng.uniform(0, 1)))
    elif kind == 3:
        payload = HandCommand(
            channels=tuple(float(v) for v in rng.uniform(0, 1, 6))
        )
    elif kind == 4:
        payload = ModeSwitch(mode="global" if rng.integers(0, 2) else "local")
    else:
        payload = Estop(reason=f"fuzz {rng.integers(0, 1000)}")
    return TeleopMessage(
        session=f"s{rng.integers(0, 10)}",
        arm=f"arm{rng.integers(0, 3)}",
        seq=int(rng.integers(0, 2**50)),
        t_us=int(rng.integers(0, 2**50)),
        payload=payload,
    )


def test_fuzz_round_trip_sample():
    rng = np.random.default_rng(131)
    for _ in range(2000):
        m = random_message(rng)
        assert decode(encode(m)) == m
