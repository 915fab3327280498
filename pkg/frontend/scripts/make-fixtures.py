"""Regenerate the TS test fixtures from the installed glteleop package.

Usage:  python3 scripts/make-fixtures.py   (from frontend/)

Writes tests/fixtures/fk-piper6.json (the /model document plus forward
kinematics expectations: joint origins and the EE pose for a handful of
joint vectors) and tests/fixtures/frames.json (messages encoded by the
reference implementation, as hex).  Fixture floats are chosen non-integral
so the canonical JSON text is identical across both encoders, letting the
TS tests assert byte-for-byte re-encoding.
"""

import json
from pathlib import Path

import numpy as np

from glteleop.kinematics import _fk_frames, forward_kinematics
from glteleop.models import load_model
from glteleop.protocol import (
    CartesianCommand,
    Error,
    Heartbeat,
    JointCommand,
    ModeSwitch,
    StateUpdate,
    TeleopMessage,
    encode,
)
from glteleop.server import model_to_dict

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def fk_fixture() -> None:
    model = load_model("piper6")
    chain = model.chain
    rng = np.random.default_rng(7)
    lo = np.array([l for l, _ in chain.joint_limits])
    hi = np.array([h for _, h in chain.joint_limits])
    vectors = [np.array(model.home), np.zeros(chain.dof)]
    for _ in range(6):
        vectors.append(rng.uniform(0.9 * lo, 0.9 * hi))

    cases = []
    for q in vectors:
        R, t, origins, _ = _fk_frames(chain, q)
        pose = forward_kinematics(chain, q)
        assert np.allclose(pose.position, t, atol=0.0)  # same walk, same floats
        cases.append(
            {
                "joints": [float(v) for v in q],
                "origins": [[float(v) for v in row] for row in origins],
                "ee_position": list(pose.position),
                "ee_orientation_wxyz": list(pose.orientation.as_wxyz()),
            }
        )
    doc = {"model": model_to_dict(model), "cases": cases}
    (FIXTURES / "fk-piper6.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote fk-piper6.json ({len(cases)} cases)")


def frames_fixture() -> None:
    messages = [
        TeleopMessage(
            session="live", arm="arm", seq=1, t_us=10000,
            payload=JointCommand(joints=(0.5, 1.125, -1.0625, 0.25, 0.75, -0.5)),
        ),
        TeleopMessage(
            session="live", arm="arm", seq=2, t_us=20000,
            payload=CartesianCommand(
                position=(0.125, -0.25, 0.4375),
                orientation_wxyz=(0.5, 0.5, 0.5, 0.5),
            ),
        ),
        TeleopMessage(
            session="live", arm="arm", seq=3, t_us=30000,
            payload=ModeSwitch(mode="local"),
        ),
        TeleopMessage(session="live", arm="arm", seq=4, t_us=40000, payload=Heartbeat()),
        TeleopMessage(
            session="live", arm="arm", seq=5, t_us=50000,
            payload=Error(code="safe-hold", text="authority tcp-1 silent"),
        ),
        TeleopMessage(
            session="live", arm="arm", seq=6, t_us=60000,
            payload=StateUpdate(
                tick=42,
                sim_time=0.42,
                joints=(0.5, 1.1015625, -1.0078125, 0.125, 0.703125, 0.0078125),
                velocities=(0.25, -0.125, 0.0625, 0.5, -0.75, 0.875),
                ee_position=(0.1875, -0.2109375, 0.6640625),
                ee_orientation_wxyz=(0.5, 0.5, 0.5, 0.5),
                effector=(0.5,),
                estopped=False,
                estop_reason=None,
                safe_hold=False,
                mode="local",
                pending=True,
            ),
        ),
    ]
    doc = [
        {"kind": type(m.payload).__name__, "hex": encode(m).hex()} for m in messages
    ]
    (FIXTURES / "frames.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote frames.json ({len(doc)} frames)")


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    fk_fixture()
    frames_fixture()
