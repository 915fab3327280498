"""Builders for the shipped scenario set.

Each builder returns a fully validated script; the YAML files under
``data/scenarios`` are generated by :func:`write_builtin_scenarios` and
committed, and a test keeps them bit-identical to the builders.  Seeded
builders use the package's own pseudo-random stream so a given seed produces
the same timeline on every platform, forever.

Design rules the builders follow so runs stay clean and measurable:

* device events step gently (well under velocity and tracking limits), so
  the simulated slave tracks tick-exactly, converging between phases;
* around every pedal press the active device is parked: the replica is held
  before Local engages, and the stylus is parked at its rest pose (exactly,
  bit-level) before Global is requested — mode transitions then happen at
  settled fixed points;
* waypoint goals are forward-kinematics poses of scripted joint targets, so
  "reached" is meaningful at tight tolerance.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

from .kinematics import forward_kinematics
from .models import load_model
from .noise import SplitMix64
from .rotation import from_axis_angle
from .scenario import (
    DeviceEvent,
    ExoEvent,
    GripperEvent,
    ImuEvent,
    PedalEvent,
    ReplicaEvent,
    ScenarioScript,
    StylusEvent,
    WaypointGoal,
    save_scenario,
)

EVENT_DT = 0.02  # 50 Hz master-device sampling in generated timelines

_EYE3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
_IDENTITY_WXYZ = (1.0, 0.0, 0.0, 0.0)


def _smoothstep(u: float) -> float:
    u = min(1.0, max(0.0, u))
    return u * u * (3.0 - 2.0 * u)


def _fk_waypoint(chain, joints, t, pos_tol, rot_tol) -> WaypointGoal:
    pose = forward_kinematics(chain, joints)
    return WaypointGoal(
        t=t,
        position=pose.position,
        orientation_wxyz=pose.orientation.as_wxyz(),
        pos_tol=pos_tol,
        rot_tol=rot_tol,
    )


def _ramp_joints(events, start, end, t0, steps, lead=EVENT_DT):
    """Append a smoothstep joint ramp; returns the time of the last event."""
    t = t0
    for k in range(1, steps + 1):
        t = t0 + k * lead
        s = _smoothstep(k / steps)
        q = end if k == steps else tuple(
            a + s * (b - a) for a, b in zip(start, end)
        )
        events.append(ReplicaEvent(t=t, joints=tuple(q)))
    return t


# ---- mode-switch stress ----


def switch_stress_scenario(seed: int) -> ScenarioScript:
    """Temporal scenario with four pedal presses and randomized excursions.

    Phase layout (seconds): Global ramp to a random posture (0..1.2), Local
    stylus wander and exact return (1.5..3.1), Global ramp to a second
    posture (3.5..4.7), a second Local excursion (5.0..6.6), and a Global
    return home (7.0..8.2).  Every Global request happens with the stylus
    parked bit-exactly at its rest pose.
    """
    rng = SplitMix64(seed)
    model = load_model("piper6")
    home = model.home
    rest = tuple(rng.uniform(-0.05, 0.05) for _ in range(3))

    delta1 = tuple(rng.uniform(-0.12, 0.12) for _ in home)
    delta2 = tuple(rng.uniform(-0.12, 0.12) for _ in home)
    posture1 = tuple(h + d for h, d in zip(home, delta1))
    posture2 = tuple(h + d for h, d in zip(home, delta2))

    events: list[DeviceEvent] = [
        ReplicaEvent(t=0.0, joints=home),
        StylusEvent(t=0.0, position=rest),
    ]

    def wander(t0: float, t1: float) -> None:
        """Stylus excursion on (t0, t1] that ends parked exactly at rest."""
        amp = tuple(rng.uniform(0.01, 0.04) for _ in range(3))
        freq = tuple(rng.uniform(0.5, 1.2) for _ in range(3))
        phase = tuple(rng.uniform(0.0, 2.0 * math.pi) for _ in range(3))
        axis_raw = (rng.normal(), rng.normal(), rng.normal())
        norm = math.sqrt(sum(v * v for v in axis_raw)) or 1.0
        axis = tuple(v / norm for v in axis_raw)
        twist = rng.uniform(0.05, 0.15)
        steps = int(round((t1 - t0) / EVENT_DT))
        for k in range(1, steps + 1):
            u = k / steps
            envelope = math.sin(math.pi * u) ** 2
            pos = tuple(
                r + a * envelope * math.sin(2.0 * math.pi * f * u + p)
                for r, a, f, p in zip(rest, amp, freq, phase)
            )
            angle = twist * envelope * math.sin(2.0 * math.pi * u)
            q = from_axis_angle(axis, angle).as_wxyz()
            events.append(StylusEvent(t=t0 + k * EVENT_DT, position=pos, orientation_wxyz=q))
        # Park exactly: the Global request must see zero displacement.
        events.append(StylusEvent(t=t1 + EVENT_DT, position=rest))

    _ramp_joints(events, home, posture1, 0.0, 60)  # ends at t=1.2
    events.append(GripperEvent(t=1.3, value=0.3))
    events.append(PedalEvent(t=1.5, mode="local"))
    wander(1.52, 3.08)  # park event lands at 3.10
    events.append(PedalEvent(t=3.3, mode="global"))
    _ramp_joints(events, posture1, posture2, 3.5, 60)  # ends at t=4.7
    events.append(GripperEvent(t=4.8, value=0.7))
    events.append(PedalEvent(t=5.0, mode="local"))
    wander(5.02, 6.58)  # park event lands at 6.60
    events.append(PedalEvent(t=6.8, mode="global"))
    _ramp_joints(events, posture2, home, 7.0, 60)  # ends at t=8.2

    waypoints = (
        _fk_waypoint(model.chain, posture1, 1.45, 1e-4, 1e-3),
        _fk_waypoint(model.chain, posture2, 4.95, 1e-4, 1e-3),
        _fk_waypoint(model.chain, home, 9.8, 1e-4, 1e-3),
    )
    return ScenarioScript(
        name=f"switch-stress-{seed:03d}",
        model="piper6",
        decoupling="temporal",
        controller={"alpha_l": 0.5, "alpha_r": 0.5},
        duration=10.0,
        events=tuple(events),
        waypoints=waypoints,
    )


# ---- precision under stylus noise ----


def precision_scenario(
    alpha_l: float,
    seed: int,
    sigma: float = 0.002,
    pos_tol: float | None = None,
) -> ScenarioScript:
    """Hold a Local anchor under noisy stylus input; score the final error.

    The stylus is parked at its rest pose when Local engages, then jitters
    around it with per-axis Gaussian noise of the given sigma.  The goal is
    the engage pose itself, so the final error is exactly the clutch-scaled
    final noise sample plus solver residue — which is why this scenario
    pins a much tighter IK tolerance than the default.
    """
    rng = SplitMix64(seed)
    model = load_model("piper6")
    home = model.home
    rest = (0.0, 0.0, 0.0)

    events: list[DeviceEvent] = [
        ReplicaEvent(t=0.0, joints=home),
        StylusEvent(t=0.0, position=rest),
        PedalEvent(t=0.3, mode="local"),
    ]
    steps = int(round(1.1 / EVENT_DT))
    for k in range(1, steps + 1):
        noisy = tuple(r + rng.normal(0.0, sigma) for r in rest)
        events.append(StylusEvent(t=0.4 + k * EVENT_DT, position=noisy))

    goal = _fk_waypoint(
        model.chain,
        home,
        2.0,
        pos_tol if pos_tol is not None else 6.0 * sigma,
        0.05,
    )
    return ScenarioScript(
        name=f"precision-a{alpha_l:g}-s{seed:03d}",
        model="piper6",
        decoupling="temporal",
        controller={"alpha_l": alpha_l, "alpha_r": 1.0},
        duration=2.0,
        events=tuple(events),
        waypoints=(goal,),
        ik={"pos_tol": 1e-7, "ang_tol": 1e-6},
    )


# ---- full joint-range sweep ----


def full_range_scenario() -> ScenarioScript:
    """Global-mode sweep of each joint to 97.5% of both limits, one at a time.

    Single-joint excursions from the home posture keep the end effector
    inside the workspace box over the whole path (combined extremes would
    not); each extreme is held and scored as an FK waypoint.
    """
    model = load_model("flexiv7")
    home = list(model.home)
    events: list[DeviceEvent] = [ReplicaEvent(t=0.0, joints=tuple(home))]
    waypoints: list[WaypointGoal] = []
    step, lead, hold = 0.1, 0.05, 0.3
    t = 0.0

    def leg(joint: int, target: float) -> None:
        nonlocal t
        current = list(home)
        start = current[joint]
        n = max(1, math.ceil(abs(target - start) / step))
        for k in range(1, n + 1):
            t += lead
            current[joint] = target if k == n else start + (target - start) * k / n
            events.append(ReplicaEvent(t=t, joints=tuple(current)))
        home[joint] = target

    for j, (lo, hi) in enumerate(model.chain.joint_limits):
        margin = 0.025 * (hi - lo)
        rest = home[j]
        for extreme in (hi - margin, lo + margin):
            leg(j, extreme)
            t += hold
            waypoints.append(_fk_waypoint(model.chain, tuple(home), t, 1e-4, 1e-3))
        leg(j, rest)
        t += 0.2

    return ScenarioScript(
        name="full-range-7dof",
        model="flexiv7",
        decoupling="temporal",
        controller={"alpha_l": 1.0, "alpha_r": 1.0},
        duration=math.ceil(t + 0.5),
        events=tuple(events),
        waypoints=tuple(waypoints),
    )


# ---- hand articulation sequence ----

# Encoder poses matching the shipped default hand calibration.
_HAND_OPEN = (-0.2, 0.0, 0.0, 0.0, 0.0, 0.0)
_HAND_CLOSED = (0.9, 1.1, 1.3, 1.2, 1.4, 0.5)


def hand_sequence_scenario() -> ScenarioScript:
    """Spatial scenario articulating the hand through its calibrated range.

    Full close and reopen, then a thumb-only curl, with a wrist roll driven
    through the hand-IMU channel mid-sequence.  Ends back at the open pose
    and the home posture.
    """
    model = load_model("flexiv7")
    proximal = model.home[:4]
    events: list[DeviceEvent] = [
        ReplicaEvent(t=0.0, joints=proximal),
        ImuEvent(t=0.0, r1=_EYE3, r2=_EYE3),
    ]

    def sweep(t0: float, start, end, seconds: float) -> None:
        steps = int(round(seconds / EVENT_DT))
        for k in range(1, steps + 1):
            s = _smoothstep(k / steps)
            enc = end if k == steps else tuple(
                a + s * (b - a) for a, b in zip(start, end)
            )
            events.append(ExoEvent(t=t0 + k * EVENT_DT, encoders=tuple(enc)))

    events.append(ExoEvent(t=0.1, encoders=_HAND_OPEN))
    sweep(0.2, _HAND_OPEN, _HAND_CLOSED, 1.0)  # full close by 1.2
    sweep(1.6, _HAND_CLOSED, _HAND_OPEN, 1.0)  # reopen by 2.6
    thumb_only = (0.9, 1.1, 1.3, 0.0, 0.0, 0.0)
    sweep(2.8, _HAND_OPEN, thumb_only, 0.6)  # thumb curl by 3.4
    sweep(3.6, thumb_only, _HAND_OPEN, 0.6)  # reopen by 4.2

    # Wrist roll via the hand IMU while the fingers work: rotate about x and
    # come back to the exact calibration attitude.
    steps = int(round(1.0 / EVENT_DT))
    for k in range(1, steps + 1):
        u = k / steps
        angle = 0.4 * math.sin(math.pi * u) ** 2
        c, s = math.cos(angle), math.sin(angle)
        r2 = ((1.0, 0.0, 0.0), (0.0, c, -s), (0.0, s, c))
        events.append(ImuEvent(t=1.5 + k * EVENT_DT, r1=_EYE3, r2=r2))
    events.append(ImuEvent(t=2.6, r1=_EYE3, r2=_EYE3))

    events.sort(key=lambda e: e.t)
    goal = _fk_waypoint(model.chain, model.home, 4.6, 1e-4, 1e-3)
    return ScenarioScript(
        name="hand-sequence",
        model="flexiv7",
        decoupling="spatial",
        controller={"alpha_l": 1.0, "alpha_r": 1.0},
        duration=4.6,
        events=tuple(events),
        waypoints=(goal,),
    )


# ---- heartbeat-silence probe ----


def safe_hold_probe_scenario() -> ScenarioScript:
    """One command, then silence: the session must reach safe-hold unaided."""
    model = load_model("piper6")
    return ScenarioScript(
        name="safe-hold-probe",
        model="piper6",
        decoupling="temporal",
        controller={"alpha_l": 0.5, "alpha_r": 0.5},
        duration=0.6,
        events=(ReplicaEvent(t=0.0, joints=model.home),),
        heartbeat_period=0.0,
    )


# ---- shipped set ----

_BUILTIN_BUILDERS = {
    "switch-stress": lambda: switch_stress_scenario(0),
    "precision-fine": lambda: precision_scenario(0.1, seed=0, pos_tol=1e-3),
    "full-range-7dof": full_range_scenario,
    "hand-sequence": hand_sequence_scenario,
    "safe-hold-probe": safe_hold_probe_scenario,
}


def write_builtin_scenarios(directory: str | Path) -> list[Path]:
    """Regenerate the shipped scenario files; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, build in sorted(_BUILTIN_BUILDERS.items()):
        path = directory / f"{name}.yaml"
        # The shipped copy answers to its registry name.
        script = dataclasses.replace(build(), name=name)
        save_scenario(script, path)
        written.append(path)
    return written
