"""Global-Local teleoperation controllers.

Two decoupling schemes turn master-device readings into slave commands:

Temporal decoupling (6-DOF arm + stylus + replica + pedals): exactly one of
two master devices is active at a time.  In Global mode the joint-replica
reading is passed through 1:1 as a joint target.  In Local mode the stylus
drives the end-effector through a clutched, scaled map: at engage the stylus
pose and the slave EE pose are anchored, and afterwards

    position    = ee_anchor + alpha_l * (p - p0)
    orientation = ee_anchor_q composed (body frame) with the stylus
                  displacement since engage, its angle scaled by alpha_r

While Local is active the replica physically mirrors the slave
(`mirror_update`), so that switching back to Global causes no jump: the
switch is deferred until the mirror has converged (gap below `MIRROR_GATE`),
during which the Cartesian target is frozen and stylus input is ignored.  On
the grant tick the mirror's exact snap puts the replica bit-equal to the
slave joints, and the first Global command is exactly those joints.

Spatial decoupling (7-DOF arm + 4-joint replica + forearm/hand IMU pair +
glove): both devices are active simultaneously.  The proximal four joints
copy the replica; the wrist three realize the intrinsic Euler angles of the
relative hand-vs-forearm rotation

    R_s = R1^-1 . R1_home . R2_home^-1 . R2

clamped to the chain's wrist limits (clamping is logged, not rejected — the
human wrist can exceed the robot's).

Both controllers are pure functions on immutable snapshots; all mutable
bookkeeping lives in the caller's `TemporalState` threading.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .commands import CartesianTarget, GripperTarget, JointTarget, SlaveCommand
from .hand import HandTarget
from .kinematics import KinematicChain, Pose
from .rotation import (
    UnitQuaternion,
    check_rotation_matrix,
    compose,
    extract_euler,
    from_axis_angle,
    identity,
    rotate_vector,
    scaled_displacement,
)

# Mirror convergence gate for re-enabling Global mode (inf-norm, radians):
# below human perception, above numeric noise.
MIRROR_GATE = 1e-3


# ---- configuration ----


@dataclass(frozen=True)
class ScalingFactors:
    """Linear and rotational clutch scaling, both in (0, 1]."""

    alpha_l: float
    alpha_r: float

    def __post_init__(self):
        for name, value in (("alpha_l", self.alpha_l), ("alpha_r", self.alpha_r)):
            value = float(value)
            if not (math.isfinite(value) and 0.0 < value <= 1.0):
                raise ValueError(f"{name} must be in (0, 1]: {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class ControllerConfig:
    """Per-arm controller settings (see `config_from_dict` for file keys)."""

    scale: ScalingFactors
    alignment: UnitQuaternion
    mirror_velocity_limit: float
    control_rate_hz: float

    def __post_init__(self):
        if not (
            math.isfinite(self.mirror_velocity_limit)
            and self.mirror_velocity_limit > 0.0
        ):
            raise ValueError(
                f"mirror_velocity_limit must be positive: {self.mirror_velocity_limit}"
            )
        if not (math.isfinite(self.control_rate_hz) and self.control_rate_hz > 0.0):
            raise ValueError(f"control_rate_hz must be positive: {self.control_rate_hz}")
        # One mirror step must be able to cover the convergence gate, or the
        # final exact snap onto the slave could never happen.
        if self.mirror_velocity_limit * self.dt < MIRROR_GATE:
            raise ValueError(
                f"mirror velocity limit {self.mirror_velocity_limit} rad/s cannot "
                f"cover the {MIRROR_GATE} rad convergence gate in one "
                f"{self.dt * 1e3:.1f} ms tick"
            )

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate_hz


_CONFIG_KEYS = {
    "alpha_l",
    "alpha_r",
    "mirror_velocity_limit",
    "control_rate_hz",
    "alignment_wxyz",
}


def config_from_dict(doc: dict) -> ControllerConfig:
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown controller config keys: {sorted(unknown)}")
    alignment = identity()
    if "alignment_wxyz" in doc:
        w, x, y, z = (float(v) for v in doc["alignment_wxyz"])
        alignment = UnitQuaternion(w, x, y, z)
    return ControllerConfig(
        scale=ScalingFactors(
            float(doc.get("alpha_l", 0.5)), float(doc.get("alpha_r", 0.5))
        ),
        alignment=alignment,
        mirror_velocity_limit=float(doc.get("mirror_velocity_limit", 2.0)),
        control_rate_hz=float(doc.get("control_rate_hz", 100)),
    )


def load_controller_config(path) -> ControllerConfig:
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: controller config is not a mapping")
    try:
        return config_from_dict(doc)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


# ---- clutching ----


@dataclass(frozen=True)
class ClutchAnchor:
    """Stylus and slave EE poses captured at a Local-mode engage."""

    p0: tuple[float, float, float]
    q0: UnitQuaternion
    ee_anchor: Pose


def engage_local(haptic: Pose, slave_ee: Pose) -> ClutchAnchor:
    """Anchor the clutch at the current stylus pose and slave EE pose."""
    return ClutchAnchor(p0=haptic.position, q0=haptic.orientation, ee_anchor=slave_ee)


_IDENTITY = identity()


def local_target(
    anchor: ClutchAnchor,
    haptic: Pose,
    scale: ScalingFactors,
    alignment: UnitQuaternion = _IDENTITY,
) -> CartesianTarget:
    """Clutched, scaled Cartesian target from the stylus displacement.

    The identity-alignment path is pure elementwise arithmetic, so the
    position offset is bit-derivably alpha_l * (p - p0).
    """
    dp = tuple(p - p0 for p, p0 in zip(haptic.position, anchor.p0))
    if alignment != _IDENTITY:
        dp = rotate_vector(alignment, dp)
    position = tuple(
        e + scale.alpha_l * d for e, d in zip(anchor.ee_anchor.position, dp)
    )
    disp = scaled_displacement(anchor.q0, haptic.orientation, scale.alpha_r)
    orientation = compose(
        anchor.ee_anchor.orientation, from_axis_angle(disp.axis, disp.angle)
    )
    return CartesianTarget(Pose(position=position, orientation=orientation))


# ---- mirror ----


def mirror_update(
    replica: Sequence[float], slave: Sequence[float], vel_limit: float, dt: float
) -> tuple[float, ...]:
    """Move the motorized replica toward the slave joints, one rate-limited
    step per joint, snapping exactly when the gap fits in one step."""
    if len(replica) != len(slave):
        raise ValueError(f"mirror length mismatch: {len(replica)} != {len(slave)}")
    max_step = vel_limit * dt
    out = []
    for r, s in zip(replica, slave):
        gap = s - r
        out.append(s if abs(gap) <= max_step else r + math.copysign(max_step, gap))
    return tuple(out)


# ---- temporal decoupling ----


class TeleopMode(enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class TemporalInputs:
    """Device readings and events gathered for one control tick."""

    replica: Optional[tuple[float, ...]] = None
    haptic: Optional[Pose] = None
    request_mode: Optional[TeleopMode] = None
    gripper: Optional[float] = None


@dataclass(frozen=True)
class TemporalState:
    mode: TeleopMode
    anchor: Optional[ClutchAnchor]
    replica: Optional[tuple[float, ...]]
    haptic: Optional[Pose]
    pending: bool
    frozen: Optional[CartesianTarget]
    last_slave: Optional[tuple[float, ...]]


@dataclass(frozen=True)
class TemporalResult:
    state: TemporalState
    motion: Optional[SlaveCommand]
    effector: Optional[GripperTarget]
    events: tuple[str, ...]
    mirror_gap: Optional[float]


def initial_temporal_state() -> TemporalState:
    return TemporalState(
        mode=TeleopMode.GLOBAL,
        anchor=None,
        replica=None,
        haptic=None,
        pending=False,
        frozen=None,
        last_slave=None,
    )


def temporal_step(
    config: ControllerConfig,
    chain: KinematicChain,
    state: TemporalState,
    inputs: TemporalInputs,
    slave_joints: tuple[float, ...],
    slave_ee: Pose,
    dt: float,
) -> TemporalResult:
    """Advance the temporal-decoupling state machine by one tick.

    Exactly one of {replica joint command, stylus Cartesian command} is
    emitted per tick; mode switches never produce a command discontinuity
    (Local engages at zero displacement; Local->Global is deferred until the
    mirror converges and the slave has settled on the frozen Cartesian
    target, which is held for the whole wait).
    """
    events: list[str] = []
    mode = state.mode
    anchor = state.anchor
    replica = state.replica
    haptic = state.haptic
    pending = state.pending
    frozen = state.frozen

    if inputs.haptic is not None:
        haptic = inputs.haptic

    if inputs.replica is not None:
        if mode is TeleopMode.GLOBAL:
            reading = tuple(float(v) for v in inputs.replica)
            if len(reading) != len(slave_joints):
                raise ValueError(
                    f"replica reading has {len(reading)} joints, chain has "
                    f"{len(slave_joints)}"
                )
            clamped = tuple(float(v) for v in chain.clamp(reading))
            if clamped != reading:
                events.append("replica reading clamped to joint limits")
            replica = clamped
        else:
            events.append("replica input ignored while Local (mirror active)")

    req = inputs.request_mode
    if req is not None:
        if pending:
            events.append(f"mode request {req.value} ignored: handover pending")
        elif req is mode:
            events.append(f"mode request ignored: already {mode.value}")
        elif req is TeleopMode.LOCAL:
            if haptic is None:
                events.append("local mode denied: no stylus reading yet")
            else:
                anchor = engage_local(haptic, slave_ee)
                mode = TeleopMode.LOCAL
                if replica is None:
                    replica = slave_joints
                events.append("local engaged at zero displacement")
        else:
            pending = True
            frozen = local_target(anchor, haptic, config.scale, config.alignment)
            events.append("handover pending: mirror converging")

    motion: Optional[SlaveCommand] = None
    mirror_gap: Optional[float] = None
    if mode is TeleopMode.LOCAL:
        if replica is None:
            replica = slave_joints
        mirror_gap = max(abs(r - s) for r, s in zip(replica, slave_joints))
        replica = mirror_update(
            replica, slave_joints, config.mirror_velocity_limit, dt
        )
        if pending:
            if mirror_gap < MIRROR_GATE and slave_joints == state.last_slave:
                # The slave sat still for a full tick under the frozen target,
                # so it is exactly at the commanded joints, and the update
                # above snapped the replica bit-equal to the slave (the gate
                # is below one mirror step by config validation).  The first
                # Global command is therefore a fixed point.
                mode = TeleopMode.GLOBAL
                pending = False
                anchor = None
                frozen = None
                motion = JointTarget(replica)
                events.append(f"handover granted: mirror gap {mirror_gap:.3e} rad")
            else:
                motion = frozen
        else:
            motion = local_target(anchor, haptic, config.scale, config.alignment)
    elif replica is not None:
        motion = JointTarget(replica)

    effector = GripperTarget(inputs.gripper) if inputs.gripper is not None else None
    new_state = TemporalState(
        mode=mode,
        anchor=anchor,
        replica=replica,
        haptic=haptic,
        pending=pending,
        frozen=frozen,
        last_slave=slave_joints,
    )
    return TemporalResult(
        state=new_state,
        motion=motion,
        effector=effector,
        events=tuple(events),
        mirror_gap=mirror_gap,
    )


# ---- spatial decoupling ----


def _rotation_array(value, label: str) -> np.ndarray:
    m = np.array(value, dtype=float)
    check_rotation_matrix(m)
    m.flags.writeable = False
    return m


@dataclass(frozen=True, eq=False)
class ImuCalibration:
    """Forearm/hand IMU orientations recorded once at session start."""

    r1_home: np.ndarray
    r2_home: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r1_home", _rotation_array(self.r1_home, "r1_home"))
        object.__setattr__(self, "r2_home", _rotation_array(self.r2_home, "r2_home"))


@dataclass(frozen=True, eq=False)
class ImuPair:
    """Current forearm/hand IMU orientations."""

    r1: np.ndarray
    r2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r1", _rotation_array(self.r1, "r1"))
        object.__setattr__(self, "r2", _rotation_array(self.r2, "r2"))


def wrist_rotation(calib: ImuCalibration, now: ImuPair) -> np.ndarray:
    """Relative hand-vs-forearm rotation, expressed against the home poses."""
    return now.r1.T @ calib.r1_home @ calib.r2_home.T @ now.r2


def spatial_step(
    replica: Sequence[float],
    calib: ImuCalibration,
    imus: ImuPair,
    hand: Optional[HandTarget],
    chain: KinematicChain,
    convention: str,
) -> tuple[JointTarget, Optional[HandTarget], tuple[str, ...]]:
    """One spatial-decoupling tick: replica drives the proximal joints, the
    IMU-derived wrist rotation drives the distal three as Euler angles.

    Every joint of the chain is written exactly once.  Wrist angles outside
    the chain limits are clamped and logged rather than rejected.
    """
    dof = len(chain.links)
    proximal = tuple(float(v) for v in replica)
    if len(proximal) != dof - 3:
        raise ValueError(
            f"replica has {len(proximal)} joints, chain needs {dof - 3} proximal"
        )
    if not all(math.isfinite(v) for v in proximal):
        raise ValueError(f"replica reading contains a non-finite value: {proximal}")
    triple = extract_euler(wrist_rotation(calib, imus), convention)
    raw = proximal + (triple.a, triple.b, triple.c)
    clamped = tuple(float(v) for v in chain.clamp(raw))
    events = tuple(
        f"clamp joint {i}: {r:.6g} -> {c:.6g}"
        for i, (r, c) in enumerate(zip(raw, clamped))
        if r != c
    )
    return JointTarget(clamped), hand, events
