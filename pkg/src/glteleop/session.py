"""Teleoperation session: routing, authority, and the per-tick control loop.

A `Session` owns one or more arms, each pairing a controller (temporal or
spatial decoupling) with a simulated slave.  `Session.step` is the single
orchestrator: it ingests inbound wire messages, enforces session semantics,
runs one controller+sim tick per arm, and returns the outbound messages.
The scenario harness calls it with a simulated clock and the live server
calls it with the wall clock — the control path is identical, which is what
makes scenario runs representative and replays bit-exact.

Session semantics:
  * sequence numbers are strictly increasing per sender; stale frames are
    dropped and answered with a `stale-seq` error, never applied.
  * one command authority per arm: the first sender to issue a command kind
    holds it; others get `not-authority` errors.  Authority is released when
    its sender goes silent for `HEARTBEAT_TIMEOUT_US` (any message counts as
    liveness, `Heartbeat` exists to keep idle links alive); release is
    announced with a `safe-hold` error broadcast and the arm holds position
    until a new commander appears.
  * `Estop` and `Reset` are accepted from any sender (safety beats
    authority); commands to an e-stopped arm are rejected until `Reset`.
  * `ModeSwitch` is resolved by the temporal controller: switching to Local
    requires a stylus reading; switching to Global defers until the replica
    mirror converges (the `pending` flag in `StateUpdate` acknowledges the
    deferral).

Wire-to-device mapping: `JointCommand` carries replica joint readings,
`CartesianCommand` carries the stylus pose (temporal) or the pre-combined
wrist orientation with zero position (spatial), `HandCommand` carries
retargeted glove channels, `GripperCommand` the pinch value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .commands import GripperTarget, SlaveCommand
from .controller import (
    ControllerConfig,
    ImuCalibration,
    ImuPair,
    TeleopMode,
    TemporalInputs,
    TemporalState,
    initial_temporal_state,
    spatial_step,
    temporal_step,
)
from .hand import HandTarget
from .kinematics import IkConfig, Pose
from .models import RobotModel
from .protocol import (
    CartesianCommand,
    Error,
    Estop,
    GripperCommand,
    HandCommand,
    Heartbeat,
    JointCommand,
    ModeSwitch,
    Reset,
    StateUpdate,
    TeleopMessage,
)
from .rotation import UnitQuaternion, quat_to_matrix
from .sim import SlaveState, initial_state, step_all

HEARTBEAT_TIMEOUT_US = 300_000

# An orientation whose squared norm strays further than this from 1 is device
# garbage, not float drift, and is rejected rather than renormalized.
_UNIT_NORM_SLACK = 1e-6

TEMPORAL = "temporal"
SPATIAL = "spatial"

_IDENTITY_CALIB = ImuCalibration(np.eye(3), np.eye(3))
_EYE3 = np.eye(3)


@dataclass(frozen=True)
class ArmConfig:
    """Static per-arm wiring: robot model, controller settings, decoupling."""

    model: RobotModel
    controller: ControllerConfig
    decoupling: str
    ik: IkConfig = IkConfig()

    def __post_init__(self):
        if self.decoupling not in (TEMPORAL, SPATIAL):
            raise ValueError(f"decoupling must be temporal or spatial: {self.decoupling}")
        if self.decoupling == SPATIAL and len(self.model.chain.links) < 4:
            raise ValueError("spatial decoupling needs a chain with at least 4 joints")


@dataclass
class _ArmRuntime:
    config: ArmConfig
    slave: SlaveState
    temporal: Optional[TemporalState]
    spatial_replica: Optional[tuple[float, ...]] = None
    spatial_wrist: Optional[UnitQuaternion] = None
    spatial_hand: Optional[HandTarget] = None
    authority: Optional[str] = None


@dataclass
class _TickInputs:
    replica: Optional[tuple[float, ...]] = None
    haptic: Optional[Pose] = None
    mode: Optional[TeleopMode] = None
    gripper: Optional[float] = None
    wrist: Optional[UnitQuaternion] = None
    hand: Optional[HandTarget] = None


@dataclass(frozen=True)
class ArmTick:
    """Per-arm outcome of one session step, for logs and metrics."""

    arm: str
    state: SlaveState
    mode: str
    pending: bool
    mirror_gap: Optional[float]
    events: tuple[str, ...]


@dataclass(frozen=True)
class SessionStepResult:
    outbound: tuple[tuple[Optional[str], TeleopMessage], ...]
    ticks: dict[str, ArmTick]


class Session:
    """Deterministic session state machine; see module docstring."""

    def __init__(self, session_id: str, arms: dict[str, ArmConfig]):
        if not arms:
            raise ValueError("session needs at least one arm")
        self.session_id = session_id
        self.arms: dict[str, _ArmRuntime] = {
            arm_id: _ArmRuntime(
                config=cfg,
                slave=initial_state(cfg.model),
                temporal=(
                    initial_temporal_state() if cfg.decoupling == TEMPORAL else None
                ),
            )
            for arm_id, cfg in arms.items()
        }
        self._seq_by_sender: dict[str, int] = {}
        self._last_seen_us: dict[str, int] = {}
        self._out_seq = 0

    # ---- outbound construction ----

    def _message(self, arm: str, payload, t_us: int) -> TeleopMessage:
        self._out_seq += 1
        return TeleopMessage(
            session=self.session_id, arm=arm, seq=self._out_seq, t_us=t_us, payload=payload
        )

    def _error(self, arm: str, code: str, text: str, t_us: int) -> TeleopMessage:
        return self._message(arm, Error(code=code, text=text), t_us)

    # ---- one tick ----

    def step(
        self, inbound: list[tuple[str, TeleopMessage]], now_us: int
    ) -> SessionStepResult:
        outbound: list[tuple[Optional[str], TeleopMessage]] = []
        events: dict[str, list[str]] = {arm_id: [] for arm_id in self.arms}
        inputs: dict[str, _TickInputs] = {arm_id: _TickInputs() for arm_id in self.arms}

        for sender, msg in inbound:
            self._ingest(sender, msg, now_us, outbound, events, inputs)

        # Authority liveness: silence beyond the heartbeat timeout releases
        # the arm into safe-hold until a new commander appears.
        for arm_id, arm in self.arms.items():
            if arm.authority is None:
                continue
            last = self._last_seen_us.get(arm.authority)
            if last is None or now_us - last >= HEARTBEAT_TIMEOUT_US:
                events[arm_id].append(
                    f"authority {arm.authority} timed out; safe-hold"
                )
                outbound.append(
                    (
                        None,
                        self._error(
                            arm_id,
                            "safe-hold",
                            f"authority {arm.authority} silent for more than "
                            f"{HEARTBEAT_TIMEOUT_US} us",
                            now_us,
                        ),
                    )
                )
                arm.authority = None

        ticks: dict[str, ArmTick] = {}
        for arm_id, arm in self.arms.items():
            ticks[arm_id] = self._advance_arm(
                arm_id, arm, inputs[arm_id], events[arm_id], outbound, now_us
            )
        return SessionStepResult(outbound=tuple(outbound), ticks=ticks)

    # ---- inbound routing ----

    def _ingest(self, sender, msg, now_us, outbound, events, inputs) -> None:
        def reply(code: str, text: str, arm: str = "none") -> None:
            outbound.append((sender, self._error(arm, code, text, now_us)))

        if msg.session != self.session_id:
            reply("wrong-session", f"message for session {msg.session!r}, this is "
                  f"{self.session_id!r}", msg.arm)
            return
        last_seq = self._seq_by_sender.get(sender)
        if last_seq is not None and msg.seq <= last_seq:
            reply("stale-seq", f"sequence {msg.seq} not above {last_seq}; dropped",
                  msg.arm)
            return
        self._seq_by_sender[sender] = msg.seq
        self._last_seen_us[sender] = now_us

        payload = msg.payload
        if isinstance(payload, Heartbeat):
            return
        if msg.arm not in self.arms:
            reply("unknown-arm", f"no arm {msg.arm!r} in this session", msg.arm)
            return
        arm = self.arms[msg.arm]
        arm_events = events[msg.arm]

        if isinstance(payload, Estop):
            arm.slave = replace(
                arm.slave,
                estopped=True,
                estop_reason=f"operator estop: {payload.reason}",
            )
            arm_events.append(f"estop from {sender}: {payload.reason}")
            return
        if isinstance(payload, Reset):
            arm.slave = initial_state(arm.config.model)
            if arm.temporal is not None:
                arm.temporal = initial_temporal_state()
            arm.spatial_replica = None
            arm.spatial_wrist = None
            arm.spatial_hand = None
            arm_events.append(f"reset from {sender}")
            return
        if isinstance(payload, (StateUpdate, Error)):
            arm_events.append(f"dropped {type(payload).__name__} from client {sender}")
            return

        # Command kinds from here on: authority and e-stop gates first.
        if arm.authority is None:
            arm.authority = sender
            arm_events.append(f"command authority granted to {sender}")
        elif arm.authority != sender:
            reply(
                "not-authority",
                f"arm {msg.arm} is commanded by {arm.authority}",
                msg.arm,
            )
            return
        if arm.slave.estopped:
            reply("estopped", arm.slave.estop_reason or "e-stopped", msg.arm)
            return

        tick_inputs = inputs[msg.arm]
        temporal = arm.config.decoupling == TEMPORAL
        if isinstance(payload, JointCommand):
            tick_inputs.replica = payload.joints
        elif isinstance(payload, CartesianCommand):
            n2 = sum(v * v for v in payload.orientation_wxyz)
            if abs(n2 - 1.0) > _UNIT_NORM_SLACK:
                reply("bad-command",
                      f"orientation is not a unit quaternion (|q|^2 = {n2:.6g})",
                      msg.arm)
                return
            orientation = UnitQuaternion(*payload.orientation_wxyz)
            if temporal:
                tick_inputs.haptic = Pose(
                    position=payload.position, orientation=orientation
                )
            else:
                tick_inputs.wrist = orientation
        elif isinstance(payload, GripperCommand):
            if arm.config.model.effector_kind != "gripper":
                reply("bad-command", "this arm has no gripper", msg.arm)
                return
            if not (0.0 <= payload.value <= 1.0):
                reply("bad-command", f"gripper value outside [0, 1]: {payload.value}",
                      msg.arm)
                return
            tick_inputs.gripper = payload.value
        elif isinstance(payload, HandCommand):
            if arm.config.model.effector_kind != "hand":
                reply("bad-command", "this arm has no hand", msg.arm)
                return
            try:
                tick_inputs.hand = HandTarget(payload.channels)
            except ValueError as exc:
                reply("bad-command", str(exc), msg.arm)
                return
        elif isinstance(payload, ModeSwitch):
            if not temporal:
                reply("bad-command", "spatial arms have no temporal modes", msg.arm)
                return
            tick_inputs.mode = TeleopMode(payload.mode)

    # ---- per-arm advance ----

    def _advance_arm(
        self, arm_id, arm, tick_inputs, arm_events, outbound, now_us
    ) -> ArmTick:
        cfg = arm.config
        motion: Optional[SlaveCommand] = None
        effector: Optional[SlaveCommand] = None
        mirror_gap: Optional[float] = None

        if arm.authority is not None:
            if cfg.decoupling == TEMPORAL:
                try:
                    result = temporal_step(
                        cfg.controller,
                        cfg.model.chain,
                        arm.temporal,
                        TemporalInputs(
                            replica=tick_inputs.replica,
                            haptic=tick_inputs.haptic,
                            request_mode=tick_inputs.mode,
                            gripper=tick_inputs.gripper,
                        ),
                        arm.slave.joints,
                        arm.slave.ee_pose,
                        cfg.controller.dt,
                    )
                except ValueError as exc:
                    result = None
                    outbound.append(
                        (arm.authority, self._error(arm_id, "bad-command", str(exc), now_us))
                    )
                if result is not None:
                    arm.temporal = result.state
                    motion, effector = result.motion, result.effector
                    mirror_gap = result.mirror_gap
                    arm_events.extend(result.events)
                    for event in result.events:
                        if "denied" in event:
                            outbound.append(
                                (arm.authority, self._error(arm_id, "mode-denied", event, now_us))
                            )
            else:
                if tick_inputs.replica is not None:
                    arm.spatial_replica = tick_inputs.replica
                if tick_inputs.wrist is not None:
                    arm.spatial_wrist = tick_inputs.wrist
                if tick_inputs.hand is not None:
                    arm.spatial_hand = tick_inputs.hand
                if arm.spatial_replica is not None and arm.spatial_wrist is not None:
                    try:
                        motion, effector, spatial_events = spatial_step(
                            arm.spatial_replica,
                            _IDENTITY_CALIB,
                            ImuPair(_EYE3, quat_to_matrix(arm.spatial_wrist)),
                            arm.spatial_hand,
                            cfg.model.chain,
                            cfg.model.euler_convention,
                        )
                        arm_events.extend(spatial_events)
                    except ValueError as exc:
                        motion, effector = None, None
                        outbound.append(
                            (arm.authority, self._error(arm_id, "bad-command", str(exc), now_us))
                        )

        arm.slave = step_all(
            cfg.model, arm.slave, (motion, effector), cfg.controller.dt, ik=cfg.ik
        )
        if arm.slave.ik_failure:
            arm_events.append("ik did not converge; safe-hold tick")

        mode = arm.temporal.mode.value if arm.temporal is not None else "spatial"
        pending = arm.temporal.pending if arm.temporal is not None else False
        state = arm.slave
        update = StateUpdate(
            tick=state.tick,
            sim_time=state.sim_time,
            joints=state.joints,
            velocities=state.velocities,
            ee_position=state.ee_pose.position,
            ee_orientation_wxyz=state.ee_pose.orientation.as_wxyz(),
            effector=state.effector,
            estopped=state.estopped,
            estop_reason=state.estop_reason,
            safe_hold=state.safe_hold,
            mode=mode,
            pending=pending,
        )
        outbound.append((None, self._message(arm_id, update, now_us)))
        return ArmTick(
            arm=arm_id,
            state=state,
            mode=mode,
            pending=pending,
            mirror_gap=mirror_gap,
            events=tuple(arm_events),
        )
