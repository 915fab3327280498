"""Deterministic fixed-timestep simulated slave.

The slave is kinematic and first-order: each tick it moves every joint toward
the commanded target, clamped by the per-joint velocity limit, with an exact
snap when the remaining gap fits in one step (so converged tracking is
bit-exact, not merely close).  There are no dynamics; the safety semantics
proxy a torque limit by a commanded-vs-actual tracking-error threshold.

Safety behaviour:
  * tracking error above threshold (checked before moving) or a step whose
    end-effector would leave the workspace box (checked after moving) latches
    the e-stop; the violating step is not taken, so published state never
    shows the violation.  Once latched, joints and effector are frozen until
    `reset`; ticks keep advancing.
  * a Cartesian target whose IK does not converge holds position for the tick
    and flags it (safe-hold) — it is a diagnostic, not a latched stop.

Determinism: state evolution is pure float arithmetic on immutable snapshots;
identical (model, initial state, command sequence, dt) give bit-identical
state sequences.  `sim_time` is computed as `tick * dt`, never accumulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .commands import CartesianTarget, GripperTarget, HandTarget, JointTarget, SlaveCommand
from .kinematics import IkConfig, Pose, forward_kinematics, solve_ik
from .models import RobotModel

DEFAULT_DT = 0.01


@dataclass(frozen=True)
class SlaveState:
    """Immutable per-tick snapshot of the simulated slave.

    `command_joints` is the joint-space target applied this tick after any IK
    resolution and limit clamping (None on hold/e-stop ticks); downstream
    continuity metrics read it instead of re-deriving the IK solution.
    """

    joints: tuple[float, ...]
    velocities: tuple[float, ...]
    ee_pose: Pose
    effector: tuple[float, ...]
    estopped: bool
    estop_reason: Optional[str]
    safe_hold: bool
    ik_failure: bool
    command_joints: Optional[tuple[float, ...]]
    tick: int
    sim_time: float


def initial_state(model: RobotModel) -> SlaveState:
    home = model.home
    return SlaveState(
        joints=home,
        velocities=(0.0,) * len(home),
        ee_pose=forward_kinematics(model.chain, home),
        effector=(0.0,) * model.effector_channels,
        estopped=False,
        estop_reason=None,
        safe_hold=False,
        ik_failure=False,
        command_joints=None,
        tick=0,
        sim_time=0.0,
    )


def reset(model: RobotModel) -> SlaveState:
    """Return the slave to home with the e-stop cleared and tick zeroed."""
    return initial_state(model)


# ---- stepping ----


def _move_toward(current: float, target: float, max_step: float) -> float:
    gap = target - current
    if abs(gap) <= max_step:
        return target
    return current + math.copysign(max_step, gap)


def _split_commands(
    model: RobotModel, commands: Sequence[Optional[SlaveCommand]]
) -> tuple[Optional[SlaveCommand], Optional[SlaveCommand]]:
    motion = None
    effector = None
    for cmd in commands:
        if cmd is None:
            continue
        if isinstance(cmd, (JointTarget, CartesianTarget)):
            if motion is not None:
                raise ValueError("more than one motion command in a single tick")
            motion = cmd
        elif isinstance(cmd, (GripperTarget, HandTarget)):
            if effector is not None:
                raise ValueError("more than one effector command in a single tick")
            effector = cmd
        else:
            raise ValueError(f"unknown command type: {type(cmd)}")
    return motion, effector


def _effector_target(model: RobotModel, cmd: SlaveCommand) -> tuple[float, ...]:
    if isinstance(cmd, GripperTarget):
        if model.effector_kind != "gripper":
            raise ValueError(
                f"gripper command for model with effector kind {model.effector_kind!r}"
            )
        return (cmd.value,)
    if model.effector_kind != "hand":
        raise ValueError(
            f"hand command for model with effector kind {model.effector_kind!r}"
        )
    if len(cmd.channels) != model.effector_channels:
        raise ValueError(
            f"effector channels mismatch: {len(cmd.channels)} != {model.effector_channels}"
        )
    return cmd.channels


def step_all(
    model: RobotModel,
    state: SlaveState,
    commands: Sequence[Optional[SlaveCommand]],
    dt: float,
    ik: IkConfig = IkConfig(),
) -> SlaveState:
    """Advance one tick applying at most one motion and one effector command."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive and finite: {dt}")
    motion, effector_cmd = _split_commands(model, commands)
    tick = state.tick + 1
    sim_time = tick * dt

    if state.estopped:
        return replace(
            state,
            velocities=(0.0,) * len(state.joints),
            safe_hold=False,
            ik_failure=False,
            command_joints=None,
            tick=tick,
            sim_time=sim_time,
        )

    # Resolve the motion command to a joint-space target.  A tick with no
    # command at all is a safe-hold; an effector-only tick is a normal hold.
    safe_hold = False
    ik_failure = False
    if motion is None:
        target = state.joints
        safe_hold = effector_cmd is None
    elif isinstance(motion, JointTarget):
        if len(motion.joints) != len(state.joints):
            raise ValueError(
                f"joint target has {len(motion.joints)} values for a "
                f"{len(state.joints)}-joint chain"
            )
        target = model.chain.clamp(motion.joints)
    else:
        solution = solve_ik(model.chain, motion.pose, state.joints, ik)
        if solution.converged:
            target = solution.joints
        else:
            target = state.joints
            safe_hold = True
            ik_failure = True
    command_joints = None if safe_hold else target

    # Tracking-error e-stop, checked before moving.
    threshold = model.safety.tracking_error_estop
    for i, (j, t) in enumerate(zip(state.joints, target)):
        if abs(t - j) > threshold:
            return replace(
                state,
                velocities=(0.0,) * len(state.joints),
                estopped=True,
                estop_reason=f"tracking error on joint {i}: |{t - j:.6g}| > {threshold}",
                safe_hold=False,
                ik_failure=False,
                command_joints=None,
                tick=tick,
                sim_time=sim_time,
            )

    new_joints = tuple(
        _move_toward(j, t, vel * dt)
        for j, t, vel in zip(state.joints, target, model.chain.velocity_limits)
    )
    ee_pose = forward_kinematics(model.chain, new_joints)

    # Workspace e-stop, checked on the moved pose; the violating step is rejected.
    lo, hi = model.safety.workspace_min, model.safety.workspace_max
    if not all(l <= p <= h for p, l, h in zip(ee_pose.position, lo, hi)):
        return replace(
            state,
            velocities=(0.0,) * len(state.joints),
            estopped=True,
            estop_reason=f"workspace box violated at ee position {ee_pose.position}",
            safe_hold=False,
            ik_failure=False,
            command_joints=None,
            tick=tick,
            sim_time=sim_time,
        )

    if effector_cmd is None:
        effector = state.effector
    else:
        effector_target = _effector_target(model, effector_cmd)
        rate_step = model.effector_rate * dt
        effector = tuple(
            _move_toward(c, t, rate_step)
            for c, t in zip(state.effector, effector_target)
        )

    return SlaveState(
        joints=new_joints,
        velocities=tuple((n - j) / dt for n, j in zip(new_joints, state.joints)),
        ee_pose=ee_pose,
        effector=effector,
        estopped=False,
        estop_reason=None,
        safe_hold=safe_hold,
        ik_failure=ik_failure,
        command_joints=command_joints,
        tick=tick,
        sim_time=sim_time,
    )


def step(
    model: RobotModel,
    state: SlaveState,
    command: Optional[SlaveCommand],
    dt: float,
    ik: IkConfig = IkConfig(),
) -> SlaveState:
    """Advance one tick with a single command (None holds position)."""
    return step_all(model, state, (command,), dt, ik)
