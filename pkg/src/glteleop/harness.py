"""Headless scenario runner with deterministic logs and replay.

A run drives the full stack end to end: scripted device events become wire
messages, every message is encoded and decoded through the frame layer, and
the session advances controllers and the simulated slave one fixed tick at a
time on a simulated clock.  Nothing reads the wall clock, so a run is a pure
function of its script: the line-delimited log (header + one line of outbound
frames per tick) is byte-stable, and its SHA-256 digest is the run's
identity.  Replay re-executes the embedded script and compares logs line by
line, naming the first diverging tick.

Master-side device fusion happens here, exactly as a live operator station
would do it: the first IMU event of a run is taken as the calibration
attitude pair, later pairs are combined into a single wrist rotation before
transmission, and exoskeleton encoder readings are retargeted to hand
channels through the calibration file named by the scenario.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .controller import ImuCalibration, ImuPair, config_from_dict, wrist_rotation
from .hand import ExoskeletonReading, default_calibration, load_calibration, retarget
from .kinematics import IkConfig
from .models import load_model
from .protocol import (
    CartesianCommand,
    Error,
    GripperCommand,
    HandCommand,
    Heartbeat,
    JointCommand,
    ModeSwitch,
    TeleopMessage,
    decode,
    encode,
)
from .rotation import UnitQuaternion, compose, inverse, matrix_to_quat, to_axis_angle
from .scenario import (
    ExoEvent,
    GripperEvent,
    ImuEvent,
    PedalEvent,
    ReplicaEvent,
    ScenarioScript,
    StylusEvent,
    events_by_tick,
    scenario_from_dict,
    scenario_to_dict,
    tick_count,
)
from .session import ArmConfig, Session

ARM = "arm"
SENDER = "harness"
LOG_FORMAT = 1


# ---- results ----


@dataclass(frozen=True)
class WaypointResult:
    """Score for one goal: error at the deadline, first in-tolerance time."""

    index: int
    deadline: float
    position_error: Optional[float]
    rotation_error: Optional[float]
    completed: bool
    completion_time: Optional[float]


@dataclass(frozen=True)
class RunReport:
    scenario: str
    ticks: int
    duration: float
    passed: bool
    log_digest: str
    waypoints: tuple[WaypointResult, ...]
    max_command_jump: float
    max_switch_jump: Optional[float]
    switch_ticks: tuple[int, ...]
    mode_switches: int
    grants: int
    max_grant_gap: Optional[float]
    estop_events: tuple[str, ...]
    error_replies: tuple[str, ...]
    ik_failures: int
    safe_hold_ticks: int
    clamp_events: int
    joint_coverage: tuple[float, ...]


@dataclass
class RunTrace:
    """Per-tick histories for plotting and deeper assertions."""

    dt: float
    times: list[float]
    joints: list[tuple[float, ...]]
    command_joints: list[Optional[tuple[float, ...]]]
    ee_positions: list[tuple[float, float, float]]
    ee_orientations: list[tuple[float, float, float, float]]
    effector: list[tuple[float, ...]]
    modes: list[str]
    pending: list[bool]
    safe_hold: list[bool]


@dataclass(frozen=True)
class ReplayResult:
    passed: bool
    failing_tick: Optional[int]
    digest: str
    detail: str


# ---- event -> wire payload conversion ----


class _DeviceFusion:
    """Master-side state needed to turn raw device events into payloads."""

    def __init__(self, script: ScenarioScript):
        self.hand_calib = (
            load_calibration(script.hand_calibration)
            if script.hand_calibration is not None
            else default_calibration()
        )
        self.imu_calib: Optional[ImuCalibration] = None

    def payload(self, event):
        if isinstance(event, ReplicaEvent):
            return JointCommand(joints=event.joints)
        if isinstance(event, StylusEvent):
            return CartesianCommand(
                position=event.position, orientation_wxyz=event.orientation_wxyz
            )
        if isinstance(event, PedalEvent):
            return ModeSwitch(mode=event.mode)
        if isinstance(event, GripperEvent):
            return GripperCommand(value=event.value)
        if isinstance(event, ImuEvent):
            r1, r2 = np.array(event.r1), np.array(event.r2)
            if self.imu_calib is None:
                self.imu_calib = ImuCalibration(r1, r2)
            wrist = matrix_to_quat(wrist_rotation(self.imu_calib, ImuPair(r1, r2)))
            return CartesianCommand(
                position=(0.0, 0.0, 0.0), orientation_wxyz=wrist.as_wxyz()
            )
        reading = ExoskeletonReading(encoders=event.encoders)
        return HandCommand(channels=retarget(reading, self.hand_calib).channels)


# ---- execution ----


def _deadline_tick(t: float, dt: float, n_ticks: int) -> int:
    """Last tick whose simulated time is at most t (clamped onto the run)."""
    return max(1, min(n_ticks, int(math.floor(t / dt + 1e-9))))


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _goal_errors(state, goal) -> tuple[float, float]:
    perr = math.dist(state.ee_pose.position, goal.position)
    rel = compose(
        inverse(UnitQuaternion(*goal.orientation_wxyz)), state.ee_pose.orientation
    )
    return perr, to_axis_angle(rel).angle


def _execute(script: ScenarioScript) -> tuple[RunReport, RunTrace, list[str]]:
    model = load_model(script.model)
    controller = config_from_dict(dict(script.controller))
    ik = IkConfig(**script.ik) if script.ik is not None else IkConfig()
    session = Session(
        script.name,
        {ARM: ArmConfig(model=model, controller=controller,
                        decoupling=script.decoupling, ik=ik)},
    )
    dt = controller.dt
    dt_us = int(round(dt * 1e6))
    n_ticks = tick_count(script.duration, dt)
    grouped = events_by_tick(script, dt)
    heartbeat_every = (
        max(1, int(round(script.heartbeat_period / dt)))
        if script.heartbeat_period > 0
        else 0
    )
    fusion = _DeviceFusion(script)

    lines = [
        _dumps(
            {"kind": "run-header", "format": LOG_FORMAT,
             "scenario": scenario_to_dict(script)}
        )
    ]
    trace = RunTrace(
        dt=dt, times=[], joints=[], command_joints=[], ee_positions=[],
        ee_orientations=[], effector=[], modes=[], pending=[], safe_hold=[],
    )

    waypoints = script.waypoints
    deadlines = [_deadline_tick(wp.t, dt, n_ticks) for wp in waypoints]
    results: list[Optional[WaypointResult]] = [None] * len(waypoints)
    wp_index = 0
    wp_completion: Optional[float] = None

    seq = 0
    max_cmd_jump = 0.0
    switch_ticks: list[int] = []
    switch_jumps: list[float] = []
    grants = 0
    max_grant_gap: Optional[float] = None
    estops: list[str] = []
    errors: list[str] = []
    ik_failures = 0
    safe_hold_ticks = 0
    clamp_events = 0
    prev_cmd: Optional[tuple[float, ...]] = None
    prev_mode = "spatial" if script.decoupling == "spatial" else "global"
    prev_estopped = False
    joint_lo = list(model.home)
    joint_hi = list(model.home)

    for tick in range(1, n_ticks + 1):
        now_us = tick * dt_us
        inbound: list[TeleopMessage] = []

        def send(payload):
            nonlocal seq
            seq += 1
            inbound.append(
                TeleopMessage(
                    session=script.name, arm=ARM, seq=seq, t_us=now_us, payload=payload
                )
            )

        if heartbeat_every and (tick - 1) % heartbeat_every == 0:
            send(Heartbeat())
        for event in grouped.get(tick, ()):
            send(fusion.payload(event))

        # Exercise the wire: every inbound message rides through a real frame.
        framed = [decode(encode(m)) for m in inbound]
        result = session.step([(SENDER, m) for m in framed], now_us)

        out_entries = []
        for dest, msg in result.outbound:
            out_entries.append([dest, encode(msg)[4:].decode("utf-8")])
            if dest == SENDER and isinstance(msg.payload, Error):
                errors.append(f"tick {tick} {msg.payload.code}: {msg.payload.text}")
        lines.append(_dumps({"tick": tick, "out": out_entries}))

        arm_tick = result.ticks[ARM]
        state = arm_tick.state

        # ---- metrics ----
        cmd = state.command_joints
        if cmd is not None and prev_cmd is not None:
            jump = max(abs(a - b) for a, b in zip(cmd, prev_cmd))
            max_cmd_jump = max(max_cmd_jump, jump)
        else:
            jump = None
        if arm_tick.mode != prev_mode:
            switch_ticks.append(tick)
            switch_jumps.append(jump if jump is not None else math.inf)
        for event_text in arm_tick.events:
            if "handover granted" in event_text:
                grants += 1
                if arm_tick.mirror_gap is not None:
                    gap = arm_tick.mirror_gap
                    max_grant_gap = gap if max_grant_gap is None else max(max_grant_gap, gap)
            if "clamp" in event_text:
                clamp_events += 1
        if state.estopped and not prev_estopped:
            estops.append(f"tick {tick}: {state.estop_reason}")
        if state.ik_failure:
            ik_failures += 1
        if state.safe_hold:
            safe_hold_ticks += 1
        for j, v in enumerate(state.joints):
            joint_lo[j] = min(joint_lo[j], v)
            joint_hi[j] = max(joint_hi[j], v)

        # ---- waypoint scoring ----
        if wp_index < len(waypoints):
            perr, rerr = _goal_errors(state, waypoints[wp_index])
            wp = waypoints[wp_index]
            if wp_completion is None and perr <= wp.pos_tol and rerr <= wp.rot_tol:
                wp_completion = state.sim_time
            while wp_index < len(waypoints) and deadlines[wp_index] == tick:
                wp = waypoints[wp_index]
                perr, rerr = _goal_errors(state, wp)
                if wp_completion is None and perr <= wp.pos_tol and rerr <= wp.rot_tol:
                    wp_completion = state.sim_time
                results[wp_index] = WaypointResult(
                    index=wp_index,
                    deadline=wp.t,
                    position_error=perr,
                    rotation_error=rerr,
                    completed=wp_completion is not None,
                    completion_time=wp_completion,
                )
                wp_index += 1
                wp_completion = None

        # ---- trace ----
        trace.times.append(state.sim_time)
        trace.joints.append(state.joints)
        trace.command_joints.append(cmd)
        trace.ee_positions.append(state.ee_pose.position)
        trace.ee_orientations.append(state.ee_pose.orientation.as_wxyz())
        trace.effector.append(state.effector)
        trace.modes.append(arm_tick.mode)
        trace.pending.append(arm_tick.pending)
        trace.safe_hold.append(state.safe_hold)

        prev_cmd = cmd
        prev_mode = arm_tick.mode
        prev_estopped = state.estopped

    # Waypoints whose window never ran (zero-length runs) count as missed.
    final_results = tuple(
        r
        if r is not None
        else WaypointResult(
            index=i, deadline=waypoints[i].t, position_error=None,
            rotation_error=None, completed=False, completion_time=None,
        )
        for i, r in enumerate(results)
    )

    text = "\n".join(lines) + "\n"
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    coverage = tuple(
        (hi_seen - lo_seen) / (hi - lo)
        for (lo_seen, hi_seen), (lo, hi) in zip(
            zip(joint_lo, joint_hi), model.chain.joint_limits
        )
    )
    passed = (
        all(r.completed for r in final_results)
        and not estops
        and not errors
        and ik_failures == 0
    )
    report = RunReport(
        scenario=script.name,
        ticks=n_ticks,
        duration=script.duration,
        passed=passed,
        log_digest=digest,
        waypoints=final_results,
        max_command_jump=max_cmd_jump,
        max_switch_jump=max(switch_jumps) if switch_jumps else None,
        switch_ticks=tuple(switch_ticks),
        mode_switches=len(switch_ticks),
        grants=grants,
        max_grant_gap=max_grant_gap,
        estop_events=tuple(estops),
        error_replies=tuple(errors),
        ik_failures=ik_failures,
        safe_hold_ticks=safe_hold_ticks,
        clamp_events=clamp_events,
        joint_coverage=coverage,
    )
    return report, trace, lines


# ---- public entry points ----


def run_scenario(
    script: ScenarioScript,
    *,
    log_path: Optional[str | Path] = None,
    figures_dir: Optional[str | Path] = None,
) -> RunReport:
    """Execute a script; optionally write the log and render figures."""
    report, trace, lines = _execute(script)
    if log_path is not None:
        Path(log_path).write_text("\n".join(lines) + "\n")
    if figures_dir is not None:
        from .figures import render_run_figures

        render_run_figures(trace, report, figures_dir, script)
    return report


def run_traced(script: ScenarioScript) -> tuple[RunReport, RunTrace]:
    """Execute a script and return the per-tick trace with the report."""
    report, trace, _ = _execute(script)
    return report, trace


def replay_log(path: str | Path) -> ReplayResult:
    """Re-execute a log's embedded scenario and compare line by line."""
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file, not a run log (no run-header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise ValueError(f"{path}: first line is not JSON, expected a run-header") from None
    if not isinstance(header, dict) or header.get("kind") != "run-header":
        raise ValueError(f"{path}: first line is not a run-header")
    script = scenario_from_dict(header["scenario"], source=f"{path}#scenario")
    report, _, fresh_lines = _execute(script)
    if fresh_lines == lines:
        return ReplayResult(
            passed=True, failing_tick=None, digest=report.log_digest,
            detail=f"replay of {report.ticks} ticks matches",
        )
    limit = min(len(fresh_lines), len(lines))
    diverged = next(
        (i for i in range(limit) if fresh_lines[i] != lines[i]), limit
    )
    # Line 0 is the header; line n holds tick n.
    failing_tick = diverged if diverged > 0 else 0
    return ReplayResult(
        passed=False,
        failing_tick=failing_tick,
        digest=report.log_digest,
        detail=(
            "header differs from re-executed scenario"
            if diverged == 0
            else f"first divergence at tick {failing_tick}"
        ),
    )


def report_to_dict(report: RunReport) -> dict:
    """Machine-readable report form (JSON-safe plain types)."""
    return {
        "scenario": report.scenario,
        "ticks": report.ticks,
        "duration": report.duration,
        "passed": report.passed,
        "log_digest": report.log_digest,
        "waypoints": [
            {
                "index": w.index,
                "deadline": w.deadline,
                "position_error": w.position_error,
                "rotation_error": w.rotation_error,
                "completed": w.completed,
                "completion_time": w.completion_time,
            }
            for w in report.waypoints
        ],
        "max_command_jump": report.max_command_jump,
        "max_switch_jump": report.max_switch_jump,
        "switch_ticks": list(report.switch_ticks),
        "mode_switches": report.mode_switches,
        "grants": report.grants,
        "max_grant_gap": report.max_grant_gap,
        "estop_events": list(report.estop_events),
        "error_replies": list(report.error_replies),
        "ik_failures": report.ik_failures,
        "safe_hold_ticks": report.safe_hold_ticks,
        "clamp_events": report.clamp_events,
        "joint_coverage": list(report.joint_coverage),
    }
