"""Declarative device-input timelines for headless runs.

A scenario script is the complete description of one deterministic run: the
robot model, the controller settings, a time-ordered list of master-device
events (replica joints, stylus poses, pedal presses, gripper values, IMU
pairs, exoskeleton encoders), and the waypoint goals the run is scored
against.  Scripts serialize to YAML; timestamps are quantized onto the
control-tick grid at run time so float jitter in the file can never move an
event across a tick boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import yaml

from .controller import config_from_dict
from .kinematics import IkConfig
from .rotation import check_rotation_matrix

import numpy as np


class ScenarioError(ValueError):
    """Malformed scenario file or script; message carries the field path."""


TEMPORAL_DEVICES = ("replica", "stylus", "pedal", "gripper")
SPATIAL_DEVICES = ("replica", "imu", "exo")


# ---- timeline events ----


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValueError(f"event time must be finite and non-negative: {t}")
    return t


def _check_floats(values, n: Optional[int], label: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if n is not None and len(out) != n:
        raise ValueError(f"{label} needs {n} values, got {len(out)}")
    if not out:
        raise ValueError(f"{label} must not be empty")
    if not all(math.isfinite(v) for v in out):
        raise ValueError(f"{label} must be finite: {out}")
    return out


def _check_quat(values, label: str) -> tuple[float, float, float, float]:
    q = _check_floats(values, 4, label)
    n2 = sum(v * v for v in q)
    if abs(n2 - 1.0) > 1e-6:
        raise ValueError(f"{label} must be a unit quaternion (|q|^2 = {n2:.6g})")
    return q


def _check_rotation_rows(rows, label: str):
    m = np.array(rows, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"{label} must be a 3x3 matrix")
    check_rotation_matrix(m)
    return tuple(tuple(float(v) for v in row) for row in m)


@dataclass(frozen=True)
class ReplicaEvent:
    t: float
    joints: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "joints", _check_floats(self.joints, None, "joints"))


@dataclass(frozen=True)
class StylusEvent:
    t: float
    position: tuple[float, float, float]
    orientation_wxyz: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "position", _check_floats(self.position, 3, "position"))
        object.__setattr__(
            self, "orientation_wxyz", _check_quat(self.orientation_wxyz, "orientation")
        )


@dataclass(frozen=True)
class PedalEvent:
    t: float
    mode: str

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        if self.mode not in ("global", "local"):
            raise ValueError(f"pedal mode must be 'global' or 'local': {self.mode!r}")


@dataclass(frozen=True)
class GripperEvent:
    t: float
    value: float

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "value", float(self.value))
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"gripper value outside [0, 1]: {self.value}")


@dataclass(frozen=True)
class ImuEvent:
    t: float
    r1: tuple[tuple[float, float, float], ...]
    r2: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "r1", _check_rotation_rows(self.r1, "r1"))
        object.__setattr__(self, "r2", _check_rotation_rows(self.r2, "r2"))


@dataclass(frozen=True)
class ExoEvent:
    t: float
    encoders: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "encoders", _check_floats(self.encoders, 6, "encoders"))


DeviceEvent = Union[ReplicaEvent, StylusEvent, PedalEvent, GripperEvent, ImuEvent, ExoEvent]

_DEVICE_NAMES = {
    ReplicaEvent: "replica",
    StylusEvent: "stylus",
    PedalEvent: "pedal",
    GripperEvent: "gripper",
    ImuEvent: "imu",
    ExoEvent: "exo",
}


@dataclass(frozen=True)
class WaypointGoal:
    """EE pose the run must reach by deadline t, within the tolerances."""

    t: float
    position: tuple[float, float, float]
    orientation_wxyz: tuple[float, float, float, float]
    pos_tol: float
    rot_tol: float

    def __post_init__(self):
        object.__setattr__(self, "t", _check_time(self.t))
        object.__setattr__(self, "position", _check_floats(self.position, 3, "position"))
        object.__setattr__(
            self, "orientation_wxyz", _check_quat(self.orientation_wxyz, "orientation")
        )
        object.__setattr__(self, "pos_tol", float(self.pos_tol))
        object.__setattr__(self, "rot_tol", float(self.rot_tol))
        if not (self.pos_tol > 0.0 and self.rot_tol > 0.0):
            raise ValueError("waypoint tolerances must be positive")


# ---- the script ----


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    model: str
    decoupling: str
    controller: dict
    duration: float
    events: tuple[DeviceEvent, ...]
    waypoints: tuple[WaypointGoal, ...] = ()
    heartbeat_period: float = 0.1
    ik: Optional[dict] = None
    hand_calibration: Optional[str] = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ScenarioError("name must be a non-empty string")
        if not self.model or not isinstance(self.model, str):
            raise ScenarioError("model must be a non-empty string")
        if self.decoupling not in ("temporal", "spatial"):
            raise ScenarioError(
                f"decoupling must be 'temporal' or 'spatial': {self.decoupling!r}"
            )
        duration = float(self.duration)
        if not math.isfinite(duration) or duration < 0.0:
            raise ScenarioError(f"duration must be finite and non-negative: {duration}")
        object.__setattr__(self, "duration", duration)
        hb = float(self.heartbeat_period)
        if not math.isfinite(hb) or hb < 0.0:
            raise ScenarioError(f"heartbeat_period must be finite and >= 0: {hb}")
        object.__setattr__(self, "heartbeat_period", hb)
        try:
            config_from_dict(dict(self.controller))
        except ValueError as exc:
            raise ScenarioError(f"controller: {exc}") from None
        if self.ik is not None:
            try:
                IkConfig(**self.ik)
            except TypeError as exc:
                raise ScenarioError(f"ik: {exc}") from None

        allowed = TEMPORAL_DEVICES if self.decoupling == "temporal" else SPATIAL_DEVICES
        events = tuple(self.events)
        last_t = 0.0
        for i, event in enumerate(events):
            name = _DEVICE_NAMES.get(type(event))
            if name is None:
                raise ScenarioError(f"events[{i}]: not a device event: {event!r}")
            if name not in allowed:
                raise ScenarioError(
                    f"events[{i}]: {name} events are not valid in a "
                    f"{self.decoupling} scenario"
                )
            if event.t < last_t:
                raise ScenarioError(
                    f"events[{i}]: timestamps must be monotone "
                    f"({event.t} after {last_t})"
                )
            if event.t > duration:
                raise ScenarioError(
                    f"events[{i}]: t={event.t} exceeds scenario duration {duration}"
                )
            last_t = event.t
        object.__setattr__(self, "events", events)

        waypoints = tuple(self.waypoints)
        last_t = 0.0
        for i, wp in enumerate(waypoints):
            if not isinstance(wp, WaypointGoal):
                raise ScenarioError(f"waypoints[{i}]: not a waypoint goal: {wp!r}")
            if wp.t < last_t:
                raise ScenarioError(f"waypoints[{i}]: deadlines must be monotone")
            if wp.t > duration:
                raise ScenarioError(
                    f"waypoints[{i}]: t={wp.t} exceeds scenario duration {duration}"
                )
            last_t = wp.t
        object.__setattr__(self, "waypoints", waypoints)


# ---- dict / YAML forms ----

_EVENT_KEYS = {
    "replica": ({"joints"}, set()),
    "stylus": ({"position"}, {"orientation_wxyz"}),
    "pedal": ({"mode"}, set()),
    "gripper": ({"value"}, set()),
    "imu": ({"r1", "r2"}, set()),
    "exo": ({"encoders"}, set()),
}

_TOP_REQUIRED = {"name", "model", "decoupling", "controller", "duration", "events"}
_TOP_OPTIONAL = {"waypoints", "heartbeat_period", "ik", "hand_calibration"}

_WAYPOINT_KEYS = {"t", "position", "orientation_wxyz", "pos_tol", "rot_tol"}


def _check_keys(node: dict, required: set, optional: set, where: str) -> None:
    if not isinstance(node, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(node).__name__}")
    missing = required - node.keys()
    if missing:
        raise ScenarioError(f"{where}: missing keys {sorted(missing)}")
    extra = node.keys() - required - optional
    if extra:
        raise ScenarioError(f"{where}: unknown keys {sorted(extra)}")


def _event_from_dict(node: dict, where: str) -> DeviceEvent:
    if not isinstance(node, dict) or "device" not in node or "t" not in node:
        raise ScenarioError(f"{where}: event needs 't' and 'device' keys")
    device = node["device"]
    if device not in _EVENT_KEYS:
        raise ScenarioError(
            f"{where}: unknown device {device!r}; one of {sorted(_EVENT_KEYS)}"
        )
    required, optional = _EVENT_KEYS[device]
    _check_keys(node, required | {"t", "device"}, optional, where)
    body = {k: v for k, v in node.items() if k != "device"}
    cls = {v: k for k, v in _DEVICE_NAMES.items()}[device]
    try:
        return cls(**body)
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _event_to_dict(event: DeviceEvent) -> dict:
    name = _DEVICE_NAMES[type(event)]
    out: dict = {"t": event.t, "device": name}
    if isinstance(event, ReplicaEvent):
        out["joints"] = list(event.joints)
    elif isinstance(event, StylusEvent):
        out["position"] = list(event.position)
        out["orientation_wxyz"] = list(event.orientation_wxyz)
    elif isinstance(event, PedalEvent):
        out["mode"] = event.mode
    elif isinstance(event, GripperEvent):
        out["value"] = event.value
    elif isinstance(event, ImuEvent):
        out["r1"] = [list(row) for row in event.r1]
        out["r2"] = [list(row) for row in event.r2]
    else:
        out["encoders"] = list(event.encoders)
    return out


def scenario_from_dict(doc: dict, source: str = "<dict>") -> ScenarioScript:
    try:
        _check_keys(doc, _TOP_REQUIRED, _TOP_OPTIONAL, "scenario")
        raw_events = doc["events"]
        if not isinstance(raw_events, list):
            raise ScenarioError("events: expected a list")
        events = tuple(
            _event_from_dict(e, f"events[{i}]") for i, e in enumerate(raw_events)
        )
        waypoints = []
        for i, node in enumerate(doc.get("waypoints", []) or []):
            where = f"waypoints[{i}]"
            _check_keys(node, _WAYPOINT_KEYS, set(), where)
            try:
                waypoints.append(WaypointGoal(**node))
            except (ValueError, TypeError) as exc:
                raise ScenarioError(f"{where}: {exc}") from None
        controller = doc["controller"]
        if not isinstance(controller, dict):
            raise ScenarioError("controller: expected a mapping")
        ik = doc.get("ik")
        if ik is not None and not isinstance(ik, dict):
            raise ScenarioError("ik: expected a mapping")
        return ScenarioScript(
            name=doc["name"],
            model=doc["model"],
            decoupling=doc["decoupling"],
            controller=dict(controller),
            duration=doc["duration"],
            events=events,
            waypoints=tuple(waypoints),
            heartbeat_period=doc.get("heartbeat_period", 0.1),
            ik=dict(ik) if ik is not None else None,
            hand_calibration=doc.get("hand_calibration"),
        )
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def scenario_to_dict(script: ScenarioScript) -> dict:
    out = {
        "name": script.name,
        "model": script.model,
        "decoupling": script.decoupling,
        "controller": dict(script.controller),
        "duration": script.duration,
        "heartbeat_period": script.heartbeat_period,
        "events": [_event_to_dict(e) for e in script.events],
        "waypoints": [
            {
                "t": wp.t,
                "position": list(wp.position),
                "orientation_wxyz": list(wp.orientation_wxyz),
                "pos_tol": wp.pos_tol,
                "rot_tol": wp.rot_tol,
            }
            for wp in script.waypoints
        ],
    }
    if script.ik is not None:
        out["ik"] = dict(script.ik)
    if script.hand_calibration is not None:
        out["hand_calibration"] = script.hand_calibration
    return out


def load_scenario(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ScenarioError(f"{path}: {line}not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: scenario document must be a mapping")
    return scenario_from_dict(doc, source=str(path))


def builtin_scenario_names() -> list[str]:
    root = resources.files("glteleop").joinpath("data", "scenarios")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_builtin_scenario(name: str) -> ScenarioScript:
    res = resources.files("glteleop").joinpath("data", "scenarios", f"{name}.yaml")
    if not res.is_file():
        raise ScenarioError(
            f"unknown scenario {name!r}; shipped scenarios: "
            f"{', '.join(builtin_scenario_names())}"
        )
    doc = yaml.safe_load(res.read_text())
    return scenario_from_dict(doc, source=f"builtin:{name}")


def save_scenario(script: ScenarioScript, path: str | Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario_to_dict(script), sort_keys=False, width=100)
    )


# ---- tick-grid quantization ----


def tick_count(duration: float, dt: float) -> int:
    """Number of whole control ticks in `duration` seconds."""
    return int(round(duration / dt))


def event_tick(t: float, dt: float, n_ticks: int) -> int:
    """First tick whose step covers timestamp t, clamped onto the run.

    Tick n advances simulated time ((n-1)*dt, n*dt]; an event stamped t
    lands on tick floor(t/dt)+1.  The epsilon keeps timestamps that are
    exact multiples of dt (up to float representation) on their intended
    boundary instead of one tick early.
    """
    return min(n_ticks, int(math.floor(t / dt + 1e-9)) + 1)


def events_by_tick(
    script: ScenarioScript, dt: float
) -> dict[int, tuple[DeviceEvent, ...]]:
    """Group the timeline by destination tick, preserving file order."""
    n_ticks = tick_count(script.duration, dt)
    grouped: dict[int, list[DeviceEvent]] = {}
    for event in script.events:
        grouped.setdefault(event_tick(event.t, dt, n_ticks), []).append(event)
    return {tick: tuple(batch) for tick, batch in grouped.items()}
