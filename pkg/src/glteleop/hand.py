"""Exoskeleton-to-hand retargeting.

A six-encoder exoskeleton glove drives a six-channel robotic hand.  Encoder
layout (radians):

    0  thumb base rotation
    1  thumb proximal flexion
    2  thumb distal flexion
    3  index proximal flexion
    4  index distal flexion
    5  spare (recorded, not mapped)

Rather than copying raw joint angles, each finger is reduced to its
*fingertip-plane angle*: the angle of the base->fingertip segment of a planar
two-link finger.  This captures how closed the finger is in a way that is
insensitive to how the closure is split between the two joints.  The thumb
geometry includes a fixed 60 degree mount tilt, applied explicitly so the
derived angle lives in the same frame as the fingers.

Output channels (all clamped to [0, 1], 0 = open, 1 = closed), in order:
thumb bend, thumb rotation, index, middle, ring, pinky.  The hand has no
individual middle/ring/pinky sensing, so those three mirror the index channel
exactly (a single "virtual finger" value is computed once and reused).

Channel endpoints come from a calibration of recorded open/closed encoder
poses; the mapping from derived angle to channel value is a clamped affine
map, which hits 0.0 and 1.0 exactly at the calibration endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

THUMB_TILT = math.radians(60.0)

_DEGENERATE_RADIUS = 1e-12

CHANNEL_NAMES = ("thumb_bend", "thumb_rotation", "index", "middle", "ring", "pinky")

CALIBRATION_VERSION = 1


# ---- readings and targets ----


def _check_six(values, label: str) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != 6:
        raise ValueError(f"{label} needs 6 values, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{label} contains a non-finite value: {values}")
    return values


@dataclass(frozen=True)
class ExoskeletonReading:
    """One sample of the six glove encoders, in radians."""

    encoders: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "encoders", _check_six(self.encoders, "encoders"))


@dataclass(frozen=True)
class HandTarget:
    """Normalized hand command: thumb bend, thumb rotation, index..pinky."""

    channels: tuple[float, ...]

    def __post_init__(self):
        channels = _check_six(self.channels, "channels")
        if not all(0.0 <= c <= 1.0 for c in channels):
            raise ValueError(f"channels outside [0, 1]: {channels}")
        object.__setattr__(self, "channels", channels)


# ---- finger geometry ----


def fingertip_plane_angle(
    j1: float, j2: float, l1: float, l2: float
) -> tuple[float, bool]:
    """Angle of the base->fingertip segment of a planar two-link finger.

    Returns ``(angle, degenerate)``.  When the fingertip lands on the base
    (only possible with near-equal links folded fully back) the angle is
    undefined; we return 0.0 with the degenerate flag set so callers can hold
    the previous value instead of commanding a jump.
    """
    if l1 <= 0.0 or l2 <= 0.0:
        raise ValueError(f"link lengths must be positive: {(l1, l2)}")
    x = l1 * math.cos(j1) + l2 * math.cos(j1 + j2)
    y = l1 * math.sin(j1) + l2 * math.sin(j1 + j2)
    if math.hypot(x, y) < _DEGENERATE_RADIUS:
        return 0.0, True
    return math.atan2(y, x), False


def affine_channel(value: float, open_end: float, closed_end: float) -> float:
    """Clamped affine map sending open_end -> 0.0 and closed_end -> 1.0."""
    t = (value - open_end) / (closed_end - open_end)
    return min(1.0, max(0.0, t))


# ---- calibration ----


@dataclass(frozen=True)
class HandCalibration:
    """Recorded open/closed encoder poses plus finger link lengths.

    Channel endpoints are derived from the poses at construction time:
    the thumb-bend and index endpoints are fingertip-plane angles of the
    respective poses, the thumb-rotation endpoints are the raw encoder 0
    values.
    """

    open_pose: tuple[float, ...]
    closed_pose: tuple[float, ...]
    thumb_links: tuple[float, float]
    index_links: tuple[float, float]
    thumb_bend_endpoints: tuple[float, float] = field(init=False, compare=False)
    thumb_rotation_endpoints: tuple[float, float] = field(init=False, compare=False)
    index_endpoints: tuple[float, float] = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "open_pose", _check_six(self.open_pose, "open_pose"))
        object.__setattr__(
            self, "closed_pose", _check_six(self.closed_pose, "closed_pose")
        )
        for links, label in ((self.thumb_links, "thumb"), (self.index_links, "index")):
            links = tuple(float(v) for v in links)
            if len(links) != 2 or not all(
                math.isfinite(v) and v > 0.0 for v in links
            ):
                raise ValueError(f"{label}_links must be two positive lengths: {links}")
            object.__setattr__(self, f"{label}_links", links)
        for i, (o, c) in enumerate(zip(self.open_pose, self.closed_pose)):
            if o == c:
                raise ValueError(f"encoder {i}: open and closed poses are identical")
        object.__setattr__(
            self,
            "thumb_bend_endpoints",
            (
                self._thumb_angle(self.open_pose),
                self._thumb_angle(self.closed_pose),
            ),
        )
        object.__setattr__(
            self,
            "thumb_rotation_endpoints",
            (self.open_pose[0], self.closed_pose[0]),
        )
        object.__setattr__(
            self,
            "index_endpoints",
            (
                self._index_angle(self.open_pose),
                self._index_angle(self.closed_pose),
            ),
        )
        for name in ("thumb_bend_endpoints", "thumb_rotation_endpoints", "index_endpoints"):
            lo, hi = getattr(self, name)
            if lo == hi:
                raise ValueError(f"{name}: derived open/closed endpoints are identical")

    def _thumb_angle(self, pose: tuple[float, ...]) -> float:
        angle, degenerate = fingertip_plane_angle(pose[1], pose[2], *self.thumb_links)
        if degenerate:
            raise ValueError("thumb calibration pose is degenerate")
        return angle + THUMB_TILT

    def _index_angle(self, pose: tuple[float, ...]) -> float:
        angle, degenerate = fingertip_plane_angle(pose[3], pose[4], *self.index_links)
        if degenerate:
            raise ValueError("index calibration pose is degenerate")
        return angle


def save_calibration(calib: HandCalibration, path: str | Path) -> None:
    doc = {
        "calibration_version": CALIBRATION_VERSION,
        "open_pose": list(calib.open_pose),
        "closed_pose": list(calib.closed_pose),
        "thumb_links": list(calib.thumb_links),
        "index_links": list(calib.index_links),
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def default_calibration() -> HandCalibration:
    """The calibration shipped with the package, for runs without their own."""
    res = resources.files("glteleop").joinpath("data", "hand_default.yaml")
    with resources.as_file(res) as path:
        return load_calibration(path)


def load_calibration(path: str | Path) -> HandCalibration:
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: calibration file is not a mapping")
    version = doc.get("calibration_version")
    if version != CALIBRATION_VERSION:
        raise ValueError(f"{path}: unsupported calibration_version {version!r}")
    try:
        return HandCalibration(
            open_pose=tuple(doc["open_pose"]),
            closed_pose=tuple(doc["closed_pose"]),
            thumb_links=tuple(doc["thumb_links"]),
            index_links=tuple(doc["index_links"]),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing calibration field {exc}") from None


# ---- retargeting ----


def retarget(reading: ExoskeletonReading, calib: HandCalibration) -> HandTarget:
    """Map one glove reading to a six-channel hand target.

    A degenerate fingertip (angle undefined) maps that finger to 0.0; the
    calibration endpoints are validated non-degenerate, so this only occurs
    for extreme off-calibration readings that the clamp would pin anyway.
    """
    e = reading.encoders
    thumb_angle, thumb_degenerate = fingertip_plane_angle(e[1], e[2], *calib.thumb_links)
    index_angle, index_degenerate = fingertip_plane_angle(e[3], e[4], *calib.index_links)
    if thumb_degenerate:
        thumb_bend = 0.0
    else:
        thumb_bend = affine_channel(thumb_angle + THUMB_TILT, *calib.thumb_bend_endpoints)
    thumb_rotation = affine_channel(e[0], *calib.thumb_rotation_endpoints)
    if index_degenerate:
        virtual_finger = 0.0
    else:
        virtual_finger = affine_channel(index_angle, *calib.index_endpoints)
    return HandTarget(
        (
            thumb_bend,
            thumb_rotation,
            virtual_finger,
            virtual_finger,
            virtual_finger,
            virtual_finger,
        )
    )
