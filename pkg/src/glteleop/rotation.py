"""Convention-pinned rotation math for the teleoperation stack.

Conventions, fixed across the whole package:

- Quaternions are Hamilton, scalar-first (w, x, y, z), and canonicalized to
  w >= 0 at construction (q and -q are the same rotation; pinning the sign
  makes outputs comparable in tests and logs).
- Axis-angle uses a unit axis and an angle in [0, pi]. A rotation smaller
  than 1e-12 rad is reported as axis (1, 0, 0), angle 0.
- Rotation matrices are 3x3 row-major, world = R @ body.
- Euler triples are intrinsic (body-fixed, right-multiplied): XYZ means
  R = Rx(a) @ Ry(b) @ Rz(c), XYX means R = Rx(a) @ Ry(b) @ Rx(c).
  Ranges: a, c in (-pi, pi]; b in [-pi/2, pi/2] for XYZ, [0, pi] for XYX.
- Gimbal lock: when b is within 1e-7 of a singular value (+-pi/2 for XYZ,
  0 or pi for XYX) the split between a and c is not observable; we set
  c := 0 and fold the whole residual into a. At the exact singularity the
  recomposition is still tight (~1e-16); approaching it, the recomposition
  error of the folded form grows like |cos b| (XYZ) / |sin b| (XYX), which
  is the price of a deterministic branch at 1e-7.

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

XYZ = "XYZ"
XYX = "XYX"

_RENORM_TRIGGER = 1e-13  # squared-norm deviation above which we renormalize
_ZERO_ANGLE = 1e-12  # rotations below this are treated as identity
_GIMBAL_EPS = 1e-7  # distance from the singular b at which c := 0 applies
_ORTHO_TOL = 1e-9  # rotation-matrix validation tolerance


# ---- value types ----


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion, scalar-first, canonicalized to w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        w, x, y, z = float(self.w), float(self.x), float(self.y), float(self.z)
        n2 = w * w + x * x + y * y + z * z
        if not math.isfinite(n2) or n2 < 1e-12:
            raise ValueError(f"quaternion norm unusable: ({w}, {x}, {y}, {z})")
        if abs(n2 - 1.0) > _RENORM_TRIGGER:
            inv = 1.0 / math.sqrt(n2)
            w, x, y, z = w * inv, x * inv, y * inv, z * inv
        if w < 0.0:
            w, x, y, z = -w, -x, -y, -z
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    def as_wxyz(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


@dataclass(frozen=True)
class AxisAngle:
    """Unit rotation axis plus angle in [0, pi]."""

    axis: tuple[float, float, float]
    angle: float

    def __post_init__(self):
        ax = tuple(float(v) for v in self.axis)
        ang = float(self.angle)
        n = math.sqrt(ax[0] ** 2 + ax[1] ** 2 + ax[2] ** 2)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-12:
            raise ValueError(f"axis not unit: {ax}")
        if not math.isfinite(ang) or ang < 0.0 or ang > math.pi + 1e-12:
            raise ValueError(f"angle outside [0, pi]: {ang}")
        object.__setattr__(self, "axis", ax)
        object.__setattr__(self, "angle", ang)


@dataclass(frozen=True)
class EulerTriple:
    """Intrinsic Euler angles (a, b, c) in one of the two supported conventions."""

    a: float
    b: float
    c: float
    convention: str

    def __post_init__(self):
        if self.convention not in (XYZ, XYX):
            raise ValueError(f"unknown euler convention: {self.convention!r}")
        a, b, c = float(self.a), float(self.b), float(self.c)
        slack = 1e-9
        for name, v in (("a", a), ("c", c)):
            if not math.isfinite(v) or v <= -math.pi - slack or v > math.pi + slack:
                raise ValueError(f"euler {name} outside (-pi, pi]: {v}")
        if self.convention == XYZ:
            if not -math.pi / 2 - slack <= b <= math.pi / 2 + slack:
                raise ValueError(f"euler b outside [-pi/2, pi/2]: {b}")
        else:
            if not -slack <= b <= math.pi + slack:
                raise ValueError(f"euler b outside [0, pi]: {b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)


# ---- quaternion algebra ----


def identity() -> UnitQuaternion:
    return UnitQuaternion(1.0, 0.0, 0.0, 0.0)


def compose(q1: UnitQuaternion, q2: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product q1 * q2 (apply q2 in the body frame of q1)."""
    w1, x1, y1, z1 = q1.w, q1.x, q1.y, q1.z
    w2, x2, y2, z2 = q2.w, q2.x, q2.y, q2.z
    return UnitQuaternion(
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    )


def inverse(q: UnitQuaternion) -> UnitQuaternion:
    """Inverse of a unit quaternion (its conjugate)."""
    return UnitQuaternion(q.w, -q.x, -q.y, -q.z)


def rotate_vector(q: UnitQuaternion, v) -> np.ndarray:
    """Rotate a 3-vector by q using the expanded sandwich product."""
    v = np.asarray(v, dtype=float)
    u = np.array([q.x, q.y, q.z])
    t = 2.0 * np.cross(u, v)
    return v + q.w * t + np.cross(u, t)


def quat_distance(q1: UnitQuaternion, q2: UnitQuaternion) -> float:
    """Double-cover-aware distance min(|q1 - q2|, |q1 + q2|)."""
    d_minus = math.sqrt(
        (q1.w - q2.w) ** 2 + (q1.x - q2.x) ** 2 + (q1.y - q2.y) ** 2 + (q1.z - q2.z) ** 2
    )
    d_plus = math.sqrt(
        (q1.w + q2.w) ** 2 + (q1.x + q2.x) ** 2 + (q1.y + q2.y) ** 2 + (q1.z + q2.z) ** 2
    )
    return min(d_minus, d_plus)


# ---- axis-angle ----


def from_axis_angle(axis, angle: float) -> UnitQuaternion:
    """Quaternion for a rotation of `angle` radians about `axis` (unit)."""
    ax, ay, az = (float(v) for v in axis)
    h = 0.5 * float(angle)
    s = math.sin(h)
    return UnitQuaternion(math.cos(h), ax * s, ay * s, az * s)


def to_axis_angle(q: UnitQuaternion) -> AxisAngle:
    """Axis-angle of q with angle in [0, pi].

    Rotations below 1e-12 rad return the fixed convention
    (axis (1, 0, 0), angle 0) so downstream outputs stay deterministic.
    """
    n = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    angle = 2.0 * math.atan2(n, q.w)  # w >= 0 keeps this in [0, pi]
    if angle < _ZERO_ANGLE:
        return AxisAngle((1.0, 0.0, 0.0), 0.0)
    inv = 1.0 / n
    return AxisAngle((q.x * inv, q.y * inv, q.z * inv), angle)


def scaled_displacement(
    q0: UnitQuaternion, q: UnitQuaternion, alpha_r: float
) -> AxisAngle:
    """Clutch rotation law: scale the displacement q0^-1 * q by alpha_r.

    The displacement is converted to axis-angle (v, theta) and returned as
    (v, alpha_r * theta): the axis is the exact float value of the unscaled
    axis, only the angle is scaled.

    Args:
        q0: orientation captured at clutch engage.
        q: current orientation of the same device.
        alpha_r: rotational scaling factor, must lie in (0, 1].

    Raises:
        ValueError: if alpha_r is outside (0, 1].
    """
    alpha_r = float(alpha_r)
    if not 0.0 < alpha_r <= 1.0:
        raise ValueError(f"alpha_r must be in (0, 1], got {alpha_r}")
    aa = to_axis_angle(compose(inverse(q0), q))
    if aa.angle == 0.0:
        return aa
    return AxisAngle(aa.axis, alpha_r * aa.angle)


# ---- quaternion <-> matrix ----


def quat_to_matrix(q: UnitQuaternion) -> np.ndarray:
    w, x, y, z = q.w, q.x, q.y, q.z
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> UnitQuaternion:
    """Quaternion of a rotation matrix, largest-pivot branch for stability."""
    R = np.asarray(R, dtype=float)
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        w = (R[2, 1] - R[1, 2]) / s
        x = 0.25 * s
        y = (R[0, 1] + R[1, 0]) / s
        z = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        w = (R[0, 2] - R[2, 0]) / s
        x = (R[0, 1] + R[1, 0]) / s
        y = 0.25 * s
        z = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        w = (R[1, 0] - R[0, 1]) / s
        x = (R[0, 2] + R[2, 0]) / s
        y = (R[1, 2] + R[2, 1]) / s
        z = 0.25 * s
    return UnitQuaternion(w, x, y, z)


def check_rotation_matrix(R: np.ndarray) -> None:
    """Validate shape, orthonormality and det = +1; raises ValueError."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("rotation matrix must be finite 3x3")
    if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
        raise ValueError("matrix is not orthonormal within 1e-9")
    if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
        raise ValueError("matrix determinant is not +1 within 1e-9")


# ---- elementary and euler rotations ----


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose_euler(e: EulerTriple) -> np.ndarray:
    """Matrix of an intrinsic Euler triple, written in closed form."""
    ca, sa = math.cos(e.a), math.sin(e.a)
    cb, sb = math.cos(e.b), math.sin(e.b)
    cc, sc = math.cos(e.c), math.sin(e.c)
    if e.convention == XYZ:
        return np.array(
            [
                [cb * cc, -cb * sc, sb],
                [ca * sc + sa * sb * cc, ca * cc - sa * sb * sc, -sa * cb],
                [sa * sc - ca * sb * cc, sa * cc + ca * sb * sc, ca * cb],
            ]
        )
    return np.array(
        [
            [cb, sb * sc, sb * cc],
            [sa * sb, ca * cc - sa * cb * sc, -ca * sc - sa * cb * cc],
            [-ca * sb, sa * cc + ca * cb * sc, -sa * sc + ca * cb * cc],
        ]
    )


def _wrap_half_open(x: float) -> float:
    # atan2 yields [-pi, pi]; the type wants (-pi, pi].
    if x <= -math.pi:
        return x + 2.0 * math.pi
    return x


def extract_euler(R: np.ndarray, convention: str) -> EulerTriple:
    """Intrinsic Euler angles of R in the given convention.

    Within 1e-7 of the singular b the split between a and c degenerates;
    the gimbal branch sets c := 0 and folds the residual rotation into a
    (see the module docstring for the accuracy consequences).

    Args:
        R: valid rotation matrix (caller guarantees orthonormality).
        convention: XYZ or XYX.

    Returns:
        EulerTriple with compose_euler(result) reproducing R.
    """
    if convention == XYZ:
        sb = min(1.0, max(-1.0, float(R[0, 2])))
        b = math.asin(sb)
        if math.pi / 2 - abs(b) <= _GIMBAL_EPS:
            a = math.atan2(float(R[2, 1]), float(R[1, 1]))
            c = 0.0
        else:
            a = math.atan2(-float(R[1, 2]), float(R[2, 2]))
            c = math.atan2(-float(R[0, 1]), float(R[0, 0]))
        return EulerTriple(_wrap_half_open(a), b, c, XYZ)
    if convention == XYX:
        cb = min(1.0, max(-1.0, float(R[0, 0])))
        b = math.acos(cb)
        if b <= _GIMBAL_EPS:
            a = math.atan2(-float(R[1, 2]), float(R[1, 1]))
            c = 0.0
        elif math.pi - b <= _GIMBAL_EPS:
            a = math.atan2(float(R[1, 2]), float(R[1, 1]))
            c = 0.0
        else:
            a = math.atan2(float(R[1, 0]), -float(R[2, 0]))
            c = math.atan2(float(R[0, 1]), float(R[0, 2]))
        return EulerTriple(_wrap_half_open(a), b, c, XYX)
    raise ValueError(f"unknown euler convention: {convention!r}")
