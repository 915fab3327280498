"""Serial-chain kinematics: FK, geometric Jacobian, damped-least-squares IK.

Chains are declared as an ordered list of links, each a fixed transform from
the previous joint frame followed by a revolute joint about a unit axis in
the post-transform frame. The end effector hangs off the last joint through
one more fixed offset.

All functions are pure; a chain is immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rotation import UnitQuaternion, matrix_to_quat, quat_to_matrix


@dataclass(frozen=True)
class Pose:
    """Cartesian pose: position in meters plus unit-quaternion orientation."""

    position: tuple[float, float, float]
    orientation: UnitQuaternion

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError(f"position must be 3 finite floats: {self.position!r}")
        object.__setattr__(self, "position", pos)

    @staticmethod
    def identity() -> "Pose":
        return Pose((0.0, 0.0, 0.0), UnitQuaternion(1.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class Link:
    """Fixed transform + revolute joint about `axis` (unit, local frame)."""

    transform: Pose
    axis: tuple[float, float, float]

    def __post_init__(self):
        ax = tuple(float(v) for v in self.axis)
        n = math.sqrt(sum(v * v for v in ax))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"joint axis must be unit length: {self.axis!r}")
        object.__setattr__(self, "axis", ax)


@dataclass(frozen=True)
class IkConfig:
    damping: float = 0.05
    max_iters: int = 200
    pos_tol: float = 1e-4
    ang_tol: float = 1e-3
    step_cap: float = 0.2


@dataclass(frozen=True)
class IkSolution:
    joints: tuple[float, ...]
    residual_position: float
    residual_angle: float
    iterations: int
    converged: bool


class KinematicChain:
    """Immutable serial chain with joint and velocity limits.

    Arrays used by the hot FK/Jacobian path are precomputed once here.
    """

    def __init__(
        self,
        links: list[Link],
        joint_limits: list[tuple[float, float]],
        velocity_limits: list[float],
        ee_offset: Pose,
    ):
        n = len(links)
        if n < 1:
            raise ValueError("chain needs at least one link")
        if len(joint_limits) != n or len(velocity_limits) != n:
            raise ValueError("limits must match link count")
        for lo, hi in joint_limits:
            if not lo < hi:
                raise ValueError(f"joint limit must satisfy min < max: ({lo}, {hi})")
        for v in velocity_limits:
            if not v > 0:
                raise ValueError(f"velocity limit must be positive: {v}")
        self.links = tuple(links)
        self.joint_limits = tuple((float(lo), float(hi)) for lo, hi in joint_limits)
        self.velocity_limits = tuple(float(v) for v in velocity_limits)
        self.ee_offset = ee_offset
        self.dof = n
        self._R_fixed = np.array([quat_to_matrix(l.transform.orientation) for l in links])
        self._t_fixed = np.array([l.transform.position for l in links])
        self._axes = np.array([l.axis for l in links])
        self._R_ee = quat_to_matrix(ee_offset.orientation)
        self._t_ee = np.asarray(ee_offset.position, dtype=float)
        self._lo = np.array([l for l, _ in self.joint_limits])
        self._hi = np.array([h for _, h in self.joint_limits])

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self._lo, self._hi)

    def validate_joints(self, q, slack: float = 1e-9) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} joint values, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("joint values must be finite")
        if np.any(q < self._lo - slack) or np.any(q > self._hi + slack):
            raise ValueError(f"joint values outside limits: {q.tolist()}")
        return q


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    # Rodrigues formula for a unit axis.
    c = math.cos(angle)
    s = math.sin(angle)
    x, y, z = axis
    one_c = 1.0 - c
    return np.array(
        [
            [c + x * x * one_c, x * y * one_c - z * s, x * z * one_c + y * s],
            [y * x * one_c + z * s, c + y * y * one_c, y * z * one_c - x * s],
            [z * x * one_c - y * s, z * y * one_c + x * s, c + z * z * one_c],
        ]
    )


def _fk_frames(chain: KinematicChain, q: np.ndarray):
    """World rotation/position of the EE plus per-joint origins and axes."""
    R = np.eye(3)
    t = np.zeros(3)
    origins = np.empty((chain.dof, 3))
    axes = np.empty((chain.dof, 3))
    for i in range(chain.dof):
        t = t + R @ chain._t_fixed[i]
        R = R @ chain._R_fixed[i]
        origins[i] = t
        axes[i] = R @ chain._axes[i]
        R = R @ _axis_rotation(chain._axes[i], q[i])
    t = t + R @ chain._t_ee
    R = R @ chain._R_ee
    return R, t, origins, axes


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """EE pose: product of fixed transforms and joint rotations plus offset."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"expected {chain.dof} joint values, got shape {q.shape}")
    R, t, _, _ = _fk_frames(chain, q)
    return Pose(tuple(t), matrix_to_quat(R))


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian (6 x N): rows 0..2 linear m/rad, rows 3..5 angular."""
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"expected {chain.dof} joint values, got shape {q.shape}")
    _, p_ee, origins, axes = _fk_frames(chain, q)
    J = np.empty((6, chain.dof))
    for i in range(chain.dof):
        # Inline cross product: np.cross has too much call overhead here.
        ax, ay, az = axes[i]
        rx, ry, rz = p_ee - origins[i]
        J[0, i] = ay * rz - az * ry
        J[1, i] = az * rx - ax * rz
        J[2, i] = ax * ry - ay * rx
        J[3:, i] = axes[i]
    return J


def _pose_error(chain: KinematicChain, q: np.ndarray, target_p: np.ndarray, target_R: np.ndarray):
    R, t, origins, axes = _fk_frames(chain, q)
    e_pos = target_p - t
    # World-frame rotation error as a rotation vector.
    q_err = matrix_to_quat(target_R @ R.T)
    n = math.sqrt(q_err.x**2 + q_err.y**2 + q_err.z**2)
    angle = 2.0 * math.atan2(n, q_err.w)
    if n < 1e-15:
        e_rot = np.zeros(3)
    else:
        e_rot = np.array([q_err.x, q_err.y, q_err.z]) * (angle / n)
    return e_pos, e_rot, angle, (t, origins, axes)


def solve_ik(chain: KinematicChain, target: Pose, seed, cfg: IkConfig = IkConfig()) -> IkSolution:
    """Damped-least-squares IK: dq = J^T (J J^T + lam^2 I)^-1 * twist.

    The damping is error-adaptive, lam^2 = damping^2 * |twist|^2 + 1e-8:
    heavy while the pose error is large (stable near singularities), fading
    as the error shrinks so terminal convergence is not throttled by a
    fixed floor.

    Convergence is checked before each step, so a seed that already meets
    the tolerances is returned unchanged (the fixed-point case costs one FK
    evaluation and reports iterations=0). Steps are capped at
    cfg.step_cap rad (inf-norm, direction preserved) and clamped to joint
    limits, so the returned joints always satisfy the limits.

    Non-convergence is not an error: the last iterate is returned with
    converged=False and the caller decides (the simulator safe-holds).

    Raises:
        ValueError: non-finite target, or seed invalid for the chain.
    """
    tp = np.asarray(target.position, dtype=float)
    if not np.all(np.isfinite(tp)):
        raise ValueError("target position must be finite")
    tR = quat_to_matrix(target.orientation)
    q = chain.validate_joints(seed).copy()
    q = chain.clamp(q)
    damping2 = cfg.damping * cfg.damping
    eye6 = np.eye(6)
    iterations = 0
    while True:
        e_pos, e_rot, angle, (p_ee, origins, axes) = _pose_error(chain, q, tp, tR)
        pos_err = float(np.linalg.norm(e_pos))
        if pos_err < cfg.pos_tol and angle < cfg.ang_tol:
            return IkSolution(tuple(q.tolist()), pos_err, angle, iterations, True)
        if iterations >= cfg.max_iters:
            return IkSolution(tuple(q.tolist()), pos_err, angle, iterations, False)
        J = np.empty((6, chain.dof))
        for i in range(chain.dof):
            # Inline cross product: np.cross has too much call overhead here.
            ax, ay, az = axes[i]
            rx, ry, rz = p_ee - origins[i]
            J[0, i] = ay * rz - az * ry
            J[1, i] = az * rx - ax * rz
            J[2, i] = ax * ry - ay * rx
            J[3:, i] = axes[i]
        twist = np.concatenate([e_pos, e_rot])
        lam2 = damping2 * float(twist @ twist) + 1e-8
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * eye6, twist)
        mx = float(np.max(np.abs(dq)))
        if mx > cfg.step_cap:
            dq *= cfg.step_cap / mx
        q = chain.clamp(q + dq)
        iterations += 1
