"""Slave command variants shared by the controllers, simulator, and session.

A slave command is exactly one of: a joint-space target, a Cartesian
end-effector target, a gripper value, or a hand target (see hand.HandTarget).
All values are validated finite at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .hand import HandTarget
from .kinematics import Pose

__all__ = ["JointTarget", "CartesianTarget", "GripperTarget", "HandTarget", "SlaveCommand"]


@dataclass(frozen=True)
class JointTarget:
    """Joint-space position target, radians, one value per chain joint."""

    joints: tuple[float, ...]

    def __post_init__(self):
        joints = tuple(float(j) for j in self.joints)
        if not joints:
            raise ValueError("joint target is empty")
        if not all(math.isfinite(j) for j in joints):
            raise ValueError(f"joint target contains a non-finite value: {joints}")
        object.__setattr__(self, "joints", joints)


@dataclass(frozen=True)
class CartesianTarget:
    """End-effector pose target; Pose validates finiteness."""

    pose: Pose

    def __post_init__(self):
        if not isinstance(self.pose, Pose):
            raise ValueError(f"cartesian target needs a Pose, got {type(self.pose)}")


@dataclass(frozen=True)
class GripperTarget:
    """Normalized gripper command, 0 = open, 1 = closed."""

    value: float

    def __post_init__(self):
        value = float(self.value)
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"gripper value outside [0, 1]: {value}")
        object.__setattr__(self, "value", value)


SlaveCommand = Union[JointTarget, CartesianTarget, GripperTarget, HandTarget]
