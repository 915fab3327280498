"""Robot model files: declarative chain + safety descriptions.

A model file is YAML with a `model_version` field, a list of links (fixed
transform, joint axis, joint and velocity limits), an end-effector offset,
safety bounds for the simulator, and the effector fitted to the flange
(two-finger gripper or 6-channel hand). Models ship inside the package
(`glteleop/data/`) and can also be loaded from explicit paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .kinematics import KinematicChain, Link, Pose
from .rotation import XYX, XYZ, UnitQuaternion

SUPPORTED_MODEL_VERSION = 1


@dataclass(frozen=True)
class SafetyConfig:
    """Simulator safety bounds; the e-stop threshold proxies a torque limit."""

    tracking_error_estop: float
    workspace_min: tuple[float, float, float]
    workspace_max: tuple[float, float, float]

    def __post_init__(self):
        if not self.tracking_error_estop > 0:
            raise ValueError("tracking_error_estop must be positive")
        for lo, hi in zip(self.workspace_min, self.workspace_max):
            if not lo < hi:
                raise ValueError("workspace box must have min < max on every axis")


@dataclass(frozen=True)
class RobotModel:
    name: str
    model_version: int
    chain: KinematicChain
    safety: SafetyConfig
    effector_kind: str  # "gripper" or "hand"
    effector_channels: int
    effector_rate: float  # fraction of full channel range per second
    home: tuple[float, ...]
    euler_convention: str  # wrist extraction convention for spatial control


def _pose_from_node(node: dict, where: str) -> Pose:
    t = node.get("translation", [0.0, 0.0, 0.0])
    r = node.get("rotation_wxyz", [1.0, 0.0, 0.0, 0.0])
    if len(t) != 3 or len(r) != 4:
        raise ValueError(f"{where}: translation needs 3 values, rotation_wxyz needs 4")
    return Pose(tuple(float(v) for v in t), UnitQuaternion(*[float(v) for v in r]))


def parse_model(doc: dict, source: str = "<model>") -> RobotModel:
    if not isinstance(doc, dict):
        raise ValueError(f"{source}: model document must be a mapping")
    version = doc.get("model_version")
    if version != SUPPORTED_MODEL_VERSION:
        raise ValueError(f"{source}: unsupported model_version {version!r}")
    name = str(doc.get("name", Path(source).stem))

    links, limits, vels = [], [], []
    for idx, node in enumerate(doc.get("links", [])):
        where = f"{source}: links[{idx}]"
        axis = node.get("axis")
        lim = node.get("limit")
        if axis is None or lim is None:
            raise ValueError(f"{where}: needs axis and limit")
        links.append(Link(_pose_from_node(node, where), tuple(float(v) for v in axis)))
        limits.append((float(lim[0]), float(lim[1])))
        vels.append(float(node.get("velocity_limit", 2.0)))
    if not links:
        raise ValueError(f"{source}: model has no links")

    ee = _pose_from_node(doc.get("ee_offset", {}), f"{source}: ee_offset")
    chain = KinematicChain(links, limits, vels, ee)

    safety_node = doc.get("safety", {})
    box = safety_node.get("workspace_box", {})
    safety = SafetyConfig(
        tracking_error_estop=float(safety_node.get("tracking_error_estop", 0.5)),
        workspace_min=tuple(float(v) for v in box.get("min", (-2.0, -2.0, -2.0))),
        workspace_max=tuple(float(v) for v in box.get("max", (2.0, 2.0, 2.0))),
    )

    eff = doc.get("effector", {})
    kind = str(eff.get("kind", "gripper"))
    if kind not in ("gripper", "hand"):
        raise ValueError(f"{source}: effector.kind must be gripper or hand")
    channels = int(eff.get("channels", 1 if kind == "gripper" else 6))

    home = tuple(float(v) for v in doc.get("home", [0.0] * chain.dof))
    if len(home) != chain.dof:
        raise ValueError(f"{source}: home must list {chain.dof} joint values")
    chain.validate_joints(home)

    convention = str(doc.get("euler_convention", XYZ))
    if convention not in (XYZ, XYX):
        raise ValueError(f"{source}: euler_convention must be XYZ or XYX")

    return RobotModel(
        name=name,
        model_version=int(version),
        chain=chain,
        safety=safety,
        effector_kind=kind,
        effector_channels=channels,
        effector_rate=float(eff.get("rate", 2.0)),
        home=home,
        euler_convention=convention,
    )


def builtin_model_names() -> list[str]:
    root = resources.files("glteleop").joinpath("data")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_model(ref: str | Path) -> RobotModel:
    """Load a model by file path, or by bare name from the shipped set."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        text = path.read_text()
        source = str(path)
    else:
        res = resources.files("glteleop").joinpath("data", f"{ref}.yaml")
        if not res.is_file():
            raise ValueError(
                f"unknown model {ref!r}; shipped models: {', '.join(builtin_model_names())}"
            )
        text = res.read_text()
        source = f"builtin:{ref}"
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ValueError(f"{source}: not valid YAML: {e}") from e
    return parse_model(doc, source)


def euler_angle_capacity(convention: str) -> tuple[float, float]:
    """Half-range the extraction can express for (a or c, b)."""
    if convention == XYZ:
        return math.pi, math.pi / 2
    return math.pi, math.pi
