"""Simulated slave tests.

Oracles: clamp arithmetic computed inline, forward kinematics from the
kinematics module (already tested against analytic/scipy oracles), and
bit-equality for the determinism and latching contracts.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from glteleop.commands import CartesianTarget, GripperTarget, JointTarget
from glteleop.hand import HandTarget
from glteleop.kinematics import (
    IkConfig,
    KinematicChain,
    Link,
    Pose,
    forward_kinematics,
    solve_ik,
)
from glteleop.models import RobotModel, SafetyConfig, load_model
from glteleop.rotation import identity
from glteleop.sim import DEFAULT_DT, initial_state, reset, step, step_all

DT = DEFAULT_DT


@pytest.fixture(scope="module")
def piper():
    return load_model("piper6")


@pytest.fixture(scope="module")
def flexiv():
    return load_model("flexiv7")


def dipper_model() -> RobotModel:
    """One y-axis joint swinging a 1 m rod; EE dips below z=-0.5 at ~0.524 rad."""
    chain = KinematicChain(
        links=(Link(transform=Pose.identity(), axis=(0.0, 1.0, 0.0)),),
        joint_limits=((-2.0, 2.0),),
        velocity_limits=(1.0,),
        ee_offset=Pose(position=(1.0, 0.0, 0.0), orientation=identity()),
    )
    return RobotModel(
        name="dipper",
        model_version=1,
        chain=chain,
        safety=SafetyConfig(
            tracking_error_estop=5.0,
            workspace_min=(-2.0, -2.0, -0.5),
            workspace_max=(2.0, 2.0, 2.0),
        ),
        effector_kind="gripper",
        effector_channels=1,
        effector_rate=2.0,
        home=(0.0,),
        euler_convention="XYZ",
    )


# ---- initial state and fixed points ----


def test_initial_state(piper):
    s = initial_state(piper)
    assert s.joints == piper.home
    assert s.ee_pose == forward_kinematics(piper.chain, piper.home)
    assert s.effector == (0.0,)
    assert s.velocities == (0.0,) * 6
    assert not s.estopped and not s.safe_hold
    assert s.tick == 0 and s.sim_time == 0.0


def test_fixed_point_command(piper):
    s0 = initial_state(piper)
    s1 = step(piper, s0, JointTarget(s0.joints), DT)
    assert s1.joints == s0.joints
    assert s1.ee_pose == s0.ee_pose
    assert s1.velocities == (0.0,) * 6
    assert s1.tick == 1 and s1.sim_time == DT


def test_sim_time_is_tick_times_dt(piper):
    s = initial_state(piper)
    for _ in range(7):
        s = step(piper, s, JointTarget(s.joints), DT)
    assert s.tick == 7
    assert s.sim_time == 7 * DT


def test_hold_command_is_safe_hold(piper):
    s0 = initial_state(piper)
    s1 = step(piper, s0, None, DT)
    assert s1.safe_hold
    assert s1.joints == s0.joints


# ---- velocity limiting ----


def test_velocity_clamp_arithmetic(piper):
    s0 = initial_state(piper)
    target = list(s0.joints)
    target[0] += 0.4  # below the 0.5 rad tracking-error threshold
    s1 = step(piper, s0, JointTarget(tuple(target)), DT)
    limit = piper.chain.velocity_limits[0]
    assert s1.joints[0] == s0.joints[0] + limit * DT
    assert s1.velocities[0] == pytest.approx(limit, abs=1e-12)


def test_exact_snap_within_one_step(piper):
    s0 = initial_state(piper)
    target = list(s0.joints)
    target[2] += 0.2 * piper.chain.velocity_limits[2] * DT
    s1 = step(piper, s0, JointTarget(tuple(target)), DT)
    assert s1.joints[2] == target[2]


def test_convergence_bound(piper):
    s = initial_state(piper)
    target = tuple(h + 0.45 for h in piper.home)
    max_err = 0.45
    min_vel = min(piper.chain.velocity_limits)
    budget = math.ceil(max_err / (min_vel * DT)) + 2
    for _ in range(budget):
        s = step(piper, s, JointTarget(target), DT)
    assert not s.estopped
    assert max(abs(j - t) for j, t in zip(s.joints, target)) < 1e-9


def test_velocity_compliance_random_targets(piper):
    rng = np.random.default_rng(83)
    s = initial_state(piper)
    lo, hi = zip(*piper.chain.joint_limits)
    for _ in range(200):
        target = tuple(rng.uniform(lo, hi).tolist())
        before = s.joints
        s = step(piper, s, JointTarget(target), DT)
        if s.estopped:
            break
        for j0, j1, vel in zip(before, s.joints, piper.chain.velocity_limits):
            assert abs(j1 - j0) / DT <= vel + 1e-12


def rotor_model() -> RobotModel:
    """One z-axis joint spinning a rod in the z=0 plane; no workspace hazard."""
    chain = KinematicChain(
        links=(Link(transform=Pose.identity(), axis=(0.0, 0.0, 1.0)),),
        joint_limits=((-2.0, 2.0),),
        velocity_limits=(1.0,),
        ee_offset=Pose(position=(1.0, 0.0, 0.0), orientation=identity()),
    )
    return RobotModel(
        name="rotor",
        model_version=1,
        chain=chain,
        safety=SafetyConfig(
            tracking_error_estop=5.0,
            workspace_min=(-2.0, -2.0, -2.0),
            workspace_max=(2.0, 2.0, 2.0),
        ),
        effector_kind="gripper",
        effector_channels=1,
        effector_rate=2.0,
        home=(0.0,),
        euler_convention="XYZ",
    )


def test_targets_clamped_to_joint_limits():
    model = rotor_model()
    s = initial_state(model)
    for _ in range(250):
        s = step(model, s, JointTarget((3.0,)), DT)
        assert not s.estopped
    assert s.joints == (2.0,)


# ---- safety semantics ----


def test_tracking_error_estop_latches(piper):
    s0 = initial_state(piper)
    jump = list(s0.joints)
    jump[1] += 1.0  # threshold is 0.5 rad
    s1 = step(piper, s0, JointTarget(tuple(jump)), DT)
    assert s1.estopped
    assert "tracking" in s1.estop_reason
    assert s1.joints == s0.joints
    # Latched: further commands are ignored, joints bit-identical.
    s2 = step(piper, s1, JointTarget(s0.joints), DT)
    assert s2.estopped and s2.joints == s1.joints
    assert s2.tick == 2
    s3 = step(piper, s2, GripperTarget(1.0), DT)
    assert s3.effector == s2.effector


def test_workspace_estop():
    model = dipper_model()
    s = initial_state(model)
    # Walk the rod downward in small steps; EE z = -sin(q) crosses -0.5.
    for _ in range(200):
        s = step(model, s, JointTarget((1.0,)), DT)
        if s.estopped:
            break
    assert s.estopped
    assert "workspace" in s.estop_reason
    # The violating step was rejected: published EE is still inside the box.
    assert s.ee_pose.position[2] >= -0.5
    assert s.ee_pose == forward_kinematics(model.chain, s.joints)


def test_reset_clears_estop(piper):
    s0 = initial_state(piper)
    jump = tuple(j + 1.0 for j in s0.joints)
    s1 = step(piper, s0, JointTarget(jump), DT)
    assert s1.estopped
    s2 = reset(piper)
    assert s2 == initial_state(piper)
    assert not s2.estopped and s2.tick == 0


# ---- cartesian commands ----


def test_cartesian_target_tracks_ik_solution(piper):
    s = initial_state(piper)
    start = s.ee_pose
    target = Pose(
        position=(start.position[0], start.position[1], start.position[2] + 0.02),
        orientation=start.orientation,
    )
    for _ in range(300):
        s = step(piper, s, CartesianTarget(target), DT)
    assert not s.estopped and not s.safe_hold
    err = np.linalg.norm(np.array(s.ee_pose.position) - np.array(target.position))
    assert err < 2e-4
    # Settled: the IK fixed point returns the seed, so the command equals the state.
    assert s.command_joints == s.joints


def test_unreachable_cartesian_is_safe_hold(piper):
    s0 = initial_state(piper)
    target = Pose(position=(5.0, 0.0, 0.0), orientation=identity())
    s1 = step(piper, s0, CartesianTarget(target), DT)
    assert s1.safe_hold and s1.ik_failure
    assert not s1.estopped
    assert s1.joints == s0.joints
    assert s1.tick == 1
    # A reachable command afterwards resumes motion.
    s2 = step(piper, s1, CartesianTarget(s0.ee_pose), DT)
    assert not s2.safe_hold


# ---- effector channels ----


def test_gripper_slew_and_snap(piper):
    s0 = initial_state(piper)
    s1 = step(piper, s0, GripperTarget(1.0), DT)
    assert s1.effector == (piper.effector_rate * DT,)
    assert not s1.safe_hold  # effector-only tick is a normal hold of motion
    near = step(piper, s0, GripperTarget(0.004), DT)
    assert near.effector == (0.004,)


def test_hand_channels_slew(flexiv):
    s0 = initial_state(flexiv)
    target = HandTarget((1.0, 0.5, 0.01, 0.01, 0.01, 0.01))
    s1 = step(flexiv, s0, target, DT)
    rate_step = flexiv.effector_rate * DT
    assert s1.effector[0] == rate_step
    assert s1.effector[2] == 0.01
    assert s1.effector[2:] == (0.01,) * 4


def test_effector_kind_mismatch(piper, flexiv):
    with pytest.raises(ValueError, match="effector"):
        step(piper, initial_state(piper), HandTarget((0.0,) * 6), DT)
    with pytest.raises(ValueError, match="effector"):
        step(flexiv, initial_state(flexiv), GripperTarget(0.5), DT)


def test_wrong_dof_command(piper):
    with pytest.raises(ValueError, match="joint"):
        step(piper, initial_state(piper), JointTarget((0.0,) * 7), DT)


# ---- combined stepping and determinism ----


def test_step_all_motion_plus_effector(piper):
    s0 = initial_state(piper)
    target = tuple(j + 0.01 for j in s0.joints)
    s1 = step_all(piper, s0, (JointTarget(target), GripperTarget(1.0)), DT)
    assert s1.joints == target
    assert s1.effector == (piper.effector_rate * DT,)
    assert s1.tick == 1


def test_step_all_rejects_two_motion_commands(piper):
    s0 = initial_state(piper)
    with pytest.raises(ValueError, match="motion"):
        step_all(piper, s0, (JointTarget(s0.joints), JointTarget(s0.joints)), DT)


def test_determinism_bit_identical(piper):
    def run():
        rng = np.random.default_rng(89)
        s = initial_state(piper)
        states = []
        for i in range(200):
            target = tuple(
                (j + float(d)) for j, d in zip(s.joints, rng.uniform(-0.02, 0.02, 6))
            )
            cmds = [JointTarget(target)]
            if i % 7 == 0:
                cmds.append(GripperTarget(float(rng.uniform(0, 1))))
            s = step_all(piper, s, tuple(cmds), DT)
            states.append((s.joints, s.velocities, s.effector, s.ee_pose, s.sim_time))
        return states

    assert run() == run()


def test_ee_pose_invariant_under_random_commands(flexiv):
    rng = np.random.default_rng(97)
    s = initial_state(flexiv)
    for _ in range(50):
        target = tuple(
            (j + float(d)) for j, d in zip(s.joints, rng.uniform(-0.02, 0.02, 7))
        )
        s = step(flexiv, s, JointTarget(target), DT)
        assert s.ee_pose == forward_kinematics(flexiv.chain, s.joints)


def test_dt_validation(piper):
    s = initial_state(piper)
    with pytest.raises(ValueError):
        step(piper, s, None, 0.0)
    with pytest.raises(ValueError):
        step(piper, s, None, -0.01)
