"""Controller tests: clutching, temporal/spatial decoupling, wrist mapping.

Oracles: the clutch law is checked against literal arithmetic on the inputs,
the wrist mapping against algebraic cancellation cases, and the Euler wrist
joints against recomposition.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from glteleop.commands import CartesianTarget, GripperTarget, JointTarget
from glteleop.controller import (
    MIRROR_GATE,
    ClutchAnchor,
    ControllerConfig,
    ImuCalibration,
    ImuPair,
    ScalingFactors,
    TeleopMode,
    TemporalInputs,
    config_from_dict,
    engage_local,
    initial_temporal_state,
    load_controller_config,
    local_target,
    mirror_update,
    spatial_step,
    temporal_step,
    wrist_rotation,
)
from glteleop.hand import HandTarget
from glteleop.kinematics import Pose, forward_kinematics
from glteleop.models import load_model
from glteleop.rotation import (
    XYZ,
    compose,
    compose_euler,
    EulerTriple,
    from_axis_angle,
    identity,
    quat_distance,
    quat_to_matrix,
    rot_y,
    to_axis_angle,
)

DT = 0.01


def default_config(**overrides) -> ControllerConfig:
    doc = {"alpha_l": 0.5, "alpha_r": 0.5}
    doc.update(overrides)
    return config_from_dict(doc)


def pose(p, q=None) -> Pose:
    return Pose(position=tuple(p), orientation=q if q is not None else identity())


# ---- scaling factors ----


def test_scaling_factor_bounds():
    ScalingFactors(1.0, 1.0)
    ScalingFactors(0.001, 0.5)
    for bad in (0.0, -0.5, 1.0001, float("nan")):
        with pytest.raises(ValueError):
            ScalingFactors(bad, 0.5)
        with pytest.raises(ValueError):
            ScalingFactors(0.5, bad)


# ---- clutch law ----


def test_engage_copies_fields():
    haptic = pose((0.1, 0.0, 0.0), from_axis_angle((0.0, 0.0, 1.0), 0.4))
    slave_ee = pose((0.3, 0.2, 0.5), from_axis_angle((1.0, 0.0, 0.0), 0.2))
    anchor = engage_local(haptic, slave_ee)
    assert anchor.p0 == (0.1, 0.0, 0.0)
    assert anchor.q0 == haptic.orientation
    assert anchor.ee_anchor == slave_ee


def test_zero_displacement_returns_anchor_exactly():
    haptic = pose((0.07, -0.02, 0.11), from_axis_angle((0.6, -0.8, 0.0), 0.9))
    slave_ee = pose((0.31, 0.22, 0.53), from_axis_angle((0.0, 0.6, 0.8), 1.1))
    anchor = engage_local(haptic, slave_ee)
    cmd = local_target(anchor, haptic, ScalingFactors(0.5, 0.5))
    assert cmd.pose.position == slave_ee.position
    assert cmd.pose.orientation == slave_ee.orientation


def test_position_offset_is_scaled_difference():
    anchor = engage_local(pose((0.1, 0.2, 0.3)), pose((1.0, 1.0, 1.0)))
    moved = pose((0.2, 0.2, 0.3))
    cmd = local_target(anchor, moved, ScalingFactors(0.5, 0.5))
    assert cmd.pose.position == (1.0 + 0.5 * (0.2 - 0.1), 1.0, 1.0)


def test_rotation_scaling_example():
    # Stylus rotated 90 deg about its z since engage, alpha_r = 1/3:
    # commanded orientation is the anchor composed with Rot(z, 30 deg).
    q0 = from_axis_angle((1.0, 0.0, 0.0), 0.75)
    anchor = engage_local(pose((0.0, 0.0, 0.0), q0), pose((0.4, 0.0, 0.6)))
    q_now = compose(q0, from_axis_angle((0.0, 0.0, 1.0), math.pi / 2))
    cmd = local_target(anchor, pose((0.0, 0.0, 0.0), q_now), ScalingFactors(1.0, 1 / 3))
    want = compose(identity(), from_axis_angle((0.0, 0.0, 1.0), math.pi / 6))
    assert quat_distance(cmd.pose.orientation, want) < 1e-12


def test_full_scale_passthrough():
    anchor = engage_local(pose((0.0, 0.1, 0.0)), pose((0.5, 0.5, 0.5)))
    cmd = local_target(anchor, pose((0.2, 0.1, -0.3)), ScalingFactors(1.0, 1.0))
    assert cmd.pose.position == (0.5 + 0.2, 0.5, 0.5 + -0.3 - 0.0)


def test_commanded_axis_independent_of_alpha():
    from glteleop.rotation import inverse

    q0 = from_axis_angle((0.0, 1.0, 0.0), 0.3)
    q = compose(q0, from_axis_angle((0.6, 0.0, 0.8), 1.4))
    anchor = engage_local(pose((0, 0, 0), q0), pose((0, 0, 0)))
    recovered = []
    for alpha_r in (0.25, 0.5, 1.0):
        cmd = local_target(anchor, pose((0, 0, 0), q), ScalingFactors(1.0, alpha_r))
        rel = compose(inverse(anchor.ee_anchor.orientation), cmd.pose.orientation)
        recovered.append(to_axis_angle(rel))
    for aa in recovered:
        assert np.allclose(aa.axis, (0.6, 0.0, 0.8), atol=1e-12)
    base = recovered[0].angle
    assert recovered[1].angle == pytest.approx(2 * base, abs=1e-12)
    assert recovered[2].angle == pytest.approx(4 * base, abs=1e-12)
    assert recovered[2].angle == pytest.approx(1.4, abs=1e-12)


def test_clutch_relativity_bitwise():
    # Dyadic-rational trajectories: the offset cancels exactly in floats.
    scale = ScalingFactors(0.75, 0.5)
    ee = pose((0.25, -0.5, 0.125))
    quantum = 2.0**-20
    rng = np.random.default_rng(101)
    for _ in range(50):
        p0 = tuple((rng.integers(-(2**20), 2**20) * quantum) for _ in range(3))
        deltas = [
            tuple((rng.integers(-(2**18), 2**18) * quantum) for _ in range(3))
            for _ in range(5)
        ]
        offset = tuple((rng.integers(-(2**20), 2**20) * quantum) for _ in range(3))
        base_anchor = engage_local(pose(p0), ee)
        moved_anchor = engage_local(
            pose(tuple(a + b for a, b in zip(p0, offset))), ee
        )
        for d in deltas:
            p = tuple(a + b for a, b in zip(p0, d))
            p_off = tuple(a + b for a, b in zip(p, offset))
            got = local_target(base_anchor, pose(p), scale)
            got_off = local_target(moved_anchor, pose(p_off), scale)
            assert got.pose.position == got_off.pose.position


# ---- mirror ----


def test_mirror_fixed_point():
    j = (0.1, 0.2, 0.3)
    assert mirror_update(j, j, 1.0, 0.1) == j


def test_mirror_clamp_arithmetic():
    got = mirror_update((0.0,), (0.5,), 1.0, 0.1)
    assert got == (0.1,)


def test_mirror_converges_in_five_steps():
    replica, slave = (0.0,), (0.5,)
    for _ in range(5):
        replica = mirror_update(replica, slave, 1.0, 0.1)
    assert replica == slave  # exact snap on the last step


# ---- temporal state machine ----


@pytest.fixture(scope="module")
def piper():
    return load_model("piper6")


def make_slave(piper):
    joints = piper.home
    return joints, forward_kinematics(piper.chain, joints)


def run_tick(cfg, piper, state, inputs, slave_joints, slave_ee):
    return temporal_step(cfg, piper.chain, state, inputs, slave_joints, slave_ee, DT)


def test_global_passthrough(piper):
    cfg = default_config()
    joints, ee = make_slave(piper)
    state = initial_temporal_state()
    r = run_tick(cfg, piper, state, TemporalInputs(replica=joints), joints, ee)
    assert r.motion == JointTarget(joints)
    assert r.state.mode == TeleopMode.GLOBAL
    # No new reading: the held reading is re-emitted.
    r2 = run_tick(cfg, piper, r.state, TemporalInputs(), joints, ee)
    assert r2.motion == JointTarget(joints)


def test_no_command_before_any_reading(piper):
    cfg = default_config()
    joints, ee = make_slave(piper)
    r = run_tick(cfg, piper, initial_temporal_state(), TemporalInputs(), joints, ee)
    assert r.motion is None


def test_replica_reading_clamped_to_limits(piper):
    cfg = default_config()
    joints, ee = make_slave(piper)
    wild = tuple(hi + 1.0 for _, hi in piper.chain.joint_limits)
    r = run_tick(cfg, piper, initial_temporal_state(), TemporalInputs(replica=wild), joints, ee)
    assert r.motion.joints == tuple(hi for _, hi in piper.chain.joint_limits)
    assert any("clamp" in e for e in r.events)


def test_local_denied_without_haptic(piper):
    cfg = default_config()
    joints, ee = make_slave(piper)
    state = initial_temporal_state()
    r = run_tick(
        cfg,
        piper,
        state,
        TemporalInputs(replica=joints, request_mode=TeleopMode.LOCAL),
        joints,
        ee,
    )
    assert r.state.mode == TeleopMode.GLOBAL
    assert any("denied" in e for e in r.events)


def engage_sequence(cfg, piper):
    """Run Global tick with matching replica + haptic, then request Local."""
    joints, ee = make_slave(piper)
    state = initial_temporal_state()
    haptic = pose((0.02, -0.01, 0.05), from_axis_angle((0, 0, 1), 0.3))
    r = run_tick(
        cfg, piper, state, TemporalInputs(replica=joints, haptic=haptic), joints, ee
    )
    r = run_tick(
        cfg, piper, r.state, TemporalInputs(request_mode=TeleopMode.LOCAL), joints, ee
    )
    return r, joints, ee, haptic


def test_engage_commands_current_ee_pose(piper):
    cfg = default_config()
    r, joints, ee, haptic = engage_sequence(cfg, piper)
    assert r.state.mode == TeleopMode.LOCAL
    assert any("engaged" in e for e in r.events)
    assert isinstance(r.motion, CartesianTarget)
    assert r.motion.pose.position == ee.position
    assert r.motion.pose.orientation == ee.orientation


def test_local_follows_clutch_law(piper):
    cfg = default_config()
    r, joints, ee, haptic = engage_sequence(cfg, piper)
    moved = pose(
        (haptic.position[0] + 0.04, haptic.position[1], haptic.position[2]),
        haptic.orientation,
    )
    r2 = run_tick(cfg, piper, r.state, TemporalInputs(haptic=moved), joints, ee)
    anchor = r.state.anchor
    want = local_target(anchor, moved, ScalingFactors(0.5, 0.5))
    assert r2.motion == want


def test_replica_input_ignored_during_local(piper):
    cfg = default_config()
    r, joints, ee, _ = engage_sequence(cfg, piper)
    r2 = run_tick(
        cfg, piper, r.state, TemporalInputs(replica=(0.0,) * 6), joints, ee
    )
    assert isinstance(r2.motion, CartesianTarget)
    assert any("ignored" in e for e in r2.events)


def test_mirror_tracks_slave_during_local(piper):
    cfg = default_config()
    r, joints, ee, _ = engage_sequence(cfg, piper)
    # Pretend the slave moved; the replica must walk toward it.
    moved = tuple(j + 0.05 for j in joints)
    state = r.state
    for _ in range(10):
        res = run_tick(cfg, piper, state, TemporalInputs(), moved, ee)
        state = res.state
    assert state.replica == moved


def test_handover_defers_until_mirror_converges(piper):
    cfg = default_config()
    r, joints, ee, haptic = engage_sequence(cfg, piper)
    # Slave drifted 0.2 rad on joint 0 during Local; replica lags behind.
    drifted = (joints[0] + 0.2,) + joints[1:]
    state = r.state
    res = run_tick(
        cfg, piper, state, TemporalInputs(request_mode=TeleopMode.GLOBAL), drifted, ee
    )
    assert res.state.pending
    assert any("pending" in e for e in res.events)
    frozen = res.motion
    assert isinstance(frozen, CartesianTarget)
    granted_tick = None
    for tick in range(100):
        stylus_noise = pose((0.5, 0.5, 0.5))  # ignored while pending
        res = run_tick(
            cfg, piper, res.state, TemporalInputs(haptic=stylus_noise), drifted, ee
        )
        if not res.state.pending:
            granted_tick = tick
            break
        assert res.motion == frozen  # target frozen while pending
        assert res.mirror_gap >= MIRROR_GATE
    assert granted_tick is not None
    assert res.state.mode == TeleopMode.GLOBAL
    assert any("granted" in e for e in res.events)
    # The first Global command is exactly the slave joints (mirror snapped).
    assert res.motion == JointTarget(drifted)
    assert res.state.replica == drifted


def test_grant_waits_for_slave_to_settle(piper):
    cfg = default_config()
    r, joints, ee, haptic = engage_sequence(cfg, piper)
    # Mirror gap already under the gate, but the slave moved this tick.
    moving = (joints[0] + 5e-4,) + joints[1:]
    res = run_tick(
        cfg, piper, r.state, TemporalInputs(request_mode=TeleopMode.GLOBAL), moving, ee
    )
    assert res.state.pending  # joints changed since last tick: not settled
    res = run_tick(cfg, piper, res.state, TemporalInputs(), moving, ee)
    assert not res.state.pending  # same joints two ticks running: settled
    assert res.motion == JointTarget(moving)


def test_instant_grant_when_already_converged(piper):
    cfg = default_config()
    r, joints, ee, _ = engage_sequence(cfg, piper)
    res = run_tick(
        cfg, piper, r.state, TemporalInputs(request_mode=TeleopMode.GLOBAL), joints, ee
    )
    assert not res.state.pending
    assert res.state.mode == TeleopMode.GLOBAL
    assert res.motion == JointTarget(joints)


def test_mode_requests_ignored_while_pending(piper):
    cfg = default_config()
    r, joints, ee, _ = engage_sequence(cfg, piper)
    drifted = (joints[0] + 0.5,) + joints[1:]
    res = run_tick(
        cfg, piper, r.state, TemporalInputs(request_mode=TeleopMode.GLOBAL), drifted, ee
    )
    assert res.state.pending
    res2 = run_tick(
        cfg, piper, res.state, TemporalInputs(request_mode=TeleopMode.LOCAL), drifted, ee
    )
    assert res2.state.pending
    assert any("ignored" in e for e in res2.events)


def test_gripper_passthrough(piper):
    cfg = default_config()
    joints, ee = make_slave(piper)
    r = run_tick(
        cfg,
        piper,
        initial_temporal_state(),
        TemporalInputs(replica=joints, gripper=0.7),
        joints,
        ee,
    )
    assert r.effector == GripperTarget(0.7)


# ---- wrist mapping ----


def random_rotation(rng) -> np.ndarray:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return quat_to_matrix(from_axis_angle(tuple(v.tolist()), float(rng.uniform(0, math.pi))))


def test_wrist_home_is_identity():
    rng = np.random.default_rng(103)
    r1, r2 = random_rotation(rng), random_rotation(rng)
    calib = ImuCalibration(r1, r2)
    rs = wrist_rotation(calib, ImuPair(r1, r2))
    assert np.max(np.abs(rs - np.eye(3))) < 1e-12


def test_wrist_body_frame_injection():
    rng = np.random.default_rng(107)
    for _ in range(100):
        r1 = random_rotation(rng)
        r2 = random_rotation(rng)
        s = random_rotation(rng)
        calib = ImuCalibration(r1, r2)
        rs = wrist_rotation(calib, ImuPair(r1, r2 @ s))
        assert np.max(np.abs(rs - s)) < 1e-12


def test_wrist_world_rotation_invariance():
    rng = np.random.default_rng(109)
    for _ in range(100):
        r1h, r2h = random_rotation(rng), random_rotation(rng)
        r1, r2 = random_rotation(rng), random_rotation(rng)
        q = random_rotation(rng)
        base = wrist_rotation(ImuCalibration(r1h, r2h), ImuPair(r1, r2))
        moved = wrist_rotation(
            ImuCalibration(q @ r1h, q @ r2h), ImuPair(q @ r1, q @ r2)
        )
        assert np.max(np.abs(base - moved)) < 1e-12


# ---- spatial step ----


@pytest.fixture(scope="module")
def flexiv():
    return load_model("flexiv7")


def identity_calib():
    return ImuCalibration(np.eye(3), np.eye(3))


def test_spatial_identity_wrist(flexiv):
    target, hand, events = spatial_step(
        (0.1, 0.2, 0.3, 0.4),
        identity_calib(),
        ImuPair(np.eye(3), np.eye(3)),
        None,
        flexiv.chain,
        XYZ,
    )
    assert target.joints == (0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0)
    assert hand is None


def test_spatial_single_axis(flexiv):
    rs = quat_to_matrix(from_axis_angle((1.0, 0.0, 0.0), 0.3))
    target, _, _ = spatial_step(
        (0.0, 0.0, 0.0, 0.0),
        identity_calib(),
        ImuPair(np.eye(3), rs),
        None,
        flexiv.chain,
        XYZ,
    )
    wrist = target.joints[4:]
    assert wrist[0] == pytest.approx(0.3, abs=1e-12)
    assert wrist[1] == pytest.approx(0.0, abs=1e-12)
    assert wrist[2] == pytest.approx(0.0, abs=1e-12)


def test_spatial_gimbal_branch(flexiv):
    rs = quat_to_matrix(from_axis_angle((0.0, 1.0, 0.0), math.pi / 2))
    target, _, events = spatial_step(
        (0.0, 0.0, 0.0, 0.0),
        identity_calib(),
        ImuPair(np.eye(3), rs),
        None,
        flexiv.chain,
        XYZ,
    )
    a, b, c = target.joints[4:]
    # pi/2 exceeds the 1.48 rad wrist pitch limit, so b is clamped and logged.
    assert b == flexiv.chain.joint_limits[5][1]
    assert c == 0.0
    assert any("clamp" in e for e in events)


def test_spatial_recomposition_within_limits(flexiv):
    rng = np.random.default_rng(113)
    for _ in range(200):
        a = float(rng.uniform(-1.3, 1.3))
        b = float(rng.uniform(-1.3, 1.3))
        c = float(rng.uniform(-1.3, 1.3))
        rs = compose_euler(EulerTriple(a, b, c, XYZ))
        target, _, events = spatial_step(
            (0.0, 0.0, 0.0, 0.0),
            identity_calib(),
            ImuPair(np.eye(3), rs),
            None,
            flexiv.chain,
            XYZ,
        )
        wrist = target.joints[4:]
        got = compose_euler(EulerTriple(wrist[0], wrist[1], wrist[2], XYZ))
        assert np.max(np.abs(got - rs)) < 1e-9
        assert not any("clamp" in e for e in events)


def test_spatial_hand_passthrough(flexiv):
    hand = HandTarget((0.1, 0.2, 0.3, 0.3, 0.3, 0.3))
    target, hand_out, _ = spatial_step(
        (0.0, 0.0, 0.0, 0.0),
        identity_calib(),
        ImuPair(np.eye(3), np.eye(3)),
        hand,
        flexiv.chain,
        XYZ,
    )
    assert hand_out == hand


def test_spatial_replica_length_mismatch(flexiv):
    with pytest.raises(ValueError, match="replica"):
        spatial_step(
            (0.0, 0.0, 0.0),
            identity_calib(),
            ImuPair(np.eye(3), np.eye(3)),
            None,
            flexiv.chain,
            XYZ,
        )


def test_imu_types_validate_rotations():
    bad = np.eye(3) * 2.0
    with pytest.raises(ValueError):
        ImuCalibration(bad, np.eye(3))
    with pytest.raises(ValueError):
        ImuPair(np.eye(3), bad)


# ---- config ----


def test_config_defaults_and_overrides():
    cfg = config_from_dict({"alpha_l": 0.3, "alpha_r": 0.9})
    assert cfg.scale.alpha_l == 0.3
    assert cfg.scale.alpha_r == 0.9
    assert cfg.control_rate_hz == 100
    assert cfg.dt == 0.01
    assert cfg.mirror_velocity_limit > 0


def test_config_rejects_gate_starvation():
    # Mirror slew per tick must cover the convergence gate, or the final
    # snap could never land exactly on the slave.
    with pytest.raises(ValueError, match="mirror"):
        config_from_dict({"alpha_l": 0.5, "alpha_r": 0.5, "mirror_velocity_limit": 0.05})


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "controller.yaml"
    path.write_text(
        "alpha_l: 0.25\nalpha_r: 0.75\nmirror_velocity_limit: 1.5\ncontrol_rate_hz: 50\n"
    )
    cfg = load_controller_config(path)
    assert cfg.scale == ScalingFactors(0.25, 0.75)
    assert cfg.mirror_velocity_limit == 1.5
    assert cfg.dt == 0.02


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        config_from_dict({"alpha_l": 0.5, "alpha_r": 0.5, "alpha_q": 1.0})
