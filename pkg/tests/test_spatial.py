import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lagrangian_torques, newton_euler_oracle, potential_energy, random_chain
from wrenchmpc.spatial import (ArmState, Frame, Joint, Link, Pose, RobotModel, Wrench, base_wrench_batch,
                               chain_frames, default_model, forward_kinematics, load_model, matrix_to_rpy,
                               model_from_dict, model_to_dict, reexpress_wrench, rnea_base_wrench,
                               rnea_joint_torques, rnea_mount_wrench, rpy_to_matrix, rpy_to_matrix_derivatives)

angles = st.floats(-3.0, 3.0, allow_nan=False)
coords = st.floats(-2.0, 2.0, allow_nan=False)
vec3 = st.tuples(coords, coords, coords)
rpy3 = st.tuples(angles, st.floats(-1.5, 1.5), angles)


def single_link(mass=2.0, d=0.3, axis=(0, 1, 0)):
    link = Link("l", mass, (d, 0.0, 0.0), np.diag([0.01, 0.02, 0.02]))
    joint = Joint("j", axis, Pose(), -np.pi, np.pi)
    return RobotModel((link,), (joint,))


def rod_arm(length=0.5, mount=(0.0, 0.0, 0.0)):
    link = Link("rod", 1.0, (length / 2, 0, 0), np.diag([1e-3, 0.02, 0.02]))
    joint = Joint("yaw", (0, 0, 1), Pose(), -np.pi, np.pi)
    return RobotModel((link,), (joint,), mount=Pose(mount), ee_offset=(length, 0, 0))


# -- rotations and poses ------------------------------------------------------

@given(rpy3)
def test_rpy_matrix_matches_extrinsic_xyz(rpy):
    R = rpy_to_matrix(np.array(rpy))
    Rx = rpy_to_matrix(np.array([rpy[0], 0, 0]))
    Ry = rpy_to_matrix(np.array([0, rpy[1], 0]))
    Rz = rpy_to_matrix(np.array([0, 0, rpy[2]]))
    np.testing.assert_allclose(R, Rz @ Ry @ Rx, atol=1e-14)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(rpy_to_matrix(matrix_to_rpy(R)), R, atol=1e-12)


def test_rpy_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rpy = rng.uniform(-1.2, 1.2, 3)
        R, dR = rpy_to_matrix_derivatives(rpy)
        np.testing.assert_allclose(R, rpy_to_matrix(rpy), atol=1e-15)
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-6
            fd = (rpy_to_matrix(rpy + e) - rpy_to_matrix(rpy - e)) / 2e-6
            np.testing.assert_allclose(dR[k], fd, atol=1e-9)


@given(vec3, rpy3)
def test_pose_quaternion_is_unit(p, rpy):
    pose = Pose.from_rpy(p, rpy)
    assert abs(np.linalg.norm(pose.quaternion) - 1.0) < 1e-9
    np.testing.assert_allclose(pose.rotation, rpy_to_matrix(np.array(rpy)), atol=1e-12)


@given(vec3, rpy3, vec3, rpy3, vec3, rpy3)
@settings(max_examples=50)
def test_pose_composition_is_associative(p1, r1, p2, r2, p3, r3):
    a, b, c = Pose.from_rpy(p1, r1), Pose.from_rpy(p2, r2), Pose.from_rpy(p3, r3)
    left = a.compose(b).compose(c)
    right = a.compose(b.compose(c))
    np.testing.assert_allclose(left.position, right.position, atol=1e-12)
    np.testing.assert_allclose(left.rotation, right.rotation, atol=1e-12)


@given(vec3, rpy3, vec3)
def test_pose_inverse(p, rpy, x):
    pose = Pose.from_rpy(p, rpy)
    ident = pose.compose(pose.inverse())
    np.testing.assert_allclose(ident.position, 0, atol=1e-12)
    np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(pose.inverse().transform_point(pose.transform_point(x)), x, atol=1e-12)


def test_pose_rejects_bad_input():
    with pytest.raises(ValueError):
        Pose((0, 0, np.nan))
    with pytest.raises(ValueError):
        Pose((0, 0, 0), (0, 0, 0, 0))


# -- wrenches -----------------------------------------------------------------

def test_reexpress_identity_is_noop():
    w = Wrench((1, 2, 3), (4, 5, 6), Frame.WORLD)
    out = reexpress_wrench(w, Pose(), Pose(), frame=Frame.WORLD)
    np.testing.assert_array_equal(out.as_vector(), w.as_vector())


def test_reexpress_yaw_quarter_turn():
    w = Wrench((1, 0, 0), (0, 0, 0), Frame.WORLD)
    out = reexpress_wrench(w, Pose(), Pose.from_rpy((0, 0, 0), (0, 0, np.pi / 2)))
    np.testing.assert_allclose(out.force, (0, -1, 0), atol=1e-15)
    assert out.frame == Frame.BASE


def test_reexpress_translation_moment_shift():
    f = np.array([1.0, -2.0, 0.5])
    d = np.array([0.3, 0.1, -0.4])
    out = reexpress_wrench(Wrench(f, (0, 0, 0), Frame.WORLD), Pose(), Pose(d))
    np.testing.assert_allclose(out.torque, -np.cross(d, f), atol=1e-15)
    np.testing.assert_allclose(out.force, f)


@given(vec3, rpy3, vec3, vec3, vec3)
@settings(max_examples=80)
def test_reexpress_round_trip(p, rpy, f, m, app):
    base = Pose.from_rpy(p, rpy)
    world = Pose()
    w = Wrench(f, m, Frame.WORLD)
    back = reexpress_wrench(reexpress_wrench(w, world, base), base, world)
    assert back.frame == Frame.WORLD
    np.testing.assert_allclose(back.as_vector(), w.as_vector(), atol=1e-12)
    # off-origin application point: the physical wrench is preserved
    w2 = Wrench(f, m, Frame.WORLD, app)
    back2 = reexpress_wrench(reexpress_wrench(w2, world, base), base, world)
    np.testing.assert_allclose(back2.force, w2.force, atol=1e-12)
    np.testing.assert_allclose(back2.moment_about(app), w2.torque, atol=1e-12)


def test_wrench_requires_frame():
    with pytest.raises(ValueError):
        Wrench((0, 0, 0), (0, 0, 0), None)


# -- model --------------------------------------------------------------------

def test_model_validation():
    with pytest.raises(ValueError):
        Link("l", -1.0, (0, 0, 0), np.eye(3))
    with pytest.raises(ValueError):
        Link("l", 1.0, (0, 0, 0), np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(ValueError):
        Link("l", 1.0, (0, 0, 0), np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        Joint("j", (0, 0, 1), Pose(), 1.0, 0.5)
    with pytest.raises(ValueError):
        Joint("j", (0, 0, 0), Pose(), -1.0, 1.0)


def test_model_json_round_trip(tmp_path):
    m = default_model()
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model_to_dict(m)))
    m2 = load_model(path)
    rng = np.random.default_rng(1)
    q, dq, ddq = (rng.normal(size=m.n_joints) for _ in range(3))
    np.testing.assert_allclose(base_wrench_batch(m2, np.eye(3), q, dq, ddq),
                               base_wrench_batch(m, np.eye(3), q, dq, ddq), atol=1e-12)
    np.testing.assert_array_equal(m2.nominal, m.nominal)


def test_model_rejects_wrong_units():
    d = model_to_dict(default_model())
    d["units"]["length"] = "mm"
    with pytest.raises(ValueError):
        model_from_dict(d)


# -- kinematics ---------------------------------------------------------------

def test_fk_single_link():
    m = rod_arm(0.5, mount=(0.1, 0.0, 0.2))
    np.testing.assert_allclose(forward_kinematics(m, Pose(), [0.0]).position, (0.6, 0.0, 0.2), atol=1e-15)
    np.testing.assert_allclose(forward_kinematics(m, Pose(), [np.pi / 2]).position, (0.1, 0.5, 0.2), atol=1e-15)


def test_fk_base_yaw_composition():
    rng = np.random.default_rng(2)
    m = random_chain(rng, 3)
    q = rng.uniform(-1, 1, 3)
    yaw = Pose.from_rpy((0, 0, 0), (0, 0, np.pi / 2))
    ee_id = forward_kinematics(m, Pose(), q)
    ee_yaw = forward_kinematics(m, yaw, q)
    np.testing.assert_allclose(ee_yaw.position, yaw.rotation @ ee_id.position, atol=1e-12)
    np.testing.assert_allclose(ee_yaw.rotation, yaw.rotation @ ee_id.rotation, atol=1e-12)


def test_fk_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        forward_kinematics(default_model(), Pose(), [0.0, 0.0])


def test_ee_jacobian_matches_finite_differences():
    m = default_model()
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = rng.uniform(m.lower, m.upper)
        J = chain_frames(m, q).ee_jacobian()
        fd = np.column_stack([(chain_frames(m, q + e).ee - chain_frames(m, q - e).ee) / 2e-6
                              for e in np.eye(m.n_joints) * 1e-6])
        np.testing.assert_allclose(J, fd, atol=1e-8)


# -- inverse dynamics ---------------------------------------------------------

def test_static_single_link_base_wrench():
    m = single_link()
    w = rnea_base_wrench(m, Pose(), ArmState.at_rest([0.0]))
    assert w.frame == Frame.BASE
    assert w.force[2] == -19.62
    np.testing.assert_array_equal(w.force[:2], 0.0)
    assert abs(w.torque[1]) == pytest.approx(5.886, abs=1e-12)
    # weight at +x pulls the base nose down: positive moment about +y
    assert w.torque[1] > 0


def test_static_single_link_joint_torque():
    # -y axis so that holding the link up needs a positive torque
    m = single_link(axis=(0, -1, 0))
    tau = rnea_joint_torques(m, Pose(), ArmState.at_rest([0.0]))
    assert tau[0] == pytest.approx(5.886, abs=1e-12)


def test_massless_arm_gives_zero_wrench():
    rng = np.random.default_rng(4)
    m = random_chain(rng, 4, zero_mass=True)
    arm = ArmState(rng.normal(size=4), rng.normal(size=4), rng.normal(size=4))
    np.testing.assert_array_equal(rnea_base_wrench(m, Pose(), arm).as_vector(), 0.0)
    np.testing.assert_array_equal(rnea_joint_torques(m, Pose(), arm), 0.0)


def test_rnea_matches_newton_euler_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        m = random_chain(rng, n)
        base = Pose.from_rpy(rng.normal(size=3), rng.uniform(-0.5, 0.5, 3))
        arm = ArmState(rng.uniform(-2, 2, n), rng.normal(size=n) * 2, rng.normal(size=n) * 3)
        tau_ref, w_ref = newton_euler_oracle(m, base.rotation, arm.q, arm.dq, arm.ddq)
        np.testing.assert_allclose(rnea_base_wrench(m, base, arm).as_vector(), w_ref, rtol=0, atol=1e-8)
        np.testing.assert_allclose(rnea_joint_torques(m, base, arm), tau_ref, rtol=0, atol=1e-8)


def test_rnea_matches_lagrangian():
    rng = np.random.default_rng(6)
    for _ in range(5):
        n = int(rng.integers(2, 5))
        m = random_chain(rng, n)
        R = rpy_to_matrix(rng.uniform(-0.5, 0.5, 3))
        q, dq, ddq = rng.uniform(-2, 2, n), rng.normal(size=n), rng.normal(size=n)
        tau = rnea_joint_torques(m, Pose.from_matrix((0, 0, 0), R), ArmState(q, dq, ddq))
        np.testing.assert_allclose(tau, lagrangian_torques(m, R, q, dq, ddq), atol=1e-6)


def test_gravity_torques_are_potential_gradient():
    rng = np.random.default_rng(7)
    m = default_model()
    for _ in range(10):
        q = rng.uniform(m.lower, m.upper)
        R = rpy_to_matrix(rng.uniform(-0.3, 0.3, 3))
        tau = rnea_joint_torques(m, Pose.from_matrix((0, 0, 0), R), ArmState.at_rest(q))
        grad = np.array([(potential_energy(m, R, q + e) - potential_energy(m, R, q - e)) / 2e-6
                         for e in np.eye(m.n_joints) * 1e-6])
        np.testing.assert_allclose(tau, grad, atol=1e-5)


def test_static_force_equals_weight():
    rng = np.random.default_rng(8)
    m = default_model()
    for _ in range(10):
        base = Pose.from_rpy((0, 0, 0), rng.uniform(-0.4, 0.4, 3))
        w = rnea_base_wrench(m, base, ArmState.at_rest(rng.uniform(m.lower, m.upper)))
        np.testing.assert_allclose(w.force, m.total_mass * base.rotation.T @ m.gravity, atol=1e-10)


def test_static_wrench_linear_in_masses():
    m = default_model()
    q = m.nominal + 0.3
    f1 = np.array([1.0, 2.0, 0.5, 3.0])
    f2 = np.array([0.5, 0.1, 2.0, 1.0])
    R = rpy_to_matrix(np.array([0.1, -0.2, 0.3]))
    z = np.zeros(m.n_joints)

    def w(f):
        return base_wrench_batch(m.scaled_masses(f), R, q, z, z)
    np.testing.assert_allclose(w(2 * f1 + 3 * f2), 2 * w(f1) + 3 * w(f2), atol=1e-10)


def test_mount_wrench_is_same_physical_wrench():
    m = default_model()
    arm = ArmState(m.nominal, np.ones(4), -np.ones(4))
    wb = rnea_base_wrench(m, Pose(), arm)
    wm = rnea_mount_wrench(m, Pose(), arm)
    np.testing.assert_allclose(wm.force, wb.force)
    np.testing.assert_allclose(wm.moment_about(np.zeros(3)), wb.torque, atol=1e-12)


def test_rnea_rejects_bad_state():
    m = default_model()
    with pytest.raises(ValueError):
        rnea_base_wrench(m, Pose(), ArmState(np.zeros(3), np.zeros(3), np.zeros(3)))
    with pytest.raises(ValueError):
        ArmState(np.array([0, 0, 0, np.nan]), np.zeros(4), np.zeros(4))


def test_batched_rnea_matches_loop():
    m = default_model()
    rng = np.random.default_rng(9)
    R = rpy_to_matrix(rng.uniform(-0.3, 0.3, (7, 3)))
    q, dq, ddq = (rng.normal(size=(7, 4)) for _ in range(3))
    batch = base_wrench_batch(m, R, q, dq, ddq)
    for k in range(7):
        np.testing.assert_allclose(batch[k], base_wrench_batch(m, R[k], q[k], dq[k], ddq[k]), atol=1e-13)
