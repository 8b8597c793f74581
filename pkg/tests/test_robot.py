"""Robot model: kinematics, Jacobian, reach, collisions, persistence."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bpopt.robot import (Box, Capsule, JointSpec, RobotModel, Sphere,
                         collision_free, forward_kinematics,
                         geometric_jacobian, link_frames, load_robot,
                         max_reach, point_obstacle_distance,
                         primitive_distance, reference_robot, robot_from_dict,
                         robot_to_dict, save_robot, transform_capsule,
                         world_capsules)
from bpopt.se3 import Pose, random_rotation, rotz


def _simple_joint(offset_z=0.5, axis=(0, 0, 1)):
    return JointSpec(offset=Pose(np.eye(3), (0, 0, offset_z)), axis=axis,
                     q_min=-math.pi, q_max=math.pi, v_max=1.0, a_max=2.0)


def test_joint_spec_validation():
    with pytest.raises(ValueError):
        _simple_joint(axis=(0, 0, 2))  # not unit
    with pytest.raises(ValueError):
        JointSpec(Pose.identity(), (0, 0, 1), 1.0, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        JointSpec(Pose.identity(), (0, 0, 1), -1.0, 1.0, 0.0, 1.0)


def test_capsule_box_sphere_validation():
    with pytest.raises(ValueError):
        Capsule((0, 0, 0), (0, 0, 1), radius=0.0)
    with pytest.raises(ValueError):
        Box(Pose.identity(), (0.1, -0.1, 0.1))
    with pytest.raises(ValueError):
        Sphere((0, 0, 0), 0.0)


def test_robot_model_validation():
    with pytest.raises(ValueError):
        RobotModel([], Pose.identity())
    with pytest.raises(ValueError):
        RobotModel([_simple_joint()], Pose.identity(),
                   capsules=[Capsule((0, 0, 0), (0, 0, 1), 0.1, frame=5)])
    r = RobotModel([_simple_joint()], Pose.identity())
    with pytest.raises(ValueError):
        r.check_q([0.0, 0.0])


def test_reference_robot_shape():
    r = reference_robot()
    assert r.n == 6
    assert len(r.capsules) == 4
    assert max_reach(r) == pytest.approx(1.35)
    assert np.all(r.v_max == 3.0)
    assert np.all(r.a_max == 10.0)


def test_forward_kinematics_home():
    """At q = 0 every z-offset stacks straight up."""
    r = reference_robot()
    ee = forward_kinematics(r, np.zeros(6))
    assert_allclose(ee.translation, [0.0, 0.0, 1.35], atol=1e-12)
    assert_allclose(ee.rotation, np.eye(3), atol=1e-12)


def test_forward_kinematics_single_joint():
    """One z joint with a tool along x: a pure rotation of the tool tip."""
    r = RobotModel([_simple_joint(offset_z=0.0)],
                   Pose(np.eye(3), (1.0, 0.0, 0.0)))
    for ang in (0.0, 0.5, -1.2):
        ee = forward_kinematics(r, [ang])
        assert_allclose(ee.translation,
                        [math.cos(ang), math.sin(ang), 0.0], atol=1e-12)
        assert_allclose(ee.rotation, rotz(ang), atol=1e-12)


def test_link_frames_with_base():
    r = reference_robot()
    rng = np.random.default_rng(0)
    q = r.random_q(rng)
    base = Pose(rotz(0.3), (0.5, -0.2, 0.1))
    frames = link_frames(r, q, base)
    assert len(frames) == r.n + 1
    # moving the base rigidly transforms the end effector
    ee_local = forward_kinematics(r, q)
    ee_world = forward_kinematics(r, q, base)
    assert_allclose(ee_world.translation,
                    base.rotation @ ee_local.translation + base.translation,
                    atol=1e-12)
    assert_allclose(ee_world.rotation, base.rotation @ ee_local.rotation,
                    atol=1e-12)


def test_geometric_jacobian_vs_finite_differences():
    r = reference_robot()
    rng = np.random.default_rng(1)
    h = 1e-7
    for _ in range(10):
        q = r.random_q(rng) * 0.5
        jac = geometric_jacobian(r, q)
        for j in range(r.n):
            qp, qm = q.copy(), q.copy()
            qp[j] += h
            qm[j] -= h
            pp = forward_kinematics(r, qp)
            pm = forward_kinematics(r, qm)
            lin = (pp.translation - pm.translation) / (2 * h)
            assert_allclose(jac[:3, j], lin, atol=1e-5)
            dR = (pp.rotation - pm.rotation) / (2 * h) @ forward_kinematics(r, q).rotation.T
            ang = np.array([dR[2, 1], dR[0, 2], dR[1, 0]])
            assert_allclose(jac[3:, j], ang, atol=1e-5)


def test_max_reach_bounds_workspace():
    r = reference_robot()
    rng = np.random.default_rng(2)
    reach = max_reach(r)
    for _ in range(50):
        ee = forward_kinematics(r, r.random_q(rng))
        assert np.linalg.norm(ee.translation) <= reach + 1e-9


def test_robot_json_roundtrip(tmp_path):
    r = reference_robot()
    path = tmp_path / "robot.json"
    save_robot(r, path)
    r2 = load_robot(path)
    assert r2.n == r.n
    assert r2.name == r.name
    rng = np.random.default_rng(3)
    q = r.random_q(rng)
    assert forward_kinematics(r2, q).approx_equal(forward_kinematics(r, q))
    assert len(r2.capsules) == len(r.capsules)


def test_robot_from_dict_rejects_bad_schema():
    d = robot_to_dict(reference_robot())
    d["schema"] = 99
    with pytest.raises(ValueError):
        robot_from_dict(d)


def test_primitive_distance_sphere():
    cap = Capsule((0, 0, 0), (1, 0, 0), 0.1)
    assert primitive_distance(cap, Sphere((0.5, 1.0, 0.0), 0.2)) == \
        pytest.approx(1.0 - 0.2 - 0.1)


def test_primitive_distance_box():
    cap = Capsule((0, 0, 1.0), (1, 0, 1.0), 0.1)
    box = Box(Pose.identity(), (0.5, 0.5, 0.5))
    assert primitive_distance(cap, box) == pytest.approx(0.5 - 0.1, abs=1e-6)


def test_primitive_distance_capsule():
    a = Capsule((0, 0, 0), (1, 0, 0), 0.1)
    b = Capsule((0, 0, 1), (1, 0, 1), 0.2)
    assert primitive_distance(a, b) == pytest.approx(1.0 - 0.3)


def test_point_obstacle_distance():
    box = Box(Pose.identity(), (0.5, 0.5, 0.5))
    assert point_obstacle_distance((2.0, 0, 0), box) == pytest.approx(1.5)
    assert point_obstacle_distance((0, 0, 0), box) == pytest.approx(-0.5)
    sph = Sphere((0, 0, 0), 1.0)
    assert point_obstacle_distance((2.0, 0, 0), sph) == pytest.approx(1.0)


def test_collision_free_home_and_blocked():
    r = reference_robot()
    q = np.zeros(r.n)
    assert collision_free(r, Pose.identity(), q, [])
    blocked = [Sphere((0, 0, 0.7), 0.5)]
    assert not collision_free(r, Pose.identity(), q, blocked)
    far = [Sphere((5.0, 0, 0), 0.5)]
    assert collision_free(r, Pose.identity(), q, far)


def test_world_capsules_follow_base():
    r = reference_robot()
    q = np.zeros(r.n)
    base = Pose(rotz(1.0), (1.0, 2.0, 0.0))
    caps_home = world_capsules(r, Pose.identity(), q)
    caps_moved = world_capsules(r, base, q)
    for c0, c1 in zip(caps_home, caps_moved):
        assert_allclose(c1.p0, base.rotation @ c0.p0 + base.translation, atol=1e-12)
        assert_allclose(c1.p1, base.rotation @ c0.p1 + base.translation, atol=1e-12)


def test_transform_capsule():
    cap = Capsule((1, 0, 0), (2, 0, 0), 0.1, frame=2)
    moved = transform_capsule(cap, Pose(rotz(math.pi / 2), (0, 0, 1)))
    assert_allclose(moved.p0, [0, 1, 1], atol=1e-12)
    assert_allclose(moved.p1, [0, 2, 1], atol=1e-12)
    assert moved.frame == 2
