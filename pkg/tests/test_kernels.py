"""Numeric kernels: geometry queries, FK/IK and the compiled/pure-python
path agreement."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bpopt import kernels
from bpopt.robot import reference_robot
from bpopt.se3 import Pose, axis_angle_to_rotation, compose, random_rotation


def _random_args(name, rng):
    """Random but valid argument tuples for each kernel."""
    r = reference_robot()
    q = r.random_q(rng)
    base_R = random_rotation(rng)
    base_t = rng.uniform(-1, 1, 3)
    if name == "axis_rotation":
        a = rng.normal(size=3)
        return (a / np.linalg.norm(a), rng.uniform(-3, 3))
    if name == "fk_frames":
        return (r._off_R, r._off_t, r._axes, r._tool_R, r._tool_t,
                base_R, base_t, q)
    if name == "jacobian_from_frames":
        fr_R, fr_t = kernels.fk_frames(r._off_R, r._off_t, r._axes,
                                       r._tool_R, r._tool_t, base_R, base_t, q)
        return (fr_R, fr_t, r._axes)
    if name == "rotation_error_vector":
        return (random_rotation(rng), random_rotation(rng))
    if name == "ik_dls":
        goal_R = random_rotation(rng)
        goal_t = rng.uniform(-0.5, 0.5, 3) + [0, 0, 0.5]
        return (r._off_R, r._off_t, r._axes, r.q_min, r.q_max,
                r._tool_R, r._tool_t, np.eye(3), np.zeros(3),
                goal_R, goal_t, r.random_q(rng),
                20, 1e-3, 0.5, 1e-3, 1e-2, 0.5)
    if name == "seg_seg_distance":
        return tuple(rng.uniform(-1, 1, 3) for _ in range(4))
    if name == "point_box_sdf":
        return (rng.uniform(-1, 1, 3), rng.uniform(0.1, 0.5, 3))
    if name == "seg_box_distance":
        return (rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3),
                random_rotation(rng), rng.uniform(-0.5, 0.5, 3),
                rng.uniform(0.1, 0.4, 3))
    if name == "seg_sphere_distance":
        return (rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3),
                rng.uniform(-0.5, 0.5, 3), rng.uniform(0.1, 0.5))
    if name in ("config_collision_free", "edge_collision_free"):
        box_R = np.stack([random_rotation(rng)])
        box_t = rng.uniform(-1, 1, (1, 3))
        box_half = rng.uniform(0.1, 0.3, (1, 3))
        sph_c = rng.uniform(-1, 1, (1, 3))
        sph_r = np.array([rng.uniform(0.1, 0.3)])
        common = (r._off_R, r._off_t, r._axes, r._tool_R, r._tool_t,
                  np.eye(3), np.zeros(3),
                  r._cap_frame, r._cap_p0, r._cap_p1, r._cap_r,
                  box_R, box_t, box_half, sph_c, sph_r)
        if name == "config_collision_free":
            return (q,) + common
        return (q, r.random_q(rng), 0.1) + common
    raise KeyError(name)


@pytest.mark.parametrize("name", sorted(kernels.PY_FUNCS))
def test_compiled_matches_pure_python(name):
    """The njit-compiled kernel and its undecorated python body agree."""
    rng = np.random.default_rng(hash(name) % 2**32)
    compiled = getattr(kernels, name)
    plain = kernels.PY_FUNCS[name]
    for _ in range(5):
        args = _random_args(name, rng)
        a = compiled(*args)
        b = plain(*args)
        if isinstance(a, tuple):
            for x, y in zip(a, b):
                assert_allclose(x, y, atol=1e-12)
        else:
            assert_allclose(a, b, atol=1e-12)


def test_axis_rotation_matches_rodrigues():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=3)
        a /= np.linalg.norm(a)
        ang = rng.uniform(-3, 3)
        assert_allclose(kernels.axis_rotation(a, ang),
                        axis_angle_to_rotation(a * ang), atol=1e-12)


def test_fk_frames_matches_pose_composition():
    """Independent FK via Pose algebra."""
    r = reference_robot()
    rng = np.random.default_rng(1)
    for _ in range(10):
        q = r.random_q(rng)
        base = Pose(random_rotation(rng), rng.uniform(-1, 1, 3))
        fr_R, fr_t = kernels.fk_frames(r._off_R, r._off_t, r._axes,
                                       r._tool_R, r._tool_t,
                                       np.asarray(base.rotation),
                                       np.asarray(base.translation), q)
        cur = base
        for i, joint in enumerate(r.joints):
            cur = compose(cur, joint.offset)
            cur = compose(cur, Pose(axis_angle_to_rotation(joint.axis * q[i]),
                                    np.zeros(3)))
            assert_allclose(fr_R[i], cur.rotation, atol=1e-12)
            assert_allclose(fr_t[i], cur.translation, atol=1e-12)
        tool = compose(cur, r.tool_offset)
        assert_allclose(fr_R[r.n], tool.rotation, atol=1e-12)
        assert_allclose(fr_t[r.n], tool.translation, atol=1e-12)


def test_rotation_error_vector_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        cur = random_rotation(rng)
        goal = random_rotation(rng)
        w = kernels.rotation_error_vector(goal, cur)
        # applying the error rotation to cur recovers goal
        assert_allclose(axis_angle_to_rotation(w) @ cur, goal, atol=1e-7)


def test_ik_dls_converges_on_fk_target():
    r = reference_robot()
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(20):
        q_true = r.random_q(rng) * 0.4
        fr_R, fr_t = kernels.fk_frames(r._off_R, r._off_t, r._axes,
                                       r._tool_R, r._tool_t,
                                       np.eye(3), np.zeros(3), q_true)
        goal_R, goal_t = fr_R[r.n], fr_t[r.n]
        best = None
        for _ in range(6):
            q, pe, re, iters, conv = kernels.ik_dls(
                r._off_R, r._off_t, r._axes, r.q_min, r.q_max,
                r._tool_R, r._tool_t, np.eye(3), np.zeros(3),
                goal_R, goal_t, r.random_q(rng),
                50, 1e-3, 0.5, 1e-3, 1e-2, 0.5)
            if conv:
                best = (q, pe, re)
                break
        if best is not None:
            hits += 1
            assert best[1] <= 1e-3
            assert best[2] <= 1e-2
    assert hits >= 15  # DLS with restarts solves most reachable targets


def test_seg_seg_distance_oracle():
    # oracle: 2001x2001 brute-force scan of the same segments
    p1 = np.array([0.25019093, 0.7944276, 0.55137138])
    q1 = np.array([-0.54958562, -0.39966743, 0.74710689])
    p2 = np.array([-0.98946939, 0.64245684, 0.59413886])
    q2 = np.array([-0.06413009, -0.39393515, -0.44314878])
    d = kernels.seg_seg_distance(p1, q1, p2, q2)
    assert d == pytest.approx(0.6428901669155707, abs=1e-6)


def test_seg_seg_distance_cases():
    z = np.zeros(3)
    ex = np.array([1.0, 0, 0])
    ey = np.array([0, 1.0, 0])
    assert kernels.seg_seg_distance(z, ex, ey + z, ey + ex) == pytest.approx(1.0)
    assert kernels.seg_seg_distance(z, z, ex, ex) == pytest.approx(1.0)  # points
    # crossing perpendicular segments separated by 0.5 in z
    a0 = np.array([-1.0, 0, 0])
    a1 = np.array([1.0, 0, 0])
    b0 = np.array([0, -1.0, 0.5])
    b1 = np.array([0, 1.0, 0.5])
    assert kernels.seg_seg_distance(a0, a1, b0, b1) == pytest.approx(0.5)


def test_point_box_sdf():
    half = np.array([1.0, 2.0, 3.0])
    assert kernels.point_box_sdf(np.zeros(3), half) == pytest.approx(-1.0)
    assert kernels.point_box_sdf(np.array([2.0, 0, 0]), half) == pytest.approx(1.0)
    assert kernels.point_box_sdf(np.array([2.0, 3.0, 0]), half) == pytest.approx(math.sqrt(2))
    assert kernels.point_box_sdf(np.array([1.0, 0, 0]), half) == pytest.approx(0.0)


def test_seg_box_distance_axis_aligned():
    half = np.array([0.5, 0.5, 0.5])
    eye = np.eye(3)
    org = np.zeros(3)
    a = np.array([1.0, -1.0, 0.0])
    b = np.array([1.0, 1.0, 0.0])
    assert kernels.seg_box_distance(a, b, eye, org, half) == pytest.approx(0.5, abs=1e-9)
    # segment through the box center: depth -0.5
    a = np.array([-1.0, 0, 0])
    b = np.array([1.0, 0, 0])
    assert kernels.seg_box_distance(a, b, eye, org, half) == pytest.approx(-0.5, abs=1e-2)


def test_seg_box_distance_matches_dense_scan():
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = rng.uniform(-1, 1, 3)
        b = rng.uniform(-1, 1, 3)
        box_R = random_rotation(rng)
        box_t = rng.uniform(-0.3, 0.3, 3)
        half = rng.uniform(0.1, 0.4, 3)
        d = kernels.seg_box_distance(a, b, box_R, box_t, half)
        ts = np.linspace(0.0, 1.0, 4001)
        pts = (box_R.T @ ((a[None] + (b - a)[None] * ts[:, None]) - box_t).T).T
        ref = min(kernels.point_box_sdf(p, half) for p in pts)
        if ref > 1e-3:
            # outside the box the query is convex and refined to high precision
            assert d == pytest.approx(ref, abs=1e-6)
        else:
            # penetration depth comes from a fixed 257-sample scan
            assert d == pytest.approx(ref, abs=5e-3)


def test_seg_sphere_distance():
    c = np.array([0.0, 0.0, 1.0])
    a = np.array([-1.0, 0, 0])
    b = np.array([1.0, 0, 0])
    assert kernels.seg_sphere_distance(a, b, c, 0.25) == pytest.approx(0.75)
    inside = np.array([0.0, 0.0, 0.9])
    assert kernels.seg_sphere_distance(inside, inside, c, 0.25) == pytest.approx(-0.15)


def test_config_collision_free_obstacle():
    r = reference_robot()
    q = np.zeros(r.n)
    empty = (np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
             np.zeros((0, 3)), np.zeros(0))
    args = (r._off_R, r._off_t, r._axes, r._tool_R, r._tool_t,
            np.eye(3), np.zeros(3),
            r._cap_frame, r._cap_p0, r._cap_p1, r._cap_r)
    # no obstacles: the home configuration is self-collision free
    assert kernels.config_collision_free(q, *args, *empty)
    # a sphere swallowing the robot collides
    sph = (np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
           np.array([[0.0, 0.0, 0.5]]), np.array([2.0]))
    assert not kernels.config_collision_free(q, *args, *sph)


def test_edge_collision_free_detects_midpoint_hit():
    r = reference_robot()
    qa = np.zeros(r.n)
    qb = np.zeros(r.n)
    qa[0], qb[0] = -1.2, 1.2  # swings the arm through the +x region
    # small sphere in the swept volume but away from both endpoints
    sph_c = np.array([[1.0, 0.0, 0.8]])
    sph_r = np.array([0.15])
    args = (r._off_R, r._off_t, r._axes, r._tool_R, r._tool_t,
            np.eye(3), np.zeros(3),
            r._cap_frame, r._cap_p0, r._cap_p1, r._cap_r,
            np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
            sph_c, sph_r)
    # bend the elbow so the arm points outward; endpoints clear
    qa[1] = qb[1] = 1.1
    assert kernels.config_collision_free(qa, *args)
    assert kernels.config_collision_free(qb, *args)
    assert not kernels.edge_collision_free(qa, qb, 0.05, *args)
    # with the obstacle removed the edge is free
    free = (r._off_R, r._off_t, r._axes, r._tool_R, r._tool_t,
            np.eye(3), np.zeros(3),
            r._cap_frame, r._cap_p0, r._cap_p1, r._cap_r,
            np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros((0, 3)),
            np.zeros((0, 3)), np.zeros(0))
    assert kernels.edge_collision_free(qa, qb, 0.05, *free)
