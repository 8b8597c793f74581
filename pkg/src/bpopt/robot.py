"""Serial revolute-joint manipulator: kinematics, Jacobian, reach and
collision checking against box/sphere obstacles and the robot itself."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import kernels
from .se3 import Pose, compose


@dataclass(frozen=True, eq=False)
class JointSpec:
    """One revolute joint: fixed offset from the previous frame, rotation
    axis in the local frame, and position/speed/acceleration limits."""

    offset: Pose
    axis: np.ndarray
    q_min: float
    q_max: float
    v_max: float
    a_max: float

    def __post_init__(self):
        a = np.array(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("joint axis must be a unit vector")
        a.setflags(write=False)
        object.__setattr__(self, "axis", a)
        if not self.q_min < self.q_max:
            raise ValueError("q_min must be < q_max")
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("v_max and a_max must be > 0")


@dataclass(frozen=True, eq=False)
class Capsule:
    """Segment + radius; frame is the link frame index (-1 = base)."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float
    frame: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p0", np.array(self.p0, dtype=float).reshape(3))
        object.__setattr__(self, "p1", np.array(self.p1, dtype=float).reshape(3))
        if self.radius <= 0:
            raise ValueError("capsule radius must be > 0")


@dataclass(frozen=True, eq=False)
class Box:
    pose: Pose
    half_extents: np.ndarray

    def __post_init__(self):
        h = np.array(self.half_extents, dtype=float).reshape(3)
        if not np.all(h > 0):
            raise ValueError("box half extents must be > 0")
        object.__setattr__(self, "half_extents", h)


@dataclass(frozen=True, eq=False)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(3))
        if self.radius <= 0:
            raise ValueError("sphere radius must be > 0")


class RobotModel:
    """Immutable serial manipulator; packs its geometry into flat arrays
    consumed by the numeric kernels."""

    def __init__(self, joints, tool_offset: Pose, capsules=(), name: str = ""):
        joints = tuple(joints)
        if len(joints) < 1:
            raise ValueError("robot needs at least one joint")
        self.joints = joints
        self.tool_offset = tool_offset
        self.capsules = tuple(capsules)
        self.name = name
        n = len(joints)
        self.n = n
        self._off_R = np.stack([j.offset.rotation for j in joints])
        self._off_t = np.stack([j.offset.translation for j in joints])
        self._axes = np.stack([j.axis for j in joints])
        self._qmin = np.array([j.q_min for j in joints])
        self._qmax = np.array([j.q_max for j in joints])
        self._vmax = np.array([j.v_max for j in joints])
        self._amax = np.array([j.a_max for j in joints])
        self._tool_R = np.asarray(tool_offset.rotation)
        self._tool_t = np.asarray(tool_offset.translation)
        m = len(self.capsules)
        self._cap_frame = np.array([c.frame for c in self.capsules], dtype=np.int64)
        self._cap_p0 = (np.stack([c.p0 for c in self.capsules])
                        if m else np.zeros((0, 3)))
        self._cap_p1 = (np.stack([c.p1 for c in self.capsules])
                        if m else np.zeros((0, 3)))
        self._cap_r = np.array([c.radius for c in self.capsules])
        for c in self.capsules:
            if not -1 <= c.frame < n:
                raise ValueError("capsule frame index out of range")

    @property
    def q_min(self) -> np.ndarray:
        return self._qmin

    @property
    def q_max(self) -> np.ndarray:
        return self._qmax

    @property
    def v_max(self) -> np.ndarray:
        return self._vmax

    @property
    def a_max(self) -> np.ndarray:
        return self._amax

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.n:
            raise ValueError(f"configuration has length {q.shape[0]}, robot has {self.n} joints")
        return q

    def random_q(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self._qmin, self._qmax)


def pack_obstacles(obstacles):
    """Split obstacles into (box_R, box_t, box_half, sph_c, sph_r) arrays."""
    boxes = [o for o in obstacles if isinstance(o, Box)]
    spheres = [o for o in obstacles if isinstance(o, Sphere)]
    if len(boxes) + len(spheres) != len(obstacles):
        raise TypeError("obstacles must be Box or Sphere")
    box_R = np.stack([b.pose.rotation for b in boxes]) if boxes else np.zeros((0, 3, 3))
    box_t = np.stack([b.pose.translation for b in boxes]) if boxes else np.zeros((0, 3))
    box_half = np.stack([b.half_extents for b in boxes]) if boxes else np.zeros((0, 3))
    sph_c = np.stack([s.center for s in spheres]) if spheres else np.zeros((0, 3))
    sph_r = np.array([s.radius for s in spheres])
    return box_R, box_t, box_half, sph_c, sph_r


def link_frames(robot: RobotModel, q, base: Pose | None = None):
    """Cumulative frame after each joint; the last entry includes the tool."""
    q = robot.check_q(q)
    if base is None:
        base = Pose.identity()
    fr_R, fr_t = kernels.fk_frames(robot._off_R, robot._off_t, robot._axes,
                                   robot._tool_R, robot._tool_t,
                                   np.asarray(base.rotation), np.asarray(base.translation), q)
    return [Pose(fr_R[i], fr_t[i]) for i in range(robot.n + 1)]


def forward_kinematics(robot: RobotModel, q, base: Pose | None = None) -> Pose:
    """End-effector pose; in the robot-base frame unless a base is given."""
    return link_frames(robot, q, base)[-1]


def geometric_jacobian(robot: RobotModel, q, base: Pose | None = None) -> np.ndarray:
    """6xN Jacobian: column i = [z_i x (p_ee - p_i); z_i]."""
    q = robot.check_q(q)
    if base is None:
        base = Pose.identity()
    fr_R, fr_t = kernels.fk_frames(robot._off_R, robot._off_t, robot._axes,
                                   robot._tool_R, robot._tool_t,
                                   np.asarray(base.rotation), np.asarray(base.translation), q)
    return kernels.jacobian_from_frames(fr_R, fr_t, robot._axes)


def max_reach(robot: RobotModel) -> float:
    """Sum of offset lengths plus the tool length; upper-bounds the EE radius."""
    reach = float(np.linalg.norm(robot.tool_offset.translation))
    for j in robot.joints:
        reach += float(np.linalg.norm(j.offset.translation))
    return reach


def collision_free(robot: RobotModel, base: Pose, q, obstacles) -> bool:
    """True iff all link capsules clear the obstacles and each other."""
    q = robot.check_q(q)
    box_R, box_t, box_half, sph_c, sph_r = pack_obstacles(obstacles)
    return bool(kernels.config_collision_free(
        q, robot._off_R, robot._off_t, robot._axes, robot._tool_R, robot._tool_t,
        np.asarray(base.rotation), np.asarray(base.translation),
        robot._cap_frame, robot._cap_p0, robot._cap_p1, robot._cap_r,
        box_R, box_t, box_half, sph_c, sph_r))


def primitive_distance(capsule: Capsule, other) -> float:
    """Signed clearance between a world-frame capsule and a box, sphere or
    capsule; negative means penetration."""
    if isinstance(other, Box):
        d = kernels.seg_box_distance(capsule.p0, capsule.p1,
                                     np.asarray(other.pose.rotation),
                                     np.asarray(other.pose.translation),
                                     other.half_extents)
        return float(d - capsule.radius)
    if isinstance(other, Sphere):
        d = kernels.seg_sphere_distance(capsule.p0, capsule.p1,
                                        other.center, other.radius)
        return float(d - capsule.radius)
    if isinstance(other, Capsule):
        d = kernels.seg_seg_distance(capsule.p0, capsule.p1, other.p0, other.p1)
        return float(d - capsule.radius - other.radius)
    raise TypeError(f"unsupported primitive: {type(other).__name__}")


def point_obstacle_distance(point, obstacle) -> float:
    """Distance from a point to an obstacle surface (negative inside)."""
    p = np.asarray(point, dtype=float).reshape(3)
    if isinstance(obstacle, Box):
        return float(kernels.seg_box_distance(p, p,
                                              np.asarray(obstacle.pose.rotation),
                                              np.asarray(obstacle.pose.translation),
                                              obstacle.half_extents))
    if isinstance(obstacle, Sphere):
        return float(kernels.seg_sphere_distance(p, p, obstacle.center, obstacle.radius))
    raise TypeError(f"unsupported obstacle: {type(obstacle).__name__}")


ROBOT_SCHEMA = 1


def robot_to_dict(robot: RobotModel) -> dict:
    return {
        "schema": ROBOT_SCHEMA,
        "name": robot.name,
        "joints": [
            {
                "offset": j.offset.to_dict(),
                "axis": [float(x) for x in j.axis],
                "q_min": j.q_min, "q_max": j.q_max,
                "v_max": j.v_max, "a_max": j.a_max,
            }
            for j in robot.joints
        ],
        "tool_offset": robot.tool_offset.to_dict(),
        "capsules": [
            {
                "frame": c.frame,
                "p0": [float(x) for x in c.p0],
                "p1": [float(x) for x in c.p1],
                "radius": c.radius,
            }
            for c in robot.capsules
        ],
    }


def robot_from_dict(d: dict) -> RobotModel:
    if d.get("schema") != ROBOT_SCHEMA:
        raise ValueError(f"unknown robot schema: {d.get('schema')!r}")
    joints = [
        JointSpec(offset=Pose.from_dict(j["offset"]), axis=j["axis"],
                  q_min=j["q_min"], q_max=j["q_max"],
                  v_max=j["v_max"], a_max=j["a_max"])
        for j in d["joints"]
    ]
    capsules = [
        Capsule(p0=c["p0"], p1=c["p1"], radius=c["radius"], frame=c["frame"])
        for c in d.get("capsules", [])
    ]
    return RobotModel(joints, Pose.from_dict(d["tool_offset"]), capsules,
                      name=d.get("name", ""))


def save_robot(robot: RobotModel, path) -> None:
    with open(path, "w") as f:
        json.dump(robot_to_dict(robot), f, indent=2)


def load_robot(path) -> RobotModel:
    with open(path) as f:
        return robot_from_dict(json.load(f))


def reference_robot() -> RobotModel:
    """The 6R reference arm shipped with the package (reach about 1.35 m)."""
    data = resources.files("bpopt").joinpath("data/reference_6r.json").read_text()
    return robot_from_dict(json.loads(data))


def transform_capsule(capsule: Capsule, pose: Pose) -> Capsule:
    """Capsule expressed in the frame that pose maps from."""
    r, t = pose.rotation, pose.translation
    return Capsule(r @ capsule.p0 + t, r @ capsule.p1 + t, capsule.radius,
                   frame=capsule.frame)


def world_capsules(robot: RobotModel, base: Pose, q):
    """Link capsules transformed to the world frame."""
    frames = link_frames(robot, q, base)
    out = []
    for c in robot.capsules:
        pose = base if c.frame < 0 else frames[c.frame]
        out.append(transform_capsule(c, pose))
    return out
