"""Task data model (goals, obstacles, base domain, costs), JSON persistence
and generators for the simple/hard/edge benchmark families."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .robot import Box, Sphere, point_obstacle_distance
from .se3 import (Pose, pose_from_params, random_axis_angle, random_rotation,
                  wrap_axis_angle)

TASK_SCHEMA = 1

# Generator constants, calibrated so the nominal (unoptimized) base pose
# solves roughly half of the simple tasks; see README for the re-check.
GRID_XY = (-1.0, -0.5, 0.0, 0.5, 1.0)
GRID_Z = (0.25, 0.75)
CUBE_EDGE = 0.3
GOAL_RADIUS = (0.35, 0.85)
GOAL_HEIGHT = (0.20, 0.80)
GOAL_CLEARANCE = 0.05
EDGE_BOX_HALF = 0.5
EDGE_BOUNDARY_GAP = (1.06, 1.14)
EDGE_OBSTACLE_GAP = (0.15, 0.25)
DEFAULT_TOL_POS = 1e-3
DEFAULT_TOL_ROT = 1e-2
MAX_GEN_ATTEMPTS = 1000


class TaskFormatError(ValueError):
    """Raised for malformed or invariant-violating task files."""


@dataclass(frozen=True, eq=False)
class GoalPose:
    pose: Pose
    tol_pos: float = DEFAULT_TOL_POS
    tol_rot: float = DEFAULT_TOL_ROT

    def __post_init__(self):
        if self.tol_pos <= 0 or self.tol_rot <= 0:
            raise ValueError("goal tolerances must be positive")


@dataclass(frozen=True, eq=False)
class BaseDomain:
    """Allowed base poses: an axis-aligned position box around a nominal
    pose, with optionally free orientation (parameter arity 6 vs 3)."""

    center: Pose
    half_extents: np.ndarray
    allow_rotation: bool = False

    def __post_init__(self):
        h = np.array(self.half_extents, dtype=float).reshape(3)
        if not np.all(h > 0):
            raise ValueError("half extents must be > 0")
        object.__setattr__(self, "half_extents", h)

    @property
    def arity(self) -> int:
        return 6 if self.allow_rotation else 3

    def with_rotation(self, flag: bool) -> "BaseDomain":
        return BaseDomain(self.center, self.half_extents, flag)


@dataclass(frozen=True, eq=False)
class Task:
    goals: tuple
    obstacles: tuple
    base_domain: BaseDomain
    fail_cost: float
    id: str = ""
    tags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "goals", tuple(self.goals))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.goals) < 1:
            raise ValueError("task needs at least one goal")
        if not self.fail_cost >= 20.0:
            raise ValueError("fail_cost must be >= 20 s")

    def with_arity(self, arity: int) -> "Task":
        if arity not in (3, 6):
            raise ValueError("arity must be 3 or 6")
        return replace(self, base_domain=self.base_domain.with_rotation(arity == 6))


@dataclass(frozen=True, eq=False)
class TaskSet:
    family: str
    tasks: tuple
    seed: int

    def __post_init__(self):
        if self.family not in ("simple", "hard", "edge"):
            raise ValueError(f"unknown family: {self.family!r}")
        object.__setattr__(self, "tasks", tuple(self.tasks))


def base_pose_from_params(b, domain: BaseDomain) -> Pose:
    """World base pose for a parameter vector (offset from the nominal pose)."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != domain.arity:
        raise ValueError(f"expected arity {domain.arity}, got {b.shape[0]}")
    local = pose_from_params(b)
    return Pose(domain.center.rotation @ local.rotation,
                domain.center.translation + b[:3])


def sample_base_params(domain: BaseDomain, rng: np.random.Generator) -> np.ndarray:
    """Uniform position in the box; uniform SO(3) orientation if allowed."""
    pos = rng.uniform(-domain.half_extents, domain.half_extents)
    if not domain.allow_rotation:
        return pos
    return np.concatenate([pos, random_axis_angle(rng)])


def clamp_params(b, domain: BaseDomain) -> np.ndarray:
    """Clamp positions to the box, wrap the axis-angle part to norm <= pi."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != domain.arity:
        raise ValueError(f"expected arity {domain.arity}, got {b.shape[0]}")
    pos = np.clip(b[:3], -domain.half_extents, domain.half_extents)
    if domain.arity == 3:
        return pos
    return np.concatenate([pos, wrap_axis_angle(b[3:])])


def map_unit_to_params(u, domain: BaseDomain) -> np.ndarray:
    """Map a point of the unit cube to a domain parameter vector."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != domain.arity:
        raise ValueError(f"expected arity {domain.arity}, got {u.shape[0]}")
    pos = (2.0 * u[:3] - 1.0) * domain.half_extents
    if domain.arity == 3:
        return pos
    rot = wrap_axis_angle((2.0 * u[3:] - 1.0) * math.pi)
    return np.concatenate([pos, rot])


def params_to_unit(b, domain: BaseDomain) -> np.ndarray:
    """Inverse of map_unit_to_params on the box (rotation coords in [-pi, pi])."""
    b = np.asarray(b, dtype=float).reshape(-1)
    pos = (b[:3] / domain.half_extents + 1.0) / 2.0
    if domain.arity == 3:
        return pos
    rot = (b[3:] / math.pi + 1.0) / 2.0
    return np.concatenate([pos, rot])


def _sample_cubes(rng: np.random.Generator, count: int):
    cells = [(x, y, z) for z in GRID_Z for y in GRID_XY for x in GRID_XY]
    idx = rng.choice(len(cells), size=count, replace=False)
    half = np.full(3, CUBE_EDGE / 2.0)
    return tuple(Box(Pose(np.eye(3), cells[int(i)]), half) for i in idx)


def _sample_goal_near_origin(rng: np.random.Generator, obstacles) -> GoalPose:
    for _ in range(MAX_GEN_ATTEMPTS):
        phi = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(*GOAL_RADIUS)
        z = rng.uniform(*GOAL_HEIGHT)
        p = np.array([r * math.cos(phi), r * math.sin(phi), z])
        if all(point_obstacle_distance(p, o) >= GOAL_CLEARANCE for o in obstacles):
            return GoalPose(Pose(random_rotation(rng), p))
    raise RuntimeError("goal sampling failed; generator geometry too tight")


def _synthetic_task(seed: int, n_goals: int, n_obstacles: int,
                    fail_cost: float, family: str) -> Task:
    rng = np.random.Generator(np.random.PCG64(seed))
    obstacles = _sample_cubes(rng, n_obstacles)
    goals = tuple(_sample_goal_near_origin(rng, obstacles) for _ in range(n_goals))
    domain = BaseDomain(Pose.identity(), np.ones(3), allow_rotation=False)
    return Task(goals=goals, obstacles=obstacles, base_domain=domain,
                fail_cost=fail_cost, id=f"{family}-{seed}",
                tags=("BPO24", family))


def gen_simple(seed: int) -> Task:
    """Three cubes on a grid about the origin, three goals outside them."""
    return _synthetic_task(seed, 3, 3, 20.0, "simple")


def gen_hard(seed: int) -> Task:
    """Like simple but five goals and obstacles, higher failure penalty."""
    return _synthetic_task(seed, 5, 5, 50.0, "hard")


def _edge_goal_position(center_t, half, u, gap: float) -> np.ndarray:
    """Point along direction u from the domain center whose distance to the
    domain box equals gap (bisection; the distance is monotone in d)."""
    def box_gap(d):
        rel = np.abs(center_t + d * u - center_t) - half
        return float(np.linalg.norm(np.maximum(rel, 0.0)))
    lo, hi = 0.0, 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if box_gap(mid) < gap:
            lo = mid
        else:
            hi = mid
    return center_t + 0.5 * (lo + hi) * u


def gen_edge(seed: int) -> Task:
    """Goals just outside the base domain at near-full arm extension.

    The closest admissible base position leaves the arm almost stretched, so
    the constrained tool orientation is often unreachable with an upright
    base; freeing the base orientation (arity 6) recovers many of these.
    The two goals share one tool orientation (a seam at full extension)
    and the obstacle cubes sit on the far side of each goal.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    center_t = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0])
    domain = BaseDomain(Pose(np.eye(3), center_t), np.full(3, EDGE_BOX_HALF),
                        allow_rotation=False)
    azim0 = rng.uniform(0.0, 2.0 * math.pi)
    elev0 = rng.uniform(0.0, 0.20)
    seam_rotation = random_rotation(rng)
    goals = []
    obstacles = []
    for _ in range(2):
        for _ in range(MAX_GEN_ATTEMPTS):
            phi = azim0 + rng.uniform(-0.12, 0.12)
            elev = elev0 + rng.uniform(-0.05, 0.05)
            u = np.array([math.cos(elev) * math.cos(phi),
                          math.cos(elev) * math.sin(phi),
                          math.sin(elev)])
            gap = rng.uniform(*EDGE_BOUNDARY_GAP)
            p = _edge_goal_position(center_t, domain.half_extents, u, gap)
            if p[2] >= 0.05:
                break
        else:
            raise RuntimeError("edge goal sampling failed")
        # a cube beyond the goal (away from the base domain), its nearest
        # face an exact EDGE_OBSTACLE_GAP from the goal along the dominant
        # axis of the goal direction
        face_gap = rng.uniform(*EDGE_OBSTACLE_GAP)
        axis = int(np.argmax(np.abs(u)))
        cube_center = p.copy()
        cube_center[axis] += math.copysign(CUBE_EDGE / 2.0 + face_gap, u[axis])
        obstacles.append(Box(Pose(np.eye(3), cube_center), np.full(3, CUBE_EDGE / 2.0)))
        goals.append(GoalPose(Pose(seam_rotation, p)))
    return Task(goals=tuple(goals), obstacles=tuple(obstacles),
                base_domain=domain, fail_cost=50.0, id=f"edge-{seed}",
                tags=("BPO24", "edge"))


GENERATORS = {"simple": gen_simple, "hard": gen_hard, "edge": gen_edge}


def _goal_to_dict(g: GoalPose) -> dict:
    return {"pose": g.pose.to_dict(), "tol_pos": g.tol_pos, "tol_rot": g.tol_rot}


def _obstacle_to_dict(o) -> dict:
    if isinstance(o, Box):
        return {"kind": "box", "pose": o.pose.to_dict(),
                "half_extents": [float(x) for x in o.half_extents]}
    if isinstance(o, Sphere):
        return {"kind": "sphere", "center": [float(x) for x in o.center],
                "radius": o.radius}
    raise TypeError(f"unsupported obstacle: {type(o).__name__}")


def _obstacle_from_dict(d: dict):
    if d["kind"] == "box":
        return Box(Pose.from_dict(d["pose"]), d["half_extents"])
    if d["kind"] == "sphere":
        return Sphere(d["center"], d["radius"])
    raise TaskFormatError(f"unknown obstacle kind: {d['kind']!r}")


def task_to_dict(t: Task) -> dict:
    return {
        "schema": TASK_SCHEMA,
        "id": t.id,
        "tags": list(t.tags),
        "fail_cost": t.fail_cost,
        "base_domain": {
            "center": t.base_domain.center.to_dict(),
            "half_extents": [float(x) for x in t.base_domain.half_extents],
            "allow_rotation": t.base_domain.allow_rotation,
        },
        "goals": [_goal_to_dict(g) for g in t.goals],
        "obstacles": [_obstacle_to_dict(o) for o in t.obstacles],
    }


def task_from_dict(d: dict) -> Task:
    if d.get("schema") != TASK_SCHEMA:
        raise TaskFormatError(f"unknown task schema: {d.get('schema')!r}")
    try:
        domain = BaseDomain(Pose.from_dict(d["base_domain"]["center"]),
                            d["base_domain"]["half_extents"],
                            bool(d["base_domain"]["allow_rotation"]))
        goals = tuple(GoalPose(Pose.from_dict(g["pose"]), g["tol_pos"], g["tol_rot"])
                      for g in d["goals"])
        obstacles = tuple(_obstacle_from_dict(o) for o in d["obstacles"])
        return Task(goals=goals, obstacles=obstacles, base_domain=domain,
                    fail_cost=d["fail_cost"], id=d.get("id", ""),
                    tags=tuple(d.get("tags", ())))
    except (KeyError, ValueError, TypeError) as e:
        raise TaskFormatError(f"invalid task file: {e}") from e


def save_task(t: Task, path) -> None:
    with open(path, "w") as f:
        json.dump(task_to_dict(t), f, indent=2)


def load_task(path) -> Task:
    with open(path) as f:
        text = f.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise TaskFormatError(f"malformed JSON at byte {e.pos}: {e.msg}") from e
    return task_from_dict(d)
