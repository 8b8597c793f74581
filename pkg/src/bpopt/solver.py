"""Evaluate one base pose end to end: reach filter, numerical IK,
RRT-Connect planning between goal configurations, trapezoidal
time-parameterization and the cycle-time cost."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .robot import RobotModel, max_reach, pack_obstacles
from .se3 import DistanceWeights, Pose
from .task import BaseDomain, GoalPose, Task, base_pose_from_params, clamp_params

STAGE_NONE = "none"
STAGE_REACH = "reach"
STAGE_IK = "ik"
STAGE_COLLISION_IK = "collision_ik"
STAGE_PLANNING = "planning"
STAGE_PARAMETERIZATION = "parameterization"

#: orientation is treated as unconstrained at or above this tolerance
FREE_ROTATION_TOL = math.pi


@dataclass(frozen=True)
class SolverLimits:
    ik_max_steps: int = 33
    ik_restarts: int = 6
    ik_damping: float = 1e-3
    ik_step_clip: float = 0.5
    rrt_max_iters: int = 2000
    rrt_step: float = 0.2
    shortcut_attempts: int = 100
    collision_step: float = 0.05
    weights: DistanceWeights = field(default_factory=DistanceWeights)


@dataclass(frozen=True, eq=False)
class IKResult:
    q: np.ndarray
    residual: float
    converged: bool
    iterations: int
    pos_err: float = 0.0
    rot_err: float = 0.0


@dataclass(frozen=True, eq=False)
class JointPath:
    waypoints: np.ndarray  # (k, n), k >= 2

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=float)
        if w.ndim != 2 or w.shape[0] < 2:
            raise ValueError("path needs at least two waypoints")
        object.__setattr__(self, "waypoints", w)


@dataclass(frozen=True, eq=False)
class Segment:
    q_start: np.ndarray
    q_end: np.ndarray
    duration: float
    v_scale: float  # scalar profile limits in path-coordinate units (1/s)
    a_scale: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    segments: tuple
    total_time: float

    def sample(self, dt: float):
        """Yield (t, q, qdot) rows at step dt, plus every segment boundary."""
        t0 = 0.0
        for seg in self.segments:
            times = np.arange(0.0, seg.duration, dt) if seg.duration > 0 else np.array([0.0])
            dq = seg.q_end - seg.q_start
            for tau in times:
                s, sd = _profile_state(tau, seg.duration, seg.v_scale, seg.a_scale)
                yield t0 + tau, seg.q_start + s * dq, sd * dq
            yield t0 + seg.duration, seg.q_end.copy(), np.zeros_like(seg.q_end)
            t0 += seg.duration


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    success: bool
    cost: float
    trajectory: Trajectory | None
    failed_stage: str
    stages: tuple = ()
    ik_results: tuple = ()


def solve_ik(robot: RobotModel, base: Pose, goal: GoalPose,
             rng: np.random.Generator, max_steps: int = 33, restarts: int = 6,
             weights: DistanceWeights = DistanceWeights(),
             damping: float = 1e-3, step_clip: float = 0.5,
             q_seed: np.ndarray | None = None) -> IKResult:
    """Damped least-squares IK, best of several restarts.

    The first attempt starts from q_seed (zeros by default); the remaining
    restarts draw uniform configurations within the joint limits.  A goal
    with tol_rot >= pi is treated as position-only.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rot_weight = 0.0 if goal.tol_rot >= FREE_ROTATION_TOL else weights.lambda_rot
    goal_R = np.asarray(goal.pose.rotation)
    goal_t = np.asarray(goal.pose.translation)
    base_R = np.asarray(base.rotation)
    base_t = np.asarray(base.translation)
    best: IKResult | None = None
    attempts = max(1, restarts)
    for k in range(attempts):
        if k == 0:
            q0 = (np.asarray(q_seed, dtype=float).copy() if q_seed is not None
                  else np.zeros(robot.n))
        else:
            q0 = robot.random_q(rng)
        q, pe, re, iters, conv = kernels.ik_dls(
            robot._off_R, robot._off_t, robot._axes, robot.q_min, robot.q_max,
            robot._tool_R, robot._tool_t, base_R, base_t, goal_R, goal_t, q0,
            max_steps, damping, rot_weight, goal.tol_pos, goal.tol_rot, step_clip)
        res = pe + rot_weight * re
        result = IKResult(q=q, residual=float(res), converged=bool(conv),
                          iterations=int(iters), pos_err=float(pe), rot_err=float(re))
        if best is None or (result.converged and not best.converged) \
                or (result.converged == best.converged and result.residual < best.residual):
            best = result
        if result.converged:
            break
    return best


def _wrap_joints(q: np.ndarray, robot: RobotModel) -> np.ndarray:
    """Wrap each joint by full turns toward (-pi, pi] where the limits allow;
    FK is invariant, joint-space distances shrink."""
    out = q.copy()
    for j in range(out.shape[0]):
        wrapped = math.remainder(out[j], 2.0 * math.pi)
        if robot.q_min[j] <= wrapped <= robot.q_max[j]:
            out[j] = wrapped
    return out


def filter_reach(robot: RobotModel, base_params, task: Task) -> bool:
    """Reject base positions further from any goal than the robot's reach
    (inclusive at equality)."""
    b = np.asarray(base_params, dtype=float).reshape(-1)
    pos = task.base_domain.center.translation + b[:3]
    reach = max_reach(robot)
    for g in task.goals:
        if np.linalg.norm(pos - g.pose.translation) > reach + 1e-12:
            return False
    return True


class _CollisionWorld:
    """Robot + base + packed obstacles, bound for fast repeated queries."""

    def __init__(self, robot: RobotModel, base: Pose, obstacles):
        self.robot = robot
        self._args = (robot._off_R, robot._off_t, robot._axes,
                      robot._tool_R, robot._tool_t,
                      np.asarray(base.rotation), np.asarray(base.translation),
                      robot._cap_frame, robot._cap_p0, robot._cap_p1, robot._cap_r,
                      *pack_obstacles(obstacles))

    def config_free(self, q) -> bool:
        return bool(kernels.config_collision_free(np.asarray(q, dtype=float), *self._args))

    def edge_free(self, qa, qb, max_step) -> bool:
        return bool(kernels.edge_collision_free(np.asarray(qa, dtype=float),
                                                np.asarray(qb, dtype=float),
                                                max_step, *self._args))


def _nearest(tree_q: list, q: np.ndarray) -> int:
    arr = np.stack(tree_q)
    return int(np.argmin(np.sum((arr - q) ** 2, axis=1)))


def rrt_connect(robot: RobotModel, base: Pose, q_start, q_goal, obstacles,
                rng: np.random.Generator, max_iters: int = 2000,
                step_size: float = 0.2, collision_step: float = 0.05,
                shortcut_attempts: int = 100) -> JointPath | None:
    """Bidirectional RRT with greedy connection and shortcut smoothing."""
    q_start = robot.check_q(q_start)
    q_goal = robot.check_q(q_goal)
    world = _CollisionWorld(robot, base, obstacles)
    if not world.config_free(q_start) or not world.config_free(q_goal):
        raise ValueError("rrt_connect endpoints must be collision-free")
    if np.array_equal(q_start, q_goal):
        return JointPath(np.stack([q_start, q_goal]))
    # cheap straight-line attempt before growing trees
    if world.edge_free(q_start, q_goal, collision_step):
        return JointPath(np.stack([q_start, q_goal]))

    trees = ([q_start], [q_goal])
    parents = ([-1], [-1])
    lo, hi = robot.q_min, robot.q_max

    def extend(side: int, target: np.ndarray):
        tq, tp = trees[side], parents[side]
        i = _nearest(tq, target)
        q_near = tq[i]
        delta = target - q_near
        dist = float(np.linalg.norm(delta))
        if dist <= step_size:
            q_new = target
        else:
            q_new = q_near + delta * (step_size / dist)
        if not world.edge_free(q_near, q_new, collision_step):
            return "trapped", -1
        tq.append(q_new)
        tp.append(i)
        return ("reached" if dist <= step_size else "advanced"), len(tq) - 1

    def connect(side: int, target: np.ndarray):
        status = "advanced"
        idx = -1
        while status == "advanced":
            status, idx = extend(side, target)
        return status, idx

    path = None
    for it in range(max_iters):
        a = it % 2
        b = 1 - a
        q_rand = rng.uniform(lo, hi)
        status, ia = extend(a, q_rand)
        if status == "trapped":
            continue
        status, ib = connect(b, trees[a][ia])
        if status == "reached":
            def backtrack(side, idx):
                out = []
                while idx >= 0:
                    out.append(trees[side][idx])
                    idx = parents[side][idx]
                return out
            part_a = backtrack(a, ia)[::-1]  # root_a -> junction
            part_b = backtrack(b, ib)        # junction -> root_b
            joined = part_a + part_b[1:]
            path = joined if a == 0 else joined[::-1]
            break
    if path is None:
        return None
    path = _shortcut(world, path, rng, collision_step, shortcut_attempts)
    return JointPath(np.stack(path))


def _shortcut(world: _CollisionWorld, path, rng, collision_step, attempts):
    path = list(path)
    for _ in range(attempts):
        if len(path) < 3:
            break
        i = int(rng.integers(0, len(path) - 2))
        j = int(rng.integers(i + 2, len(path)))
        if world.edge_free(path[i], path[j], collision_step):
            path = path[:i + 1] + path[j:]
    return path


def segment_duration(length: float, v: float, a: float) -> float:
    """Rest-to-rest trapezoid/triangle duration for distance at limits v, a."""
    if length <= 0.0:
        return 0.0
    if length >= v * v / a:
        return length / v + v / a
    return 2.0 * math.sqrt(length / a)


def _segment_scales(robot: RobotModel, dq: np.ndarray):
    """Scalar velocity/acceleration limits in unit path-coordinate units."""
    mask = np.abs(dq) > 0.0
    if not np.any(mask):
        return math.inf, math.inf
    v = float(np.min(robot.v_max[mask] / np.abs(dq[mask])))
    a = float(np.min(robot.a_max[mask] / np.abs(dq[mask])))
    return v, a


def _profile_state(tau: float, total: float, v: float, a: float):
    """Path coordinate and its rate at time tau of a rest-to-rest profile."""
    if total <= 0.0:
        return 1.0, 0.0
    tau = min(max(tau, 0.0), total)
    if v * v / a > 1.0:  # triangular
        t_acc = math.sqrt(1.0 / a)
        v_peak = a * t_acc
    else:
        t_acc = v / a
        v_peak = v
    if tau < t_acc:
        return 0.5 * a * tau * tau, a * tau
    if tau < total - t_acc:
        return 0.5 * a * t_acc * t_acc + v_peak * (tau - t_acc), v_peak
    rem = total - tau
    return 1.0 - 0.5 * a * rem * rem, a * rem


def time_parameterize(robot: RobotModel, path: JointPath) -> Trajectory:
    """Per-segment rest-to-rest trapezoidal profiles along straight
    joint-space lines; zero-length segments contribute zero time."""
    segments = []
    total = 0.0
    w = path.waypoints
    for i in range(w.shape[0] - 1):
        dq = w[i + 1] - w[i]
        v, a = _segment_scales(robot, dq)
        if math.isinf(v):
            duration = 0.0
        elif 1.0 >= v * v / a:
            duration = 1.0 / v + v / a
        else:
            duration = 2.0 / math.sqrt(a)
        segments.append(Segment(w[i].copy(), w[i + 1].copy(), duration, v, a))
        total += duration
    return Trajectory(tuple(segments), total)


def _concat_trajectories(parts) -> Trajectory:
    segments = []
    total = 0.0
    for t in parts:
        segments.extend(t.segments)
        total += t.total_time
    return Trajectory(tuple(segments), total)


def evaluate_base_pose(robot: RobotModel, task: Task, b,
                       rng: np.random.Generator,
                       limits: SolverLimits = SolverLimits()) -> SolveOutcome:
    """Run the full filter pipeline at one base parameter vector.

    Stage order: reach filter, per-goal IK, collision check of the IK
    solutions, RRT-Connect between consecutive goals, time
    parameterization.  Any failure returns the task's failure cost.
    """
    domain = task.base_domain
    b = np.asarray(b, dtype=float).reshape(-1)
    if not np.allclose(clamp_params(b, domain), b, atol=1e-9):
        raise ValueError("base parameters outside the domain; clamp first")
    stages = []

    def fail(stage):
        return SolveOutcome(success=False, cost=task.fail_cost, trajectory=None,
                            failed_stage=stage, stages=tuple(stages))

    stages.append(STAGE_REACH)
    if not filter_reach(robot, b, task):
        return fail(STAGE_REACH)

    base = base_pose_from_params(b, domain)
    world = _CollisionWorld(robot, base, task.obstacles)
    stages.append(STAGE_IK)
    collision_stage_entered = False
    iks = []
    prev_q = None
    for goal in task.goals:
        # spend the restart budget looking for a converged AND collision-free
        # solution; a converged-but-colliding goal fails the collision filter.
        # Seeding from the previous goal's configuration keeps consecutive
        # solutions close, which shortens the planned paths.
        chosen = None
        converged_any = False
        for k in range(max(1, limits.ik_restarts)):
            if k == 0:
                seed = prev_q if prev_q is not None else np.zeros(robot.n)
            else:
                seed = robot.random_q(rng)
            res = solve_ik(robot, base, goal, rng,
                           max_steps=limits.ik_max_steps, restarts=1,
                           weights=limits.weights, damping=limits.ik_damping,
                           step_clip=limits.ik_step_clip, q_seed=seed)
            if not res.converged:
                continue
            converged_any = True
            if not collision_stage_entered:
                stages.append(STAGE_COLLISION_IK)
                collision_stage_entered = True
            q = _wrap_joints(res.q, robot)
            if world.config_free(q):
                chosen = IKResult(q=q, residual=res.residual, converged=True,
                                  iterations=res.iterations,
                                  pos_err=res.pos_err, rot_err=res.rot_err)
                break
        if chosen is None:
            return fail(STAGE_COLLISION_IK if converged_any else STAGE_IK)
        iks.append(chosen)
        prev_q = chosen.q

    stages.append(STAGE_PLANNING)
    parts = []
    for i in range(len(iks) - 1):
        path = rrt_connect(robot, base, iks[i].q, iks[i + 1].q, task.obstacles,
                           rng, max_iters=limits.rrt_max_iters,
                           step_size=limits.rrt_step,
                           collision_step=limits.collision_step,
                           shortcut_attempts=limits.shortcut_attempts)
        if path is None:
            return fail(STAGE_PLANNING)
        parts.append(path)

    stages.append(STAGE_PARAMETERIZATION)
    trajectories = [time_parameterize(robot, p) for p in parts]
    traj = _concat_trajectories(trajectories) if trajectories else Trajectory((), 0.0)
    if not math.isfinite(traj.total_time):
        return fail(STAGE_PARAMETERIZATION)
    return SolveOutcome(success=True, cost=traj.total_time, trajectory=traj,
                        failed_stage=STAGE_NONE, stages=tuple(stages),
                        ik_results=tuple(iks))


def export_trajectory(traj: Trajectory, rate_hz: float = 100.0) -> list:
    """Sampled (t, q, qdot) rows for external visualization."""
    dt = 1.0 / rate_hz
    return [{"t": float(t), "q": [float(x) for x in q], "qd": [float(x) for x in qd]}
            for t, q, qd in traj.sample(dt)]
