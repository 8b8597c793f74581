"""The four anytime base-pose optimizers (plus the do-nothing baseline),
sharing one budget protocol and one run-history format."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .robot import RobotModel, forward_kinematics
from .se3 import DistanceWeights, compose, hammersley_points, pose_distance
from .solver import SolverLimits, evaluate_base_pose, solve_ik
from .task import (Task, base_pose_from_params, clamp_params,
                   map_unit_to_params, params_to_unit, sample_base_params)

METHODS = ("dummy", "random", "ga", "bo", "sgd")


@dataclass(frozen=True)
class Budget:
    mode: str  # "evaluations" | "seconds"
    limit: float

    def __post_init__(self):
        if self.mode not in ("evaluations", "seconds"):
            raise ValueError(f"unknown budget mode: {self.mode!r}")
        if not self.limit > 0:
            raise ValueError("budget limit must be > 0")


class BudgetMeter:
    """Tracks consumed budget; evaluations mode counts evaluate() calls,
    seconds mode counts wall time."""

    def __init__(self, budget: Budget):
        self.budget = budget
        self._evals = 0
        self._start = time.perf_counter()

    def charge_eval(self):
        self._evals += 1

    def consumed(self) -> float:
        if self.budget.mode == "evaluations":
            return float(self._evals)
        return time.perf_counter() - self._start

    def exhausted(self) -> bool:
        return self.consumed() >= self.budget.limit


@dataclass(frozen=True, eq=False)
class HistoryEntry:
    consumed: float
    params: np.ndarray
    cost: float
    success: bool


class OptRunRecord:
    """Anytime history of one optimizer run."""

    def __init__(self, meta: dict | None = None):
        self.history: list[HistoryEntry] = []
        self.meta = dict(meta or {})

    def record(self, consumed: float, params: np.ndarray, cost: float, success: bool):
        if self.history and consumed < self.history[-1].consumed:
            raise ValueError("consumed budget must be non-decreasing")
        self.history.append(HistoryEntry(consumed, np.asarray(params, dtype=float).copy(),
                                         float(cost), bool(success)))

    @property
    def best_cost(self) -> float:
        if not self.history:
            return math.inf
        return min(e.cost for e in self.history)

    @property
    def best_params(self) -> np.ndarray | None:
        if not self.history:
            return None
        return min(self.history, key=lambda e: e.cost).params

    def best_cost_at(self, consumed: float, default: float) -> float:
        costs = [e.cost for e in self.history if e.consumed <= consumed]
        return min(costs) if costs else default

    def success_by(self, consumed: float) -> bool:
        return any(e.success for e in self.history if e.consumed <= consumed)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"meta": self.meta}, sort_keys=True)]
        for e in self.history:
            lines.append(json.dumps({
                "consumed": e.consumed,
                "params": [float(x) for x in e.params],
                "cost": e.cost,
                "success": e.success,
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "OptRunRecord":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty record")
        head = json.loads(lines[0])
        rec = OptRunRecord(meta=head.get("meta", {}))
        for ln in lines[1:]:
            d = json.loads(ln)
            rec.record(d["consumed"], np.array(d["params"]), d["cost"], d["success"])
        return rec


def make_evaluator(robot: RobotModel, task: Task, rng: np.random.Generator,
                   meter: BudgetMeter, limits: SolverLimits = SolverLimits()):
    """Wrap the solver pipeline as an evaluate callback that charges the
    budget and records into the given record."""

    def evaluate(params, record: OptRunRecord | None = None):
        meter.charge_eval()
        out = evaluate_base_pose(robot, task, params, rng, limits)
        if record is not None:
            record.record(meter.consumed(), params, out.cost, out.success)
        return out

    return evaluate


# ---------------------------------------------------------------- dummy / random

def opt_dummy(task: Task, evaluate) -> OptRunRecord:
    """Evaluate only the nominal base pose (zero parameter offset)."""
    rec = OptRunRecord()
    evaluate(np.zeros(task.base_domain.arity), rec)
    return rec


def opt_random(task: Task, meter: BudgetMeter, rng: np.random.Generator,
               evaluate) -> OptRunRecord:
    """Uniform sampling from the base domain until the budget runs out."""
    rec = OptRunRecord()
    while not meter.exhausted():
        evaluate(sample_base_params(task.base_domain, rng), rec)
    return rec


# ------------------------------------------------------------------------- GA

@dataclass(frozen=True)
class GAConfig:
    population_size: int = 25
    mutation_prob: float = 0.2690
    parents_mating: int = 14
    keep_parents: int = 12
    crossover: str = "single_point"
    keep_elites: int = 3

    def __post_init__(self):
        if not (self.keep_elites <= self.keep_parents <= self.population_size):
            raise ValueError("need keep_elites <= keep_parents <= population_size")
        if self.parents_mating > self.population_size:
            raise ValueError("parents_mating must be <= population_size")


MUTATION_SCALE = 0.1  # mutation stddev as a fraction of the gene half-range


def mutation_scales(domain) -> np.ndarray:
    """Per-gene mutation standard deviations for a base domain."""
    pos = MUTATION_SCALE * domain.half_extents
    if domain.arity == 3:
        return pos
    return np.concatenate([pos, np.full(3, MUTATION_SCALE * math.pi)])


def ga_mutate(b, rng: np.random.Generator, p: float, domain=None,
              scale=None) -> np.ndarray:
    """Independently perturb each gene with probability p by a Gaussian draw
    (stddev per gene from scale, default 1); clamp to the domain if given."""
    out = np.asarray(b, dtype=float).copy()
    s = np.ones_like(out) if scale is None else np.asarray(scale, dtype=float)
    for i in range(out.shape[0]):
        if rng.random() < p:
            out[i] += s[i] * rng.standard_normal()
    if domain is not None:
        out = clamp_params(out, domain)
    return out


def ga_crossover(a, b, n: int) -> np.ndarray:
    """Single-point crossover: first n genes of a, the rest of b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("parents must have equal arity")
    if not 1 <= n <= a.shape[0]:
        raise ValueError("crossover point out of range")
    return np.concatenate([a[:n], b[n:]])


def opt_ga(task: Task, meter: BudgetMeter, cfg: GAConfig,
           rng: np.random.Generator, evaluate) -> OptRunRecord:
    """Generational GA: rank selection, single-point crossover, per-gene
    Gaussian mutation, elitism via retained parents."""
    rec = OptRunRecord()
    domain = task.base_domain
    arity = domain.arity
    scales = mutation_scales(domain)

    pop: list[tuple[np.ndarray, float]] = []
    for _ in range(cfg.population_size):
        if meter.exhausted():
            return rec
        b = sample_base_params(domain, rng)
        out = evaluate(b, rec)
        pop.append((b, out.cost))

    while not meter.exhausted():
        pop.sort(key=lambda e: e[1])  # fitness = -cost, so ascending cost
        parents = pop[:cfg.parents_mating]
        nxt = [(b.copy(), c) for b, c in pop[:cfg.keep_parents]]
        n_children = cfg.population_size - cfg.keep_parents
        for _ in range(n_children):
            if meter.exhausted():
                return rec
            i = int(rng.integers(0, len(parents)))
            j = int(rng.integers(0, len(parents) - 1))
            if j >= i:
                j += 1
            n = int(rng.integers(1, arity + 1))
            child = ga_crossover(parents[i][0], parents[j][0], n)
            child = ga_mutate(child, rng, cfg.mutation_prob, domain, scales)
            out = evaluate(child, rec)
            nxt.append((child, out.cost))
        pop = nxt
    return rec


# ------------------------------------------------------------------------- BO

@dataclass(frozen=True)
class BOConfig:
    n_init: int = 31
    xi: float = 0.0973
    acquisition: str = "expected_improvement"
    acq_optim: str = "sampling"
    n_candidates: int = 1000
    init_gen: str = "hammersley"
    batch: int = 1
    length_scales: tuple = (0.05, 0.1, 0.2, 0.5, 1.0)

    def __post_init__(self):
        if self.n_init < 1 or self.xi < 0:
            raise ValueError("need n_init >= 1 and xi >= 0")


class GaussianProcess:
    """Zero-mean (after centering) GP with an isotropic squared-exponential
    kernel; the length scale is picked from a grid by marginal likelihood."""

    JITTER = 1e-6

    def __init__(self, length_scale: float, signal_var: float,
                 x_train: np.ndarray, y_mean: float, chol: np.ndarray,
                 alpha: np.ndarray, log_marginal: float):
        self.length_scale = length_scale
        self.signal_var = signal_var
        self._x = x_train
        self._y_mean = y_mean
        self._chol = chol
        self._alpha = alpha
        self.log_marginal = log_marginal

    @staticmethod
    def _kernel(a, b, ls, var):
        d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
        return var * np.exp(-0.5 * d2 / (ls * ls))

    @classmethod
    def fit(cls, x, y, length_scales=(0.05, 0.1, 0.2, 0.5, 1.0)) -> "GaussianProcess":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.shape[0] < 1 or x.shape[0] != y.shape[0]:
            raise ValueError("need matching, non-empty training data")
        y_mean = float(np.mean(y))
        yc = y - y_mean
        var = float(np.var(y))
        if var < 1e-6:
            var = 1e-6
        best = None
        n = x.shape[0]
        for ls in length_scales:
            k = cls._kernel(x, x, ls, var)
            k[np.diag_indices(n)] += cls.JITTER * var
            try:
                chol = np.linalg.cholesky(k)
            except np.linalg.LinAlgError:
                continue
            alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, yc))
            lml = (-0.5 * yc @ alpha
                   - np.sum(np.log(np.diag(chol)))
                   - 0.5 * n * math.log(2.0 * math.pi))
            if best is None or lml > best.log_marginal:
                best = cls(ls, var, x, y_mean, chol, alpha, float(lml))
        if best is None:
            raise np.linalg.LinAlgError("no length scale gave a valid fit")
        return best

    def predict(self, x):
        """Posterior mean and standard deviation at query points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ks = self._kernel(self._x, x, self.length_scale, self.signal_var)
        mean = self._y_mean + ks.T @ self._alpha
        v = np.linalg.solve(self._chol, ks)
        var = self.signal_var * (1.0 + self.JITTER) - np.sum(v * v, axis=0)
        std = np.sqrt(np.maximum(var, 0.0))
        return mean, std


def gp_fit(x, y, length_scales=(0.05, 0.1, 0.2, 0.5, 1.0)) -> GaussianProcess:
    return GaussianProcess.fit(x, y, length_scales)


def expected_improvement(mean, stddev, best_y, xi=0.0):
    """Minimization EI with exploration offset xi; stddev 0 degenerates to
    max(best_y - mean - xi, 0)."""
    mean = np.asarray(mean, dtype=float)
    stddev = np.asarray(stddev, dtype=float)
    if np.any(stddev < 0):
        raise ValueError("stddev must be >= 0")
    imp = best_y - mean - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stddev > 0, imp / np.where(stddev > 0, stddev, 1.0), 0.0)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    ei = np.where(stddev > 0, imp * ndtr(z) + stddev * phi, np.maximum(imp, 0.0))
    return ei if ei.shape else float(ei)


def bo_initial_params(task: Task, n_init: int) -> list:
    """Hammersley points mapped into the base domain."""
    domain = task.base_domain
    pts = hammersley_points(n_init, domain.arity)
    return [map_unit_to_params(u, domain) for u in pts]


def opt_bo(task: Task, meter: BudgetMeter, cfg: BOConfig,
           rng: np.random.Generator, evaluate) -> OptRunRecord:
    """GP surrogate + expected-improvement over sampled candidates, seeded
    with a Hammersley design."""
    rec = OptRunRecord()
    domain = task.base_domain
    xs: list[np.ndarray] = []
    ys: list[float] = []

    def run(b):
        out = evaluate(b, rec)
        xs.append(params_to_unit(b, domain))
        ys.append(out.cost)

    for b in bo_initial_params(task, cfg.n_init):
        if meter.exhausted():
            return rec
        run(b)

    while not meter.exhausted():
        gp = gp_fit(np.stack(xs), np.array(ys), cfg.length_scales)
        cands = [sample_base_params(domain, rng) for _ in range(cfg.n_candidates)]
        units = np.stack([params_to_unit(c, domain) for c in cands])
        mean, std = gp.predict(units)
        ei = expected_improvement(mean, std, min(ys), cfg.xi)
        run(cands[int(np.argmax(ei))])
    return rec


# ------------------------------------------------------------------------ SGD

@dataclass(frozen=True)
class SGDConfig:
    alpha: float = 0.3923
    beta1: float = 0.8749
    beta2: float = 0.9739
    n_adam: int = 44
    n_ik: int = 33
    epsilon: float = 1e-8
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.alpha <= 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("invalid Adam hyperparameters")
        if self.n_adam < 1 or self.n_ik < 1:
            raise ValueError("iteration counts must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def zero(dim: int) -> "AdamState":
        return AdamState(np.zeros(dim), np.zeros(dim), 0)


def adam_step(state: AdamState, grad, cfg: SGDConfig):
    """One bias-corrected Adam update; returns (state, parameter delta)."""
    g = np.asarray(grad, dtype=float)
    if g.shape != state.m.shape:
        raise ValueError("gradient dimension mismatch")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    delta = -cfg.alpha * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return AdamState(m, v, t), delta


def ik_distance_gradient(robot: RobotModel, task: Task, b, iks,
                         weights: DistanceWeights = DistanceWeights(),
                         fd_step: float = 1e-5) -> np.ndarray:
    """Central finite differences of the summed goal distance with respect
    to the base parameters, holding the IK configurations fixed."""
    b = np.asarray(b, dtype=float).reshape(-1)
    domain = task.base_domain
    ee_poses = [forward_kinematics(robot, q) for q in iks]

    def total(params):
        base = base_pose_from_params(params, domain)
        return sum(pose_distance(compose(base, ee), g.pose, weights)
                   for ee, g in zip(ee_poses, task.goals))

    grad = np.empty_like(b)
    for i in range(b.shape[0]):
        hi = b.copy()
        lo = b.copy()
        hi[i] += fd_step
        lo[i] -= fd_step
        grad[i] = (total(hi) - total(lo)) / (2.0 * fd_step)
    return grad


def opt_sgd(task: Task, meter: BudgetMeter, cfg: SGDConfig,
            rng: np.random.Generator, evaluate, robot: RobotModel,
            limits: SolverLimits = SolverLimits()) -> OptRunRecord:
    """Adam on the summed IK goal distance, restarted from random base
    parameters; each restart ends with one full pipeline evaluation."""
    rec = OptRunRecord()
    domain = task.base_domain
    weights = limits.weights
    while not meter.exhausted():
        b = sample_base_params(domain, rng)
        state = AdamState.zero(domain.arity)
        q_warm: list[np.ndarray | None] = [None] * len(task.goals)
        for _ in range(cfg.n_adam):
            base = base_pose_from_params(b, domain)
            all_within = True
            for gi, goal in enumerate(task.goals):
                res = solve_ik(robot, base, goal, rng,
                               max_steps=cfg.n_ik, restarts=1,
                               weights=weights, damping=limits.ik_damping,
                               step_clip=limits.ik_step_clip,
                               q_seed=q_warm[gi] if q_warm[gi] is not None
                               else robot.random_q(rng))
                q_warm[gi] = res.q
                if not res.converged:
                    all_within = False
            if all_within:
                break
            grad = ik_distance_gradient(robot, task, b, q_warm, weights, cfg.fd_step)
            state, delta = adam_step(state, grad, cfg)
            b = clamp_params(b + delta, domain)
        evaluate(b, rec)
    return rec


# ------------------------------------------------------------------- dispatch

def run_optimizer(method: str, robot: RobotModel, task: Task, seed: int,
                  budget: Budget, arity: int | None = None,
                  limits: SolverLimits = SolverLimits(),
                  ga_cfg: GAConfig = GAConfig(), bo_cfg: BOConfig = BOConfig(),
                  sgd_cfg: SGDConfig = SGDConfig()) -> OptRunRecord:
    """Run one optimizer on one task with one seed; returns its record."""
    if method not in METHODS:
        raise ValueError(f"unknown method: {method!r}")
    if arity is not None:
        task = task.with_arity(arity)
    rng = np.random.Generator(np.random.PCG64(seed))
    meter = BudgetMeter(budget)
    evaluate = make_evaluator(robot, task, rng, meter, limits)
    if method == "dummy":
        rec = opt_dummy(task, evaluate)
    elif method == "random":
        rec = opt_random(task, meter, rng, evaluate)
    elif method == "ga":
        rec = opt_ga(task, meter, ga_cfg, rng, evaluate)
    elif method == "bo":
        rec = opt_bo(task, meter, bo_cfg, rng, evaluate)
    else:
        rec = opt_sgd(task, meter, sgd_cfg, rng, evaluate, robot, limits)
    rec.meta.update({
        "task_id": task.id,
        "method": method,
        "seed": seed,
        "arity": task.base_domain.arity,
        "budget_mode": budget.mode,
        "budget_limit": budget.limit,
        "fail_cost": task.fail_cost,
    })
    return rec
