"""Benchmark runner over (task x method x seed) cells with fixed budgets,
bootstrap statistics, convergence curves and report emission."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .optimizers import METHODS, Budget, OptRunRecord, run_optimizer
from .robot import load_robot, reference_robot
from .solver import SolverLimits
from .task import load_task

N_CHECKPOINTS = 32


@dataclass(frozen=True)
class BenchConfig:
    tasks: tuple            # task file paths
    methods: tuple
    seeds: tuple = (0, 1, 2, 3, 4)
    budget: Budget = field(default_factory=lambda: Budget("evaluations", 200))
    arity: int = 3
    parallelism: int = 1
    out_dir: str = "records"
    robot: str | None = None  # path; None selects the packaged reference arm

    def __post_init__(self):
        if not self.tasks or not self.methods or not self.seeds:
            raise ValueError("tasks, methods and seeds must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method: {m!r}")
        if self.arity not in (3, 6):
            raise ValueError("arity must be 3 or 6")

    @staticmethod
    def from_dict(d: dict) -> "BenchConfig":
        budget = d.get("budget", {"mode": "evaluations", "limit": 200})
        parallelism = int(os.environ.get("BPO_THREADS", d.get("parallelism", 1)))
        return BenchConfig(
            tasks=tuple(d["tasks"]),
            methods=tuple(d["methods"]),
            seeds=tuple(d.get("seeds", (0, 1, 2, 3, 4))),
            budget=Budget(budget["mode"], budget["limit"]),
            arity=int(d.get("arity", 3)),
            parallelism=parallelism,
            out_dir=d.get("out_dir", "records"),
            robot=d.get("robot"),
        )

    @staticmethod
    def load(path) -> "BenchConfig":
        with open(path) as f:
            return BenchConfig.from_dict(json.load(f))


def cell_seed(task_id: str, method: str, seed: int) -> int:
    """Stable 64-bit PRNG seed from the cell coordinates (SHA-256 prefix)."""
    digest = hashlib.sha256(f"{task_id}|{method}|{seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _load_cell_robot(robot_path):
    return load_robot(robot_path) if robot_path else reference_robot()


def run_cell(task_path: str, method: str, seed: int, budget: Budget,
             arity: int, robot_path: str | None = None,
             limits: SolverLimits = SolverLimits()) -> OptRunRecord:
    robot = _load_cell_robot(robot_path)
    task = load_task(task_path)
    rec = run_optimizer(method, robot, task, cell_seed(task.id, method, seed),
                        budget, arity=arity, limits=limits)
    rec.meta["seed"] = seed  # bench-level seed, not the derived PRNG seed
    return rec


def record_filename(task_id: str, method: str, seed: int) -> str:
    return f"{task_id}__{method}__{seed}.jsonl"


def _run_cell_to_disk(args):
    task_path, method, seed, budget_mode, budget_limit, arity, robot_path, out_dir = args
    out_dir = Path(out_dir)
    task = load_task(task_path)
    name = record_filename(task.id, method, seed)
    try:
        rec = run_cell(task_path, method, seed, Budget(budget_mode, budget_limit),
                       arity, robot_path)
        (out_dir / name).write_text(rec.to_jsonl())
        return name, None
    except Exception:  # cell isolation: record the failure, keep going
        err = traceback.format_exc()
        (out_dir / (name + ".error")).write_text(err)
        return name, err


def run_benchmark(cfg: BenchConfig) -> list:
    """Run every (task, method, seed) cell, persisting one record file per
    cell; failing cells are isolated into .error files."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(t, m, s, cfg.budget.mode, cfg.budget.limit, cfg.arity, cfg.robot,
             str(out_dir))
            for t in cfg.tasks for m in cfg.methods for s in cfg.seeds]
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_cell_to_disk, jobs))
    else:
        results = [_run_cell_to_disk(j) for j in jobs]
    return results


def load_records(records_dir) -> list:
    recs = []
    for path in sorted(Path(records_dir).glob("*.jsonl")):
        recs.append(OptRunRecord.from_jsonl(path.read_text()))
    if not recs:
        raise ValueError(f"no record files in {records_dir}")
    return recs


# ------------------------------------------------------------------ statistics

@dataclass(frozen=True)
class SummaryStats:
    mean: float
    ci_low: float
    ci_high: float
    n_resamples: int


def bootstrap_ci(samples, n_resamples: int = 1000,
                 rng: np.random.Generator | None = None,
                 level: float = 0.95) -> SummaryStats:
    """Percentile bootstrap of the mean."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    mean = float(np.mean(x))
    idx = rng.integers(0, x.size, size=(n_resamples, x.size))
    means = np.mean(x[idx], axis=1)
    lo_q = (1.0 - level) / 2.0
    lo = float(np.quantile(means, lo_q))
    hi = float(np.quantile(means, 1.0 - lo_q))
    return SummaryStats(mean=mean, ci_low=min(lo, mean), ci_high=max(hi, mean),
                        n_resamples=n_resamples)


def success_rate(records, consumed: float) -> float:
    """Fraction of cells with a successful evaluation by the checkpoint."""
    flags = [1.0 if r.success_by(consumed) else 0.0 for r in records]
    return float(np.mean(flags))


def checkpoint_grid(limit: float, n: int = N_CHECKPOINTS) -> np.ndarray:
    """Logarithmically spaced budget checkpoints ending at the limit."""
    return np.geomspace(max(1.0, limit * 1e-3), limit, n)


@dataclass(frozen=True)
class ConvergenceCurve:
    method: str
    arity: int
    grid: np.ndarray
    cost_stats: tuple      # SummaryStats per checkpoint
    success_stats: tuple


def build_curves(records, grid=None, n_resamples: int = 1000) -> dict:
    """Per-method anytime curves: bootstrap stats of the best cost so far
    and of the success rate at each budget checkpoint."""
    if not records:
        raise ValueError("no records")
    modes = {r.meta.get("budget_mode") for r in records}
    if len(modes) != 1:
        raise ValueError("records mix budget modes")
    if grid is None:
        limit = max(r.meta["budget_limit"] for r in records)
        grid = checkpoint_grid(limit)
    grid = np.asarray(grid, dtype=float)
    max_consumed = max((e.consumed for r in records for e in r.history), default=0.0)
    if grid[-1] > max(max_consumed, max(r.meta["budget_limit"] for r in records)):
        raise ValueError("checkpoint grid extends past the recorded budget")
    by_method: dict[str, list] = {}
    for r in records:
        by_method.setdefault(r.meta["method"], []).append(r)
    curves = {}
    for method, recs in sorted(by_method.items()):
        rng = np.random.Generator(np.random.PCG64(cell_seed("curves", method, 0)))
        cost_stats = []
        succ_stats = []
        for c in grid:
            costs = [r.best_cost_at(c, default=r.meta["fail_cost"]) for r in recs]
            flags = [1.0 if r.success_by(c) else 0.0 for r in recs]
            cost_stats.append(bootstrap_ci(costs, n_resamples, rng))
            succ_stats.append(bootstrap_ci(flags, n_resamples, rng))
        arity = recs[0].meta.get("arity", 3)
        curves[method] = ConvergenceCurve(method, arity, grid,
                                          tuple(cost_stats), tuple(succ_stats))
    return curves


def final_summary(records) -> dict:
    """Per-method end-of-budget aggregates, with and without failed cells."""
    by_method: dict[str, list] = {}
    for r in records:
        by_method.setdefault(r.meta["method"], []).append(r)
    out = {}
    for method, recs in sorted(by_method.items()):
        rng = np.random.Generator(np.random.PCG64(cell_seed("final", method, 0)))
        all_costs = [r.best_cost_at(r.meta["budget_limit"], r.meta["fail_cost"])
                     for r in recs]
        solved = [r.best_cost_at(r.meta["budget_limit"], r.meta["fail_cost"])
                  for r in recs if r.success_by(r.meta["budget_limit"])]
        flags = [1.0 if r.success_by(r.meta["budget_limit"]) else 0.0 for r in recs]
        out[method] = {
            "cost_all_cells": bootstrap_ci(all_costs, rng=rng).__dict__,
            "cost_solved_only": (bootstrap_ci(solved, rng=rng).__dict__
                                 if solved else None),
            "success_rate": bootstrap_ci(flags, rng=rng).__dict__,
            "n_cells": len(recs),
        }
    return out


# -------------------------------------------------------------------- reports

CSV_COLUMNS = ("method", "arity", "checkpoint", "mean_cost", "cost_lo",
               "cost_hi", "success", "succ_lo", "succ_hi")


def curves_to_rows(curves: dict) -> list:
    rows = []
    for method in sorted(curves):
        cv = curves[method]
        for i, c in enumerate(cv.grid):
            cs = cv.cost_stats[i]
            ss = cv.success_stats[i]
            rows.append({
                "method": method, "arity": cv.arity, "checkpoint": float(c),
                "mean_cost": cs.mean, "cost_lo": cs.ci_low, "cost_hi": cs.ci_high,
                "success": ss.mean, "succ_lo": ss.ci_low, "succ_hi": ss.ci_high,
            })
    return rows


def rows_to_curves(rows) -> dict:
    by_method: dict[str, list] = {}
    for r in rows:
        by_method.setdefault(r["method"], []).append(r)
    curves = {}
    for method, rs in by_method.items():
        rs.sort(key=lambda r: r["checkpoint"])
        curves[method] = ConvergenceCurve(
            method, int(rs[0]["arity"]),
            np.array([r["checkpoint"] for r in rs]),
            tuple(SummaryStats(r["mean_cost"], r["cost_lo"], r["cost_hi"], 0) for r in rs),
            tuple(SummaryStats(r["success"], r["succ_lo"], r["succ_hi"], 0) for r in rs))
    return curves


_SVG_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _svg_chart(curves, which: str, x0, y0, w, h, title: str) -> list:
    methods = sorted(curves)
    xs = curves[methods[0]].grid
    lx = np.log10(np.maximum(xs, 1e-9))
    x_lo, x_hi = float(lx[0]), float(lx[-1])
    vals = []
    for m in methods:
        stats = curves[m].cost_stats if which == "cost" else curves[m].success_stats
        vals.extend([s.ci_low for s in stats] + [s.ci_high for s in stats])
    y_lo, y_hi = min(vals), max(vals)
    if y_hi - y_lo < 1e-9:
        y_hi = y_lo + 1.0

    def px(x):
        return x0 + (x - x_lo) / max(x_hi - x_lo, 1e-9) * w

    def py(y):
        return y0 + h - (y - y_lo) / (y_hi - y_lo) * h

    parts = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" '
             f'fill="none" stroke="#888"/>',
             f'<text x="{x0}" y="{y0 - 6}" font-size="12">{title}</text>']
    for k, m in enumerate(methods):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        stats = curves[m].cost_stats if which == "cost" else curves[m].success_stats
        band = [f"{px(lx[i]):.2f},{py(stats[i].ci_high):.2f}" for i in range(len(lx))]
        band += [f"{px(lx[i]):.2f},{py(stats[i].ci_low):.2f}"
                 for i in range(len(lx) - 1, -1, -1)]
        parts.append(f'<polygon points="{" ".join(band)}" fill="{color}" '
                     f'fill-opacity="0.15" stroke="none"/>')
        line = " ".join(f"{px(lx[i]):.2f},{py(stats[i].mean):.2f}"
                        for i in range(len(lx)))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{x0 + w + 8}" y="{y0 + 14 + 16 * k}" '
                     f'font-size="11" fill="{color}">{m}</text>')
    return parts


def curves_to_svg(curves: dict) -> str:
    """Two stacked line charts (best cost, success rate) with CI bands."""
    width, height = 640, 480
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">']
    parts += _svg_chart(curves, "cost", 50, 30, 480, 180, "best cost (s)")
    parts += _svg_chart(curves, "success", 50, 270, 480, 180, "success rate")
    parts.append("</svg>")
    return "\n".join(parts)


def emit_report(curves: dict, fmt: str, path) -> None:
    """Write the curves as CSV rows, a JSON document or an SVG figure."""
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(curves_to_rows(curves))
    elif fmt == "json":
        path.write_text(json.dumps({"curves": curves_to_rows(curves)}, indent=2))
    elif fmt == "svg":
        path.write_text(curves_to_svg(curves))
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
