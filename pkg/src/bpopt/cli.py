"""Command-line interface: task generation, single optimizer runs, batch
benchmarks, statistics and SVG plots."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (BenchConfig, build_curves, emit_report, load_records,
                    run_benchmark, run_cell)
from .optimizers import METHODS, Budget
from .robot import load_robot, reference_robot
from .task import GENERATORS

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="bpopt", description="Robot base-pose optimization toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate benchmark tasks")
    g.add_argument("--family", required=True, choices=sorted(GENERATORS))
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    o = sub.add_parser("optimize", help="run one optimizer on one task")
    o.add_argument("--task", required=True)
    o.add_argument("--method", required=True, choices=METHODS)
    o.add_argument("--arity", type=int, choices=(3, 6), default=3)
    grp = o.add_mutually_exclusive_group()
    grp.add_argument("--budget-evals", type=int)
    grp.add_argument("--budget-secs", type=float)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True, help="record file (JSON lines)")
    o.add_argument("--robot", help="robot spec file (default: packaged 6R arm)")

    b = sub.add_parser("bench", help="run a benchmark config")
    b.add_argument("--config", required=True)

    s = sub.add_parser("stats", help="aggregate persisted records")
    s.add_argument("--records", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("csv", "json"), default="csv")

    pl = sub.add_parser("plot", help="render convergence curves as SVG")
    pl.add_argument("--records", required=True)
    pl.add_argument("--out", required=True)
    return p


def _cmd_gen(args) -> int:
    out = Path(args.out) / args.family
    out.mkdir(parents=True, exist_ok=True)
    from .task import save_task
    gen = GENERATORS[args.family]
    for k in range(args.count):
        seed = args.seed + k
        save_task(gen(seed), out / f"{seed}.json")
    print(f"wrote {args.count} {args.family} task(s) to {out}")
    return EXIT_OK


def _cmd_optimize(args) -> int:
    if args.budget_secs is not None:
        budget = Budget("seconds", args.budget_secs)
    else:
        budget = Budget("evaluations", args.budget_evals or 200)
    rec = run_cell(args.task, args.method, args.seed, budget, args.arity,
                   robot_path=args.robot)
    Path(args.out).write_text(rec.to_jsonl())
    print(f"best cost {rec.best_cost:.4g} after {len(rec.history)} evaluation(s)")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = BenchConfig.load(args.config)
    results = run_benchmark(cfg)
    failures = [name for name, err in results if err]
    print(f"{len(results) - len(failures)}/{len(results)} cells ok; "
          f"records in {cfg.out_dir}")
    for name in failures:
        print(f"cell failed: {name}", file=sys.stderr)
    return EXIT_OK


def _cmd_stats(args) -> int:
    curves = build_curves(load_records(args.records))
    emit_report(curves, args.format, args.out)
    print(f"wrote {args.format} report to {args.out}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    curves = build_curves(load_records(args.records))
    emit_report(curves, "svg", args.out)
    print(f"wrote SVG plot to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "optimize": _cmd_optimize,
    "bench": _cmd_bench,
    "stats": _cmd_stats,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as e:
        print(f"bpopt: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
