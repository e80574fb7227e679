"""Command-line entry point: ``mlbandit --mode synthetic --T 1000 ... --out run.csv``."""
from __future__ import annotations

import argparse
import sys

from .harness import ExperimentConfig, run_experiment, summarize, write_csv
from .learner import ConfigError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mlbandit", description="Online multilabel learning with partial feedback.")
    p.add_argument("--mode", choices=("synthetic", "dataset"), default="synthetic")
    p.add_argument("--data", help="multilabel text file (dataset mode)")
    p.add_argument("--T", type=int, help="horizon; in dataset mode, truncate to the first T rows")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--surrogate", choices=("square", "logistic"), default="square")
    p.add_argument("--R", type=float, default=1.0, help="margin radius (logistic only)")
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--costs", choices=("constant", "decreasing"), default="constant")
    p.add_argument("--size-cap", type=int, dest="size_cap")
    p.add_argument("--task", choices=("subset", "ranking"), default="subset")
    p.add_argument("--delta", type=float, default=0.1)
    u = p.add_mutually_exclusive_group()
    u.add_argument("--U", type=float, dest="u_bound", help="known bound on the model norms")
    u.add_argument("--adaptive-U", action="store_true", dest="adaptive_u")
    p.add_argument("--diag", action="store_true", help="diagonal second-order matrices")
    p.add_argument("--algo", choices=("bandit", "obr"), default="bandit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.mode == "dataset" and not args.data:
        parser.print_usage(sys.stderr)
        print("mlbandit: error: --mode dataset requires --data", file=sys.stderr)
        return 2
    if args.mode == "synthetic" and args.T is None:
        parser.print_usage(sys.stderr)
        print("mlbandit: error: --mode synthetic requires --T", file=sys.stderr)
        return 2

    config = ExperimentConfig(
        mode=args.mode, data=args.data, T=args.T, K=args.K, d=args.d,
        surrogate=args.surrogate, R=1.0 if args.surrogate == "square" else args.R,
        a=args.a, costs=args.costs, size_cap=args.size_cap, delta=args.delta,
        u_bound=args.u_bound, adaptive_u=args.adaptive_u,
        matrix_mode="diagonal" if args.diag else "full",
        algorithm=args.algo, task=args.task, seed=args.seed, out=args.out,
    )
    try:
        config.validate()
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"mlbandit: error: {exc}", file=sys.stderr)
        return 2
    try:
        metrics = run_experiment(config)
        write_csv(metrics, args.out)
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"mlbandit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    summary = summarize(metrics)
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items())
          or "rounds=0")
    return 0


def main():
    sys.exit(cli_main())
