"""Command-line front end.

Subcommands map onto experiment modes:

  run-1d           scalar closed-form trace           (mode scalar1d)
  run-nd           multi-dimensional Gaussian run     (mode matrixNd)
  verify-rates     geometric rate certificates          (mode rates)
  compare-starts   three starting couplings, ranked   (mode matrixNd)
  sinkhorn-oracle  grid-plan correlation oracle       (mode sinkhornOracle)
  mc-check         bridge-sampling arbitration        (mode mcCheck)

Exit codes: 0 all hard checks passed, 1 a numerical check failed,
2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .experiments import compare_starts, run_experiment

_SUBCOMMAND_MODE = {
    "run-1d": "scalar1d",
    "run-nd": "matrixNd",
    "verify-rates": "rates",
    "compare-starts": "matrixNd",
    "sinkhorn-oracle": "sinkhornOracle",
    "mc-check": "mcCheck",
}


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file (flags override it)")
    sub.add_argument("--seed", type=int, help="random seed (default 0)")
    sub.add_argument("--out", help="output basename for <out>.csv / <out>.json")
    sub.add_argument("--rounds", type=int, help="number of rounds")
    sub.add_argument("--epsilon", type=float, help="prior volatility")
    sub.add_argument("--dim", type=int, help="dimension (run-nd family)")
    sub.add_argument("--start", choices=("imf", "ipf", "ind-p0", "custom"),
                     help="starting coupling")
    sub.add_argument("--grid-n", type=int, dest="grid_n",
                     help="interior time points (default 1)")
    sub.add_argument("--instances", type=int,
                     help="instance count for verification modes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipmf",
        description="Closed-form iterative proportional Markovian fitting "
                    "on Gaussian marginals, with verification harnesses.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run-1d", "scalar closed-form run, CSV trace per round"),
        ("run-nd", "multi-dimensional Gaussian run against the fixed-point solution"),
        ("verify-rates", "check certified rate envelopes on random instances"),
        ("compare-starts", "run imf/ipf/ind-p0 starts on one problem"),
        ("sinkhorn-oracle", "grid entropic-plan correlation oracle"),
        ("mc-check", "Monte-Carlo arbitration of the bridge covariance blocks"),
    ]:
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_flags(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {
        "mode": _SUBCOMMAND_MODE[args.command],
        "seed": args.seed,
        "output_path": args.out,
        "rounds": args.rounds,
        "epsilon": args.epsilon,
        "dimension": args.dim,
        "start": args.start,
        "grid_n": args.grid_n,
        "instances": args.instances,
    }
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "compare-starts":
            report = compare_starts(config)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0 if all(report["flags"].values()) else 1
        result = run_experiment(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    printable = {k: v for k, v in result.summary.items() if k != "details"}
    print(json.dumps(printable, indent=2, sort_keys=True))
    if result.csv_path is not None:
        print(f"trace written to {result.csv_path}", file=sys.stderr)
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
