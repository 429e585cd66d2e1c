"""Command line entry point.

Verbs: compare-queries, sweep, diagnose, scale-check. Each takes
--config <path> plus optional --out, --seed (overrides the config's
master seed) and --threads. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.

All configuration lives in the JSON file or the flags; no environment
variables are consulted.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import ConfigError, PaqLearnError
from .harness import EXPERIMENTS, load_config, run_experiment

_VERB_EXPERIMENTS = {
    "compare-queries": ("compare_queries",),
    "sweep": ("sweep_d", "sweep_r", "sweep_m"),
    "diagnose": ("diagnostics",),
    "scale-check": ("scale_check",),
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="paqlearn",
        description="Simulation harness for low-rank metric learning "
        "from perceptual adjustment queries.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERB_EXPERIMENTS:
        p = sub.add_parser(verb, help=f"run a {verb.replace('-', ' ')} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--seed", type=int, default=None, help="master seed override"
        )
        p.add_argument(
            "--threads", type=int, default=1, help="trial parallelism cap"
        )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        allowed = _VERB_EXPERIMENTS[args.verb]
        if cfg.experiment not in allowed:
            raise ConfigError(
                f"verb {args.verb!r} expects experiment in {allowed}, "
                f"got {cfg.experiment!r}"
            )
        if args.seed is not None:
            cfg = replace(cfg, master_seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        results, paths, passed = run_experiment(cfg, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PaqLearnError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    for path in paths:
        print(f"wrote {path}")
    if not passed:
        print("one or more checks failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
