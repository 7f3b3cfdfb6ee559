"""Command-line entry point ``paesdre``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .autoencoder import TrainingDivergedError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def build_parser():
    parser = argparse.ArgumentParser(prog="paesdre", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(harness.COMMANDS))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--r", type=int, help="reduced dimension")
    parser.add_argument("--q", type=int, help="number of clusters (replaces the q list)")
    parser.add_argument("--p", type=int, help="expansion order (replaces the p list)")
    parser.add_argument("--gamma", type=float,
                        help="control weight (replaces the gamma list and comparison gamma)")
    parser.add_argument("--ts", type=float, help="startup time (replaces the t_s list)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--models", nargs="*", help="model files for model-summary")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def make_config(args):
    d = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise harness.ConfigError(f"{args.config}: {exc}") from exc
        if not isinstance(d, dict):
            raise harness.ConfigError(f"{args.config}: top level must be an object")
    overrides = {
        "r": args.r, "seed": args.seed, "epochs": args.epochs, "out": args.out,
        "workers": args.workers,
        "q_list": None if args.q is None else [args.q],
        "p_list": None if args.p is None else [args.p],
        "gammas": None if args.gamma is None else [args.gamma],
        "compare_gamma": args.gamma,
        "t_s_list": None if args.ts is None else [args.ts],
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    return harness.ExperimentConfig.from_dict(d)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        fn = harness.COMMANDS[args.command]
        if args.command == "model-summary" and args.models:
            result = fn(cfg, args.models)
        else:
            result = fn(cfg)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.NumericalFailure, TrainingDivergedError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(harness.io.to_plain(result), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
