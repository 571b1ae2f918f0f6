"""Command-line front end: run experiments, check rates, validate scenes.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource guard tripped.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .experiment import (ConfigError, METHODS, bundled_scenario_path,
                         bundled_scenarios, load_config, measure_rate, run,
                         validate)
from .geometry import GeometryError
from .go_phase import GoPhaseError
from .kirchhoff import KirchhoffError
from .krylov import BreakdownError
from .multiscatter import ResourceGuardError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_GUARD = 4

_NUMERICAL = (GoPhaseError, KirchhoffError, BreakdownError, GeometryError,
              np.linalg.LinAlgError)


def _add_source(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="path to a YAML experiment config")
    group.add_argument("--scenario", choices=bundled_scenarios(),
                       help="name of a bundled scenario")


def _load(args) -> tuple:
    path = args.config if args.config else bundled_scenario_path(args.scenario)
    cfg = load_config(path)
    raw = yaml.safe_load(Path(path).read_text())
    return cfg, raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiscat",
        description="Multiple-scattering convergence experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured solver comparison")
    _add_source(p_run)
    p_run.add_argument("--method", action="append", choices=METHODS,
                       help="restrict to this method (repeatable)")
    p_run.add_argument("--output", help="output directory override")

    p_rate = sub.add_parser(
        "rate", help="measured vs. predicted round-trip decay rate")
    _add_source(p_rate)
    p_rate.add_argument("--window", nargs=2, type=int, default=[10, 20],
                        metavar=("M_LO", "M_HI"),
                        help="iterate window for the empirical fit")

    p_val = sub.add_parser("validate", help="geometric sanity report")
    _add_source(p_val)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, raw = _load(args)
        if args.command == "run":
            if args.method:
                cfg.methods = list(dict.fromkeys(args.method))
            if args.output:
                cfg.output = args.output
            artifacts = run(cfg, raw_config=raw)
            for method, path in artifacts.items():
                print(f"{method}: {path}")
        elif args.command == "rate":
            result = measure_rate(cfg, *args.window)
            result["empirical_ratio"] = [result["empirical_ratio"].real,
                                         result["empirical_ratio"].imag]
            print(json.dumps(result, indent=2))
        elif args.command == "validate":
            report = validate(cfg)
            for line in report.lines():
                print(line)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
