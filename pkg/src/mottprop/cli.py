"""Command line entry point: ``mottprop <verb> [--config PATH] [--out DIR] [--full] [--seed N]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .cfm import SchemeError
from .config import ConfigError, ExperimentConfig, load_config
from .krylov import KrylovBreakdown
from .stepper import PropagationError
from . import experiments

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

VERBS = {
    "simulate": experiments.run_simulate,
    "benchmark": experiments.run_benchmark,
    "convergence": experiments.run_convergence,
    "ground-state": experiments.run_ground_state,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mottprop",
                                description="Driven Hubbard chain propagation experiments.")
    p.add_argument("verb", choices=sorted(VERBS))
    p.add_argument("--config", type=Path, help="INI experiment file (defaults: 6-site transistor)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--full", action="store_true", help="use the 8-site chain")
    p.add_argument("--seed", type=int, default=None, help="ground-state start vector seed")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _echo(verb: str, result) -> None:
    if verb == "simulate":
        result = result["summary"]
    if isinstance(result, dict):
        for k, v in result.items():
            print(f"{k} = {v}")
    else:
        print(f"{len(result)} rows written")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(full=args.full, seed=args.seed)
        if args.verb == "benchmark":
            # the reference-tolerance precondition only binds for benchmark runs
            from dataclasses import replace
            cfg = replace(cfg, run=replace(cfg.run, mode="benchmark"))
        cfg.validate()
    except (ConfigError, SchemeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = VERBS[args.verb](cfg, args.out)
    except (PropagationError, KrylovBreakdown, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _echo(args.verb, result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
