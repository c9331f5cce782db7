"""Command-line entry point: ``fas-mobo {run,oracle,report,validate}``."""
from __future__ import annotations

import argparse
import sys

from ..errors import SpaceTooLargeError, SpecValidationError
from .experiment import load_experiment, oracle, report, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PARTIAL = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fas-mobo", description="Fluid-antenna ISAC multi-objective BO experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every (method, seed) cell of an experiment")
    run.add_argument("spec")
    run.add_argument("--out", help="output directory (default: the spec's 'out')")
    run.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")

    orc = sub.add_parser("oracle", help="exhaustive Pareto front and HV* per scene and slot")
    orc.add_argument("spec")
    orc.add_argument("--cap", type=int, default=None, help="largest space to enumerate")
    orc.add_argument("--out", help="output directory (default: the spec's 'out')")

    rep = sub.add_parser("report", help="emit plot-data CSVs from a result directory")
    rep.add_argument("dir")

    val = sub.add_parser("validate", help="load and validate a spec without running it")
    val.add_argument("spec")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            spec = load_experiment(args.spec)
            print(f"ok: {len(spec.methods)} method(s) x {len(spec.seeds)} seed(s), mode {spec.mode}")
            return EXIT_OK
        if args.command == "run":
            spec = load_experiment(args.spec)
            code = run_experiment(spec, args.out, args.jobs)
            if code != EXIT_OK:
                print("some cells failed; see summary.json", file=sys.stderr)
            return code
        if args.command == "oracle":
            spec = load_experiment(args.spec)
            print(oracle(spec, args.out, args.cap))
            return EXIT_OK
        for path in report(args.dir):
            print(path)
        return EXIT_OK
    except SpecValidationError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SpaceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
