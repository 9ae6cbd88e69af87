"""Command-line entry point.

    swarmfield run <scenario.json>... [--out DIR] [--jobs K]
    swarmfield catalog
    swarmfield validate <scenario.json>...

Exit codes: 0 all assertions passed, 1 an assertion failed, 2 schema
error, 3 runtime model error. SWARMFIELD_SEED overrides scenario seeds.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import SchemaError, SwarmfieldError
from .runner import list_catalog, run_scenario
from .scenario import parse_scenario

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmfield",
        description="scenario-driven closed-loop density control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute scenario files")
    run_p.add_argument("scenarios", nargs="+", metavar="scenario.json")
    run_p.add_argument("--out", default=None, help="output directory root")
    run_p.add_argument("--jobs", type=int, default=1, metavar="K",
                       help="run up to K scenarios concurrently")

    sub.add_parser("catalog", help="list initializers, controllers, fields, analyses")

    val_p = sub.add_parser("validate", help="check scenario files against the schema")
    val_p.add_argument("scenarios", nargs="+", metavar="scenario.json")
    return parser


def _run_one(path: str, out_root: str | None) -> int:
    """Run one scenario file; errors become exit codes, not exceptions,
    so a bad file in a --jobs batch cannot abort its siblings."""
    try:
        scn = parse_scenario(path)
        seed_override = os.environ.get("SWARMFIELD_SEED")
        if seed_override is not None:
            scn.seed = int(seed_override)
            if scn.particles is not None:
                scn.particles["seed"] = scn.seed
        out_dir = Path(out_root) / scn.name if out_root else None
        report = run_scenario(scn, out_dir)
    except SchemaError as ex:
        print(f"{path}: schema error: {ex}", file=sys.stderr)
        return 2
    except SwarmfieldError as ex:
        print(f"{path}: model error: {type(ex).__name__}: {ex}", file=sys.stderr)
        return 3
    for res in report.assertion_results:
        status = "PASS" if res.get("passed") else "FAIL"
        print(f"[{status}] {scn.name}: {res['quantity']} = {res.get('value')!r}")
    print(f"{scn.name}: outputs in {report.out_dir}")
    return report.exit_code


def _run_command(args) -> int:
    if args.jobs > 1 and len(args.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one, args.scenarios,
                                  [args.out] * len(args.scenarios)))
        return max(codes)
    return max(_run_one(path, args.out) for path in args.scenarios)


def _validate_command(args) -> int:
    try:
        for path in args.scenarios:
            scn = parse_scenario(path)
            print(f"{path}: ok (scenario {scn.name!r})")
    except SchemaError as ex:
        print(f"schema error: {ex}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "catalog":
        print(list_catalog(), end="")
        return 0
    if args.command == "validate":
        return _validate_command(args)
    return _run_command(args)


if __name__ == "__main__":
    sys.exit(main())
