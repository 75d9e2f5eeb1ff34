"""Command line entry point: ``exterior-decay {check,solve,lift,verify,demo}``.

Exit status: 0 when every item is certified, 2 when some item is
inconclusive (1 with ``--strict``), 1 on any failure or error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, ExteriorDecayError
from .pipeline import SUBCOMMANDS, emit_outputs, exit_status, run_pipeline

log = logging.getLogger("exterior_decay")

DEMO_OUT = "demo-output"


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("exterior_decay") / "fixtures" / f"{name}.json"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--grid-n", type=int, default=None, help="number of grid nodes")
    common.add_argument("--tmax-mult", type=float, default=None, help="T_max as a multiple of t0")
    common.add_argument("--tol", type=float, default=None, help="fixed-point tolerance")
    common.add_argument("--seed", type=int, default=None, help="seed of the sampled family")
    common.add_argument("--strict", action="store_true", help="treat inconclusive items as failures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="exterior-decay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "verify the existence hypotheses",
        "solve": "check, then compute the fixed point and the ODE solution",
        "lift": "solve, then lift to the radial profile and test the PDE inequality",
        "verify": "lift plus compactness diagnostics and cross-checks",
        "demo": "run the reference instance end to end (no config needed)",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(doc: dict, args: argparse.Namespace) -> dict:
    doc = json.loads(json.dumps(doc))
    if args.grid_n is not None:
        doc.setdefault("grid", {})["N"] = args.grid_n
    if args.tmax_mult is not None:
        doc.setdefault("grid", {})["tmax_mult"] = args.tmax_mult
    if args.tol is not None:
        doc.setdefault("solver", {})["tol"] = args.tol
    if args.seed is not None:
        doc.setdefault("checker", {})["seed"] = args.seed
    return doc


def _load(args: argparse.Namespace):
    if args.command == "demo" and args.config is None:
        path = fixture_path("canonical-1")
    elif args.config is None:
        raise ConfigError("--config is required for this subcommand")
    else:
        path = args.config
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    return parse_config(_overrides(doc, args))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load(args)
        result = run_pipeline(config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ExteriorDecayError as exc:
        print(f"{type(exc).__name__} during {args.command}: {exc}", file=sys.stderr)
        return 1
    code = exit_status(result.overall, args.strict)
    out = args.out
    if out is None and args.command == "demo":
        out = Path(DEMO_OUT)
    if out is not None:
        for path in emit_outputs(result, out, code):
            print(f"wrote {path}")
    else:
        doc = dict(result.report, exit_status=code)
        print(json.dumps(doc, indent=2, sort_keys=True))
    summary = result.report.get("solution", {}).get("b0_times_t_last_decade")
    if summary:
        print(f"b0(t)*t on the last decade: {summary['value']:.8f} +- {summary['error']:.1e}")
    failing = [k for k, v in result.verdicts.items() if v != "pass"]
    print(f"overall: {result.overall} (exit {code})" + (f"; not passing: {', '.join(failing)}" if failing else ""))
    return code


if __name__ == "__main__":
    sys.exit(main())
