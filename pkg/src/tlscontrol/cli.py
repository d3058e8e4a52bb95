"""Command-line entry point.

Exit codes: 0 success, 2 validation refusal, 1 any other error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    PRESETS,
    ScenarioError,
    ValidationRefused,
    emit_csv,
    load_scenario,
    preset,
    run,
    validation_grid,
)
from .trajectories import validate

EXIT_OK, EXIT_ERROR, EXIT_REFUSED = 0, 1, 2


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def _report_summary(result, out):
    if result.summary is not None:
        json.dump(result.summary.as_dict(), out, indent=2)
        out.write("\n")


def _cmd_validate(args, out):
    s = _read(args.config)
    report = validate(s.population, s.phase, validation_grid(s), system=s.system)
    out.write(f"{report}\n")
    return EXIT_OK if report.accepted else EXIT_REFUSED


def _execute(s, args, out, rwa, full):
    result = run(s, override_validation=args.override_validation, rwa=rwa, full=full)
    if not result.validation.accepted:
        print(f"warning: running despite validation failures:\n{result.validation}", file=sys.stderr)
    if args.out:
        rows = emit_csv(result, args.out)
        out.write(f"wrote {rows} rows to {args.out}\n")
    _report_summary(result, out)
    return EXIT_OK


def _cmd_synthesize(args, out):
    return _execute(_read(args.config), args, out, rwa=False, full=False)


def _cmd_simulate(args, out):
    s = _read(args.config)
    if args.rwa or args.full:
        return _execute(s, args, out, rwa=args.rwa, full=args.full)
    return _execute(s, args, out, rwa=None, full=None)


def _cmd_preset(args, out):
    if args.dump:
        json.dump(PRESETS[args.name], out, indent=2)
        out.write("\n")
        return EXIT_OK
    return _execute(preset(args.name), args, out, rwa=None, full=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlscontrol",
        description="Reverse-engineered control fields for two-level systems.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--override-validation",
        action="store_true",
        help="run even when the trajectory pair fails validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario's trajectories")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synthesize", parents=[common], help="sample the control field to CSV")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("simulate", parents=[common], help="synthesize and integrate")
    p.add_argument("config")
    p.add_argument("--rwa", action="store_true", help="integrate the RWA equations")
    p.add_argument("--full", action="store_true", help="integrate with the full real field")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("preset", parents=[common], help="run a built-in figure scenario")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out")
    p.add_argument("--dump", action="store_true", help="print the preset's scenario document and exit")
    p.set_defaults(func=_cmd_preset)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for validation refusal
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except ValidationRefused as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_REFUSED
    except (ScenarioError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
