"""Batch command-line front end.

JSON in, JSON and CSV out, no interactive mode. This module imports only
the standard library at load time so that STATESPACE_KIT_THREADS can cap
the numeric backend's thread pool before numpy first loads; everything
numeric lives in _cliops and is imported inside main().

Exit codes: 0 success, 1 domain error (serialized into report.json),
2 usage or input errors (nothing is written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Dict, Optional

from .errors import SchemaError, ToolkitError

VERSION = "0.1.0"

COMMANDS = (
    "realize", "analyze", "stability", "structural", "place", "observer",
    "integral", "diophantine", "lqr", "srl", "margins", "simulate", "steer",
    "tpbvp", "mintime",
)

_BLAS_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _configure_threads() -> None:
    cap = os.environ.get("STATESPACE_KIT_THREADS")
    if not cap:
        return
    for var in _BLAS_ENV_VARS:
        os.environ.setdefault(var, cap)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statespace-kit",
        description="Linear-systems analysis and control synthesis, batch mode.",
    )
    parser.add_argument("command", choices=COMMANDS, help="subcommand to run")
    parser.add_argument("--input", required=True,
                        help="path to the JSON input document")
    parser.add_argument("--out", required=True,
                        help="directory for report.json and data files")
    parser.add_argument("--tol", action="append", default=[],
                        metavar="NAME=VALUE",
                        help="tolerance override, repeatable")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed echoed into the report and used by any "
                             "randomized check")
    return parser


def _parse_tolerances(pairs, command: str,
                      allowed) -> Optional[Dict[str, float]]:
    overrides: Dict[str, float] = {}
    for pair in pairs:
        name, sep, raw = pair.partition("=")
        if not sep or not name:
            print(f"error: --tol expects NAME=VALUE, got {pair!r}",
                  file=sys.stderr)
            return None
        if name not in allowed:
            known = ", ".join(allowed) if allowed else "none"
            print(f"error: command {command!r} does not honor tolerance "
                  f"{name!r} (recognized: {known})", file=sys.stderr)
            return None
        try:
            overrides[name] = float(raw)
        except ValueError:
            print(f"error: tolerance {name!r} needs a numeric value, "
                  f"got {raw!r}", file=sys.stderr)
            return None
    return overrides


def load_model(path: str):
    """Read a bare model document (the shared JSON schema) from a file."""
    from . import _cliops

    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"not valid JSON: {exc}", location="/")
    return _cliops.load_model_doc(doc)


def _report_text(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2,
                      ensure_ascii=True) + "\n"


def _write_outputs(outdir: str, report: dict, files: Dict[str, str]) -> None:
    os.makedirs(outdir, exist_ok=True)
    for name in sorted(files):
        with open(os.path.join(outdir, name), "w", newline="") as fh:
            fh.write(files[name])
    with open(os.path.join(outdir, "report.json"), "w", newline="") as fh:
        fh.write(_report_text(report))


def main(argv=None) -> int:
    _configure_threads()
    parser = _build_parser()
    args = parser.parse_args(argv)

    from . import _cliops

    allowed = _cliops.TOLERANCE_NAMES.get(args.command, ())
    overrides = _parse_tolerances(args.tol, args.command, allowed)
    if overrides is None:
        return 2

    try:
        with open(args.input, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        print(f"error: cannot read input: {exc}", file=sys.stderr)
        return 2
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        print(f"error: input is not valid JSON: {exc}", file=sys.stderr)
        return 2

    report = {
        "command": args.command,
        "config": {
            "command": args.command,
            "inputPath": args.input,
            "outputDir": args.out,
            "seed": args.seed,
            "toleranceOverrides": overrides,
        },
        "error": None,
        "inputsDigest": "sha256:" + hashlib.sha256(raw).hexdigest(),
        "results": None,
        "version": VERSION,
        "warnings": [],
    }

    handler = _cliops.HANDLERS[args.command]
    try:
        results, files, warnings = handler(doc, overrides, args.seed)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ToolkitError, ValueError) as exc:
        report["error"] = {
            "message": str(exc),
            "type": type(exc).__name__,
        }
        _write_outputs(args.out, report, {})
        return 1

    report["results"] = results
    report["warnings"] = list(warnings)
    _write_outputs(args.out, report, files)
    return 0


if __name__ == "__main__":
    sys.exit(main())
