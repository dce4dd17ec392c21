"""Command line entry point.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Failures print
a JSON report on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import QWLecamError
from .experiments import DESCRIPTIONS, EXPERIMENTS, config_from_dict, run, validate
from .io import dumps_json

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _report(kind: str, exc: BaseException) -> None:
    rep = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
    for attr in ("field", "value", "chain", "step"):
        if hasattr(exc, attr):
            v = getattr(exc, attr)
            rep[attr] = v if isinstance(v, (int, float, str, type(None))) else str(v)
    print(dumps_json(rep), file=sys.stderr)


def _read_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _cmd_run(args) -> int:
    obj = _read_json(args.config)
    if args.seed is not None:
        obj["seed"] = args.seed
    cfg = config_from_dict(obj)
    dirs = run(cfg, out=args.out, threads=args.threads)
    print(dumps_json({"outputs": [str(d) for d in dirs]}))
    return EXIT_OK


def _cmd_validate(args) -> int:
    rep = validate(_read_json(args.config))
    print(dumps_json(rep))
    return EXIT_OK if rep["ok"] else EXIT_INPUT


def _cmd_list(args) -> int:
    for name in EXPERIMENTS:
        print(f"{name}\t{DESCRIPTIONS[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qwlecam", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments named in a config file")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output root (overrides output_dir)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("validate", help="dry run: check a config and estimate cost")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)
    ls = sub.add_parser("list-experiments", help="list experiment names")
    ls.set_defaults(func=_cmd_list)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ArithmeticError, FloatingPointError) as e:
        _report("numerical", e)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as e:
        _report("input", e)
        return EXIT_INPUT
    except QWLecamError as e:
        _report("numerical", e)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
