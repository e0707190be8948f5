"""Command-line driver: ``leakscope check|analyze|sweep|table``.

Exit codes: 0 success, 1 analysis error, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    METRICS, SEMANTICS, MetricResult, RequestError, analyze, choose_semantics, corpus_path,
    unit_name,
)
from .lang import (
    ParseError, UnboundParameterError, UseBeforeDefineError, bind_program,
    check_exactness, classify, parse_file, unroll,
)
from .tables import gdp_table, rr_table

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2
CSV_COLUMNS = ("exact", "lower", "upper", "exactness", "evidence")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _assignment(text: str) -> tuple:
    if "=" not in text:
        raise UsageError(f"expected NAME=VALUE, got {text!r}")
    name, value = text.split("=", 1)
    try:
        return name.strip(), float(value)
    except ValueError:
        raise UsageError(f"not a number in {text!r}") from None


def _sweep_axis(text: str) -> tuple:
    name, rng = text.split("=", 1) if "=" in text else (None, None)
    parts = rng.split(":") if rng else []
    if name is None or len(parts) != 3:
        raise UsageError(f"expected NAME=START:STOP:STEPS, got {text!r}")
    start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise UsageError("a sweep needs at least one step")
    return name.strip(), [float(v) for v in np.linspace(start, stop, steps)]


def _load(path: str):
    """Read a program; ``@name`` refers to the bundled corpus."""
    if path.startswith("@"):
        return parse_file(corpus_path(path[1:]))
    return parse_file(path)


def _base(text: str) -> float:
    return math.e if text == "e" else float(text)


def _num(x):
    """JSON-safe number: non-finite values become strings."""
    if x is None or isinstance(x, bool):
        return x
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    return x


def _row(params: dict, res: Optional[MetricResult], error: Optional[str] = None) -> dict:
    if res is None:
        return {"params": params, "exact": None, "lower": None, "upper": None, "exactness": None,
                "evidence": None, "methods": {}, "diagnostics": [], "error": error, "seconds": 0.0}
    return {"params": params, "exact": res.exact, "lower": res.lower, "upper": res.upper,
            "exactness": res.exactness, "evidence": res.evidence, "methods": res.methods,
            "diagnostics": res.diagnostics, "error": error, "seconds": res.seconds}


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_num(report), indent=2, sort_keys=False) + "\n"
    rows = report["rows"]
    pnames = list(rows[0]["params"]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(pnames + list(CSV_COLUMNS) + ["error"])
    for r in rows:
        vals = [repr(float(r["params"][k])) for k in pnames]
        for c in CSV_COLUMNS:
            v = r[c]
            vals.append("" if v is None else (str(v).lower() if isinstance(v, bool) else repr(float(v))))
        vals.append(r.get("error") or "")
        w.writerow(vals)
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _header(args, command: str) -> dict:
    return {
        "tool": "leakscope", "version": __version__, "command": command,
        "program": getattr(args, "program", None),
        "semantics": getattr(args, "semantics", None),
        "metric": getattr(args, "metric", None),
        "target": getattr(args, "target", None),
        "given": getattr(args, "given", None),
        "observations": [list(o) for o in getattr(args, "observe", []) or []],
        "seed": getattr(args, "seed", 0),
    }


# ----------------------------------------------------------------- commands

def cmd_check(args) -> int:
    try:
        prog = _load(args.program)
    except FileNotFoundError:
        print(f"error: no such file: {args.program}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as e:
        print(f"{args.program}:{e}", file=sys.stderr)
        return EXIT_USAGE
    except UseBeforeDefineError as e:
        print(f"{args.program}: {e}", file=sys.stderr)
        return EXIT_USAGE
    params = dict(args.param)
    try:
        flat = unroll(bind_program(prog, params))
    except UnboundParameterError as e:
        print(f"error: {e} (bind it with -P)", file=sys.stderr)
        return EXIT_USAGE
    report = classify(flat)
    exact = check_exactness(flat)
    print("parse: ok")
    print(f"program: {report.program_tag}")
    for name in sorted(report.tags):
        print(f"  {name}: {report.tags[name]}")
    print(f"exact: {'true' if exact.exact else 'false'}")
    for v in exact.violations:
        print(f"warning: {v}")
    return EXIT_OK


def _request(args) -> dict:
    return dict(metric=args.metric, target=args.target, given=args.given, semantics=args.semantics,
                observations=tuple(args.observe), base=_base(args.log_base) if args.log_base else None,
                init=dict(args.init) if args.init else None)


def _point(job) -> dict:
    path, req, params = job
    try:
        prog = _load(path)
        res = analyze(prog, params=params, **req)
        return _row(params, res)
    except (RequestError, ValueError, KeyError, ArithmeticError) as e:
        return _row(params, None, f"{type(e).__name__}: {e}")


def cmd_analyze(args) -> int:
    prog = _load(args.program)
    req = _request(args)
    res = analyze(prog, params=dict(args.param), **req)
    report = _header(args, "analyze")
    report["semantics"] = res.semantics
    report["unit"] = res.unit
    report["rows"] = [_row(dict(args.param), res)]
    _emit(render(report, args.format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    prog = _load(args.program)  # surface parse errors before spawning work
    axes = [_sweep_axis(s) for s in args.sweep]
    if not 1 <= len(axes) <= 2:
        raise UsageError("sweep over one or two parameters")
    req = _request(args)
    base = dict(args.param)
    jobs = []
    for combo in itertools.product(*[vals for _, vals in axes]):
        params = dict(base)
        params.update({name: v for (name, _), v in zip(axes, combo)})
        jobs.append((args.program, req, params))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_point, jobs))
    else:
        rows = [_point(j) for j in jobs]
    report = _header(args, "sweep")
    if req["base"] is None:
        sem = req["semantics"] if req["semantics"] != "auto" else choose_semantics(prog, jobs[0][2])
        req_base = 2.0 if sem == "wpe" else math.e
    else:
        req_base = req["base"]
    report["unit"] = unit_name(req_base)
    report["rows"] = rows
    _emit(render(report, args.format), args.out)
    return EXIT_OK if all(r["error"] is None for r in rows) else EXIT_ANALYSIS


def cmd_table(args) -> int:
    rows = gdp_table() if args.case == "gdp" else rr_table()
    report = {"tool": "leakscope", "version": __version__, "command": "table", "case": args.case,
              "unit": "nats" if args.case == "gdp" else "bits", "cells": rows}
    if args.format == "json":
        text = json.dumps(_num(report), indent=2) + "\n"
    else:
        buf = io.StringIO()
        keys = [k for k in rows[0] if k != "methods"]
        w = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r[k] is None else r[k]) for k in keys})
        text = buf.getvalue()
    _emit(text, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(sp) -> None:
    sp.add_argument("program", help="path to a .ppl file, or @name for a bundled program")
    sp.add_argument("-P", dest="param", action="append", type=_assignment, default=[],
                    metavar="NAME=VAL", help="bind a declared parameter")


def _analysis_flags(sp) -> None:
    sp.add_argument("--semantics", choices=SEMANTICS, default="auto")
    sp.add_argument("--metric", choices=METRICS, required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--given")
    sp.add_argument("--observe", action="append", type=_assignment, default=[], metavar="VAR=VAL")
    sp.add_argument("--init", action="append", type=_assignment, default=[], metavar="VAR=VAL",
                    help="override the all-zeros initial state (wpe only)")
    sp.add_argument("--log-base", choices=["2", "e"], help="default: 2 for wpe, e for soga")
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leakscope", description="Information-leakage analysis of probabilistic programs.")
    p.add_argument("--version", action="version", version=f"leakscope {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="parse, classify and check exactness conditions")
    _common(c)
    c.set_defaults(func=cmd_check)

    a = sub.add_parser("analyze", help="evaluate one metric at one parameter point")
    _common(a)
    _analysis_flags(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("sweep", help="evaluate a metric over a parameter grid")
    _common(s)
    _analysis_flags(s)
    s.add_argument("--sweep", action="append", required=True, metavar="NAME=START:STOP:STEPS")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("table", help="regenerate a case-study table")
    t.add_argument("case", choices=["rr", "gdp"])
    t.add_argument("--format", choices=["json", "csv"], default="json")
    t.add_argument("--out")
    t.set_defaults(func=cmd_table)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"leakscope: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"leakscope: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UseBeforeDefineError, UnboundParameterError) as e:
        print(f"leakscope: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RequestError as e:
        print(f"leakscope: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, ArithmeticError, RuntimeError) as e:
        print(f"leakscope: analysis error: {e}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
