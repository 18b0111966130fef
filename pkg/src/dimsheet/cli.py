"""Command-line front end: check, eval, layout, verify, metrics."""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import EvaluationError, UnknownInput, apply_overrides, eval_model, value_dump
from .grid import A1SyntaxError, GridDoc
from .gridvm import GridError, eval_grid
from .layout import LayoutError, LayoutPlan, compile_model, plan_from_json, preset_plan, read_back
from .metrics import compare, comparison_table
from .model import ModelError, ValidatedModel, validate
from .parser import ParseError, parse_model

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_EVAL = 4
EXIT_MISMATCH = 5

DIGITS = 10
VERIFY_TOL = 1e-9


class CliFailure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str) -> ValidatedModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as err:
        raise CliFailure(EXIT_IO, f"cannot read {path}: {err}") from None
    try:
        model = parse_model(text)
    except ParseError as err:
        raise CliFailure(EXIT_PARSE, "\n".join(f"{path}:{d}" for d in err.diagnostics)) from None
    try:
        checked = validate(model)
    except ModelError as err:
        raise CliFailure(EXIT_INVALID, f"{path}: {err}") from None
    for warning in checked.warnings:
        print(f"{path}: warning: {warning}", file=sys.stderr)
    return checked


def _overrides(model: ValidatedModel, assignments: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in assignments or ():
        name, sep, value = item.partition("=")
        name = name.strip().strip("[]")
        if not sep:
            raise CliFailure(EXIT_INVALID, f"--set expects NAME=VALUE, got {item!r}")
        try:
            number = float(value)
        except ValueError:
            raise CliFailure(EXIT_INVALID, f"--set {name}: {value!r} is not a number") from None
        out[name] = number
    by_name = {v.name: v for v in model.variables}
    for name in out:
        var = by_name.get(name)
        if var is None or var.kind != "input" or var.dims:
            raise CliFailure(EXIT_INVALID, f"unknown input [{name}]: overrides apply to scalar inputs only")
    return out


def _evaluate(model: ValidatedModel, overrides):
    try:
        return eval_model(model, overrides)
    except UnknownInput as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None
    except EvaluationError as err:
        raise CliFailure(EXIT_EVAL, f"evaluation failed: {err}") from None


def _plan(model: ValidatedModel, preset: str | None, plan_path: str | None) -> LayoutPlan:
    try:
        if plan_path:
            try:
                data = json.loads(Path(plan_path).read_text(encoding="utf-8"))
            except OSError as err:
                raise CliFailure(EXIT_IO, f"cannot read {plan_path}: {err}") from None
            except json.JSONDecodeError as err:
                raise CliFailure(EXIT_INVALID, f"{plan_path}: {err}") from None
            return plan_from_json(model, data)
        return preset_plan(model, preset or "DB")
    except LayoutError as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as err:
        raise CliFailure(EXIT_IO, f"cannot write {out}: {err}") from None


def _fmt(x: float) -> str:
    return repr(float(f"{x:.{DIGITS}g}"))


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", name).strip("_")


# -- subcommands -------------------------------------------------------------------


def cmd_check(args) -> int:
    model = _load(args.model)
    print(f"{len(model.variables)} variables, {len(model.dimensions)} dimensions, ok")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load(args.model)
    store = _evaluate(model, _overrides(model, args.set))
    if args.format == "json":
        _emit(json.dumps(value_dump(store, DIGITS), indent=1) + "\n", args.out)
    elif args.format == "text":
        lines = []
        for name, arr in store.items():
            for coord, x in zip(model.instances(arr.dims), arr.values.ravel()):
                where = f"({', '.join(coord)})" if coord else ""
                lines.append(f"[{name}]{where} = {_fmt(x)}")
        _emit("\n".join(lines) + "\n", args.out)
    else:
        if not args.out:
            raise CliFailure(EXIT_INVALID, "--format csv needs --out DIRECTORY")
        directory = Path(args.out)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            for name, arr in store.items():
                buf = io.StringIO()
                writer = csv.writer(buf, lineterminator="\n")
                writer.writerow([*arr.dims, name])
                for coord, x in zip(model.instances(arr.dims), arr.values.ravel()):
                    writer.writerow([*coord, _fmt(x)])
                (directory / f"{_safe(name)}.csv").write_text(buf.getvalue(), encoding="utf-8")
        except OSError as err:
            raise CliFailure(EXIT_IO, f"cannot write {directory}: {err}") from None
    return EXIT_OK


def cmd_layout(args) -> int:
    model = _load(args.model)
    model = _with_inputs(model, args.set)
    plan = _plan(model, args.preset, args.plan)
    try:
        doc = compile_model(model, plan)
    except LayoutError as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None
    if args.format == "csv":
        if not args.out:
            raise CliFailure(EXIT_INVALID, "--format csv needs --out DIRECTORY")
        try:
            doc.write_csv(args.out)
        except OSError as err:
            raise CliFailure(EXIT_IO, f"cannot write {args.out}: {err}") from None
    else:
        _emit(doc.dumps() + "\n", args.out)
    return EXIT_OK


def _with_inputs(model: ValidatedModel, assignments) -> ValidatedModel:
    try:
        return apply_overrides(model, _overrides(model, assignments))
    except UnknownInput as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None


def cmd_verify(args) -> int:
    model = _load(args.model)
    overrides = _overrides(model, args.set)
    model = _with_inputs(model, args.set)
    plan = _plan(model, args.preset, args.plan)
    try:
        doc = compile_model(model, plan)
    except LayoutError as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None
    if args.grid:
        try:
            doc = GridDoc.from_json(json.loads(Path(args.grid).read_text(encoding="utf-8")))
        except OSError as err:
            raise CliFailure(EXIT_IO, f"cannot read {args.grid}: {err}") from None
        except (ValueError, KeyError, A1SyntaxError) as err:
            raise CliFailure(EXIT_MISMATCH, f"{args.grid}: unreadable grid: {err}") from None
    store = _evaluate(model, overrides)
    try:
        grid = read_back(plan, model, eval_grid(doc))
    except GridError as err:
        print(f"grid evaluation failed: {err}")
        return EXIT_MISMATCH

    failed = False
    for var in model.variables:
        expected = store[var.name].values.ravel()
        got = grid[var.name]
        coords = model.instances(var.dims)
        errors = [np.inf if g is None else relative_error(g, e) for e, g in zip(expected, got)]
        i = int(np.argmax(errors))
        ok = errors[i] <= VERIFY_TOL
        failed |= not ok
        line = f"{'ok  ' if ok else 'FAIL'} {var.name}: max rel err {errors[i]:.3g}"
        if not ok:
            g = got[i]
            line += f" at {coords[i]} (engine {_fmt(expected[i])}, grid {g if g is None else _fmt(g)})"
        print(line)
    return EXIT_MISMATCH if failed else EXIT_OK


def relative_error(got: float, expected: float) -> float:
    scale = max(abs(got), abs(expected))
    return 0.0 if scale == 0 else abs(got - expected) / scale


def cmd_metrics(args) -> int:
    model = _load(args.model)
    presets = [p.strip() for p in (args.presets or "").split(",") if p.strip()]
    try:
        reports = compare(model, presets)
    except LayoutError as err:
        raise CliFailure(EXIT_INVALID, str(err)) from None
    if args.format == "text":
        _emit(comparison_table(model, reports) if reports else "", args.out)
    else:
        _emit(json.dumps([r.to_json() for r in reports], indent=1) + "\n", args.out)
    return EXIT_OK


# -- wiring ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimsheet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=("json",)):
        p.add_argument("model", help="model file (.dim)")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=fmt, default=fmt[0])

    p = sub.add_parser("check", help="parse and validate a model")
    p.add_argument("model")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="evaluate all variables")
    common(p, ("json", "csv", "text"))
    p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a scalar input")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("layout", help="compile the model onto a grid")
    common(p, ("json", "csv"))
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--preset", default=None)
    group.add_argument("--plan", help="JSON plan file")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("verify", help="compare grid evaluation against the engine")
    p.add_argument("model")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--preset", default=None)
    group.add_argument("--plan", help="JSON plan file")
    p.add_argument("--grid", help="verify this GridDoc JSON instead of a fresh compile")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("metrics", help="formula complexity per preset")
    common(p, ("json", "text"))
    p.add_argument("--presets", default="", help="comma-separated preset names")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliFailure as err:
        print(err, file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
