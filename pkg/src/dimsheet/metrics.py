"""Formula complexity counts per cell, per variable and per layout strategy."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .grid import BinOp, Call, CellRef, Formula, GridDoc, GridExpr, Neg, Range, Text, serialize, walk
from .layout import LayoutPlan, cell_address, compile_model, preset_plan
from .model import ValidatedModel, contains_sum

FIELDS = ("operator_count", "function_count", "reference_count", "text_length")


@dataclass(frozen=True)
class FormulaMetrics:
    operator_count: int = 0
    function_count: int = 0
    reference_count: int = 0
    text_length: int = 0


def measure_cell(expr: GridExpr) -> FormulaMetrics:
    ops = funcs = refs = 0
    for node in walk(expr):
        if isinstance(node, (BinOp, Neg)):
            ops += 1
        elif isinstance(node, Call):
            funcs += 1
        elif isinstance(node, (CellRef, Range)):
            refs += 1
    return FormulaMetrics(ops, funcs, refs, len(serialize(expr)))


def shape(expr: GridExpr) -> str:
    """Formula text with references and criteria replaced by placeholders."""
    return serialize(_blank(expr))


def _blank(expr: GridExpr) -> GridExpr:
    if isinstance(expr, CellRef):
        return CellRef(None, 1, 1)
    if isinstance(expr, Range):
        return Range(None, 1, 1, 1, 2)
    if isinstance(expr, Text):
        # criteria strings stand in for header-cell references
        return Text("?")
    if isinstance(expr, Neg):
        return Neg(_blank(expr.operand))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, _blank(expr.lhs), _blank(expr.rhs))
    if isinstance(expr, Call):
        return Call(expr.name, tuple(_blank(a) for a in expr.args))
    return expr


@dataclass(frozen=True)
class VariableReport:
    name: str
    cells: int
    max: FormulaMetrics
    mean: dict
    shapes: int

    def to_json(self) -> dict:
        return {"name": self.name, "cells": self.cells, "max": asdict(self.max), "mean": self.mean, "shapes": self.shapes}


@dataclass(frozen=True)
class StrategyReport:
    preset: str
    variables: tuple[VariableReport, ...]

    def variable(self, name: str) -> VariableReport:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"preset": self.preset, "variables": [v.to_json() for v in self.variables]}


def measure_plan(model: ValidatedModel, plan: LayoutPlan, doc: GridDoc | None = None) -> StrategyReport:
    doc = doc if doc is not None else compile_model(model, plan)
    reports = []
    for var in model.variables:
        if not var.is_formula:
            continue
        exprs = []
        for coord in model.instances(var.dims):
            ref = cell_address(plan, var.name, coord)
            cell = doc.get(ref.sheet, ref.row, ref.col)
            assert isinstance(cell, Formula), (var.name, ref)
            exprs.append(cell.expr)
        counts = [measure_cell(e) for e in exprs]
        top = FormulaMetrics(*(max(getattr(c, f) for c in counts) for f in FIELDS))
        mean = {f: sum(getattr(c, f) for c in counts) / len(counts) for f in FIELDS}
        reports.append(VariableReport(var.name, len(exprs), top, mean, len({shape(e) for e in exprs})))
    return StrategyReport(plan.preset or "plan", tuple(reports))


def compare(model: ValidatedModel, presets: Iterable[str]) -> list[StrategyReport]:
    """Compile under each preset and measure every formula cell; sorted by preset name."""
    reports = [measure_plan(model, preset_plan(model, p)) for p in presets]
    return sorted(reports, key=lambda r: r.preset)


def aggregate_variables(model: ValidatedModel) -> list[str]:
    return [v.name for v in model.variables if v.expr is not None and contains_sum(v.expr)]


def comparison_table(model: ValidatedModel, reports: Sequence[StrategyReport], field: str = "reference_count") -> str:
    """Side-by-side max ``field`` for the aggregate variables, one column per preset."""
    names = aggregate_variables(model)
    width = max([len(n) for n in names] + [8])
    cols = [r.preset for r in reports]
    lines = [f"{field} (max per cell)", " " * width + "".join(f"{c:>9}" for c in cols)]
    for name in names:
        row = "".join(f"{getattr(r.variable(name).max, field):>9}" for r in reports)
        lines.append(f"{name:<{width}}{row}")
    return "\n".join(lines) + "\n"
