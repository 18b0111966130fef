"""Evaluate grid documents cell by cell, independently of the model engine."""

from __future__ import annotations

import graphlib
import math
from typing import Iterator

from .grid import (
    BinOp,
    Call,
    CellRef,
    Formula,
    GridDoc,
    GridExpr,
    Label,
    Literal,
    Neg,
    Range,
    Text,
    Value,
    a1,
    walk,
)

Address = tuple[str, int, int]


class GridError(Exception):
    pass


class CyclicGrid(GridError):
    def __init__(self, cells: list[Address]):
        super().__init__("circular reference: " + " -> ".join(_name(c) for c in cells))
        self.cells = cells


class RefToEmptyCell(GridError):
    def __init__(self, addr: Address, host: Address | None = None):
        by = f" from {_name(host)}" if host else ""
        super().__init__(f"reference to empty cell {_name(addr)}{by}")
        self.address = addr


class GridTypeError(GridError):
    pass


class GridArithmeticError(GridError):
    pass


def _name(addr: Address) -> str:
    sheet, row, col = addr
    return f"{sheet}!{a1(row, col, absolute=False)}"


def _refs(expr: GridExpr, host_sheet: str) -> Iterator[Address]:
    for node in walk(expr):
        if isinstance(node, CellRef):
            yield (node.sheet or host_sheet, node.row, node.col)
        elif isinstance(node, Range):
            sheet = node.sheet or host_sheet
            for r, c in node.cells():
                yield (sheet, r, c)


def eval_grid(doc: GridDoc) -> dict[Address, float]:
    """Numeric value of every number and formula cell, keyed by (sheet, row, col)."""
    cells: dict[Address, object] = {}
    for sheet in doc.sheets:
        for (row, col), cell in sheet.cells.items():
            cells[sheet.name, row, col] = cell

    graph: dict[Address, set[Address]] = {}
    for addr, cell in cells.items():
        if isinstance(cell, Formula):
            # only formula cells order evaluation; other referenced cells are leaves
            graph[addr] = {a for a in _refs(cell.expr, addr[0]) if isinstance(cells.get(a), Formula)}
    sorter = graphlib.TopologicalSorter(graph)
    try:
        order = list(sorter.static_order())
    except graphlib.CycleError as err:
        raise CyclicGrid(list(err.args[1])) from None

    values: dict[Address, float] = {a: c.value for a, c in cells.items() if isinstance(c, Value)}
    for addr in order:
        values[addr] = _eval(cells[addr].expr, addr, cells, values)
    return values


def _number(addr: Address, host: Address, cells, values) -> float:
    cell = cells.get(addr)
    if cell is None:
        raise RefToEmptyCell(addr, host)
    if isinstance(cell, Label):
        raise GridTypeError(f"{_name(host)} uses label cell {_name(addr)} as a number")
    return values[addr]


def _eval(expr: GridExpr, host: Address, cells, values) -> float:
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, CellRef):
        return _number((expr.sheet or host[0], expr.row, expr.col), host, cells, values)
    if isinstance(expr, Neg):
        return -_eval(expr.operand, host, cells, values)
    if isinstance(expr, BinOp):
        x = _eval(expr.lhs, host, cells, values)
        y = _eval(expr.rhs, host, cells, values)
        try:
            if expr.op == "+":
                out = x + y
            elif expr.op == "-":
                out = x - y
            elif expr.op == "*":
                out = x * y
            elif expr.op == "/":
                if y == 0:
                    raise GridArithmeticError(f"#DIV/0! in {_name(host)}")
                out = x / y
            else:
                out = math.pow(x, y)
        except (OverflowError, ValueError) as err:
            raise GridArithmeticError(f"#NUM! in {_name(host)}: {err}") from None
        if not math.isfinite(out):
            raise GridArithmeticError(f"#NUM! in {_name(host)}")
        return out
    if isinstance(expr, Call):
        if expr.name == "SUM":
            total = 0.0
            for arg in expr.args:
                if isinstance(arg, Range):
                    sheet = arg.sheet or host[0]
                    for r, c in arg.cells():
                        total += _number((sheet, r, c), host, cells, values)
                else:
                    total += _eval(arg, host, cells, values)
            return total
        return _sumifs(expr.args, host, cells, values)
    if isinstance(expr, (Range, Text)):
        raise GridTypeError(f"{_name(host)}: {type(expr).__name__} is not a number here")
    raise TypeError(f"not a grid expression: {expr!r}")


def _sumifs(args, host: Address, cells, values) -> float:
    sum_range = args[0]
    if not isinstance(sum_range, Range):
        raise GridTypeError(f"{_name(host)}: SUMIFS sum range must be a range")
    pairs = []
    for key, crit in zip(args[1::2], args[2::2]):
        if not isinstance(key, Range) or key.shape != sum_range.shape:
            raise GridTypeError(f"{_name(host)}: SUMIFS criteria range must match the sum range")
        if not isinstance(crit, Text):
            raise GridTypeError(f"{_name(host)}: SUMIFS criteria must be text")
        pairs.append((key, crit.value))
    sheet = sum_range.sheet or host[0]
    total = 0.0
    for i, (r, c) in enumerate(sum_range.cells()):
        match = True
        for key, wanted in pairs:
            kr, kc = list(_nth(key, i))
            cell = cells.get((key.sheet or host[0], kr, kc))
            if not isinstance(cell, Label):
                raise GridTypeError(f"{_name(host)}: SUMIFS key cell {_name((key.sheet or host[0], kr, kc))} is not a label")
            if cell.text != wanted:
                match = False
                break
        if match:
            total += _number((sheet, r, c), host, cells, values)
    return total


def _nth(rng: Range, i: int) -> tuple[int, int]:
    width = rng.c2 - rng.c1 + 1
    return rng.r1 + i // width, rng.c1 + i % width
