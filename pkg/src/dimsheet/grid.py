"""Grid documents and their A1-notation formula language."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Union

FUNCTIONS = ("SUM", "SUMIFS")


class A1SyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


# -- formula AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class CellRef:
    """A single cell; ``sheet`` is None for the formula's own sheet."""

    sheet: str | None
    row: int
    col: int


@dataclass(frozen=True)
class Range:
    sheet: str | None
    r1: int
    c1: int
    r2: int
    c2: int

    def __post_init__(self):
        if self.r1 > self.r2 or self.c1 > self.c2:
            raise ValueError(f"inverted range {self}")

    def cells(self) -> Iterator[tuple[int, int]]:
        for r in range(self.r1, self.r2 + 1):
            for c in range(self.c1, self.c2 + 1):
                yield r, c

    @property
    def shape(self) -> tuple[int, int]:
        return self.r2 - self.r1 + 1, self.c2 - self.c1 + 1


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["GridExpr", ...]

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unsupported function {self.name}")
        if self.name == "SUMIFS" and (len(self.args) < 3 or len(self.args) % 2 == 0):
            raise ValueError("SUMIFS takes a sum range and criteria pairs")


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "GridExpr"
    rhs: "GridExpr"


@dataclass(frozen=True)
class Neg:
    operand: "GridExpr"


GridExpr = Union[Literal, Text, CellRef, Range, Call, BinOp, Neg]


def walk(expr: GridExpr) -> Iterator[GridExpr]:
    yield expr
    if isinstance(expr, Call):
        for arg in expr.args:
            yield from walk(arg)
    elif isinstance(expr, BinOp):
        yield from walk(expr.lhs)
        yield from walk(expr.rhs)
    elif isinstance(expr, Neg):
        yield from walk(expr.operand)


# -- A1 addressing ---------------------------------------------------------------


def column_letters(col: int) -> str:
    if col < 1:
        raise ValueError(f"column {col} out of range")
    out = ""
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(65 + rem) + out
    return out


def column_index(letters: str) -> int:
    n = 0
    for ch in letters.upper():
        n = n * 26 + ord(ch) - 64
    return n


def a1(row: int, col: int, absolute: bool = True) -> str:
    d = "$" if absolute else ""
    return f"{d}{column_letters(col)}{d}{row}"


_PLAIN_SHEET = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def sheet_prefix(sheet: str | None) -> str:
    if sheet is None:
        return ""
    if _PLAIN_SHEET.match(sheet):
        return f"{sheet}!"
    return "'" + sheet.replace("'", "''") + "'!"


# -- serialization -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}
_ATOM = 5


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def serialize(expr: GridExpr) -> str:
    """Formula text with a leading '='. References are absolute."""
    return "=" + _ser(expr)[0]


def _ser(expr: GridExpr) -> tuple[str, int]:
    if isinstance(expr, Literal):
        if expr.value < 0:
            return f"({format_number(expr.value)})", _ATOM
        return format_number(expr.value), _ATOM
    if isinstance(expr, Text):
        return '"' + expr.value.replace('"', '""') + '"', _ATOM
    if isinstance(expr, CellRef):
        return sheet_prefix(expr.sheet) + a1(expr.row, expr.col), _ATOM
    if isinstance(expr, Range):
        return f"{sheet_prefix(expr.sheet)}{a1(expr.r1, expr.c1)}:{a1(expr.r2, expr.c2)}", _ATOM
    if isinstance(expr, Call):
        return f"{expr.name}({','.join(_ser(a)[0] for a in expr.args)})", _ATOM
    if isinstance(expr, Neg):
        # spreadsheet negation binds tighter than '^'; parenthesize anything compound
        inner, prec = _ser(expr.operand)
        if prec < _ATOM:
            inner = f"({inner})"
        return f"-{inner}", 4
    if isinstance(expr, BinOp):
        prec = _PREC[expr.op]
        lhs, lp = _ser(expr.lhs)
        rhs, rp = _ser(expr.rhs)
        if expr.op == "^":
            # '^' associates differently across spreadsheet applications: never chain it
            if lp <= prec:
                lhs = f"({lhs})"
            if rp <= prec:
                rhs = f"({rhs})"
        else:
            if lp < prec:
                lhs = f"({lhs})"
            if rp <= prec:
                rhs = f"({rhs})"
        return f"{lhs}{expr.op}{rhs}", prec
    raise TypeError(f"not a grid expression: {expr!r}")


# -- parsing -------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ref>(?:(?P<sheet>[A-Za-z_][A-Za-z0-9_]*|'(?:[^']|'')+')!)?
        \$?(?P<c1>[A-Za-z]{1,3})\$?(?P<r1>[0-9]+)
        (?::\$?(?P<c2>[A-Za-z]{1,3})\$?(?P<r2>[0-9]+))?)(?![A-Za-z0-9_(])
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"(?:[^"]|"")*")
  | (?P<func>[A-Za-z][A-Za-z0-9.]*)\s*\(
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str, start: int) -> list[tuple[str, object, int]]:
    toks: list[tuple[str, object, int]] = []
    i = start
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise A1SyntaxError(f"unexpected {text[i]!r}", i)
        kind = m.lastgroup
        if m.group("ws"):
            pass
        elif m.group("ref"):
            sheet = m.group("sheet")
            if sheet and sheet.startswith("'"):
                sheet = sheet[1:-1].replace("''", "'")
            r1, c1 = int(m.group("r1")), column_index(m.group("c1"))
            if r1 < 1:
                raise A1SyntaxError("row 0 does not exist", i)
            if m.group("c2"):
                r2, c2 = int(m.group("r2")), column_index(m.group("c2"))
                if r2 < 1:
                    raise A1SyntaxError("row 0 does not exist", i)
                r1, r2 = sorted((r1, r2))
                c1, c2 = sorted((c1, c2))
                toks.append(("atom", Range(sheet, r1, c1, r2, c2), i))
            else:
                toks.append(("atom", CellRef(sheet, r1, c1), i))
        elif m.group("num") is not None:
            toks.append(("atom", Literal(float(m.group("num"))), i))
        elif m.group("str") is not None:
            toks.append(("atom", Text(m.group("str")[1:-1].replace('""', '"')), i))
        elif m.group("func"):
            toks.append(("func", m.group("func").upper(), i))
        else:
            toks.append(("op", m.group("op"), i))
        del kind
        i = m.end()
    toks.append(("end", None, len(text)))
    return toks


class _A1Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self, kind: str, value=None) -> bool:
        k, v, _ = self.toks[self.pos]
        return k == kind and (value is None or v == value)

    def take(self):
        tok = self.toks[self.pos]
        if tok[0] != "end":
            self.pos += 1
        return tok

    def fail(self, message: str):
        raise A1SyntaxError(message, self.toks[self.pos][2])

    def expr(self) -> GridExpr:
        node = self.term()
        while self.peek("op", "+") or self.peek("op", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> GridExpr:
        node = self.power()
        while self.peek("op", "*") or self.peek("op", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.power())
        return node

    def power(self) -> GridExpr:
        # left associative, as in Excel
        node = self.unary()
        while self.peek("op", "^"):
            self.take()
            node = BinOp("^", node, self.unary())
        return node

    def unary(self) -> GridExpr:
        if self.peek("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek("op", "+"):
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> GridExpr:
        kind, value, _ = self.toks[self.pos]
        if kind == "atom":
            self.take()
            return value
        if kind == "func":
            self.take()
            if value not in FUNCTIONS:
                self.pos -= 1
                self.fail(f"unsupported function {value}")
            args = []
            if not self.peek("op", ")"):
                args.append(self.expr())
                while self.peek("op", ","):
                    self.take()
                    args.append(self.expr())
            if not self.peek("op", ")"):
                self.fail("expected ')'")
            self.take()
            try:
                return Call(value, tuple(args))
            except ValueError as err:
                raise A1SyntaxError(str(err), self.toks[self.pos - 1][2]) from None
        if self.peek("op", "("):
            self.take()
            node = self.expr()
            if not self.peek("op", ")"):
                self.fail("expected ')'")
            self.take()
            return node
        self.fail("expected a value, reference or function")


def parse_a1(text: str) -> GridExpr:
    """Parse formula text such as ``=SUM(J51:J54)``; '$' markers are ignored."""
    if not text.startswith("="):
        raise A1SyntaxError("formula must start with '='", 0)
    parser = _A1Parser(_tokenize(text, 1))
    node = parser.expr()
    if not parser.peek("end"):
        parser.fail("unexpected trailing input")
    return node


# -- documents -----------------------------------------------------------------------


@dataclass(frozen=True)
class Label:
    text: str


@dataclass(frozen=True)
class Value:
    value: float


@dataclass(frozen=True)
class Formula:
    expr: GridExpr

    @property
    def text(self) -> str:
        return serialize(self.expr)


Cell = Union[Label, Value, Formula]


@dataclass
class Sheet:
    name: str
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)

    def set(self, row: int, col: int, cell: Cell) -> None:
        if (row, col) in self.cells:
            raise ValueError(f"cell {self.name}!{a1(row, col, False)} written twice")
        self.cells[row, col] = cell


@dataclass
class GridDoc:
    sheets: list[Sheet] = field(default_factory=list)

    def sheet(self, name: str) -> Sheet:
        for sheet in self.sheets:
            if sheet.name == name:
                return sheet
        raise KeyError(name)

    def get(self, sheet: str, row: int, col: int) -> Cell | None:
        return self.sheet(sheet).cells.get((row, col))

    def ensure(self, name: str) -> Sheet:
        try:
            return self.sheet(name)
        except KeyError:
            sheet = Sheet(name)
            self.sheets.append(sheet)
            return sheet

    # -- serialization

    def to_json(self) -> dict:
        sheets = []
        for sheet in self.sheets:
            cells = []
            for (row, col), cell in sorted(sheet.cells.items()):
                item: dict = {"row": row, "col": col}
                if isinstance(cell, Label):
                    item.update(kind="label", text=cell.text)
                elif isinstance(cell, Value):
                    item.update(kind="number", value=cell.value)
                else:
                    item.update(kind="formula", formula=cell.text)
                cells.append(item)
            sheets.append({"name": sheet.name, "cells": cells})
        return {"sheets": sheets}

    @classmethod
    def from_json(cls, data: dict) -> "GridDoc":
        doc = cls()
        for s in data["sheets"]:
            sheet = Sheet(s["name"])
            for item in s["cells"]:
                kind = item["kind"]
                if kind == "label":
                    cell: Cell = Label(item["text"])
                elif kind == "number":
                    cell = Value(float(item["value"]))
                elif kind == "formula":
                    cell = Formula(parse_a1(item["formula"]))
                else:
                    raise ValueError(f"unknown cell kind {kind!r}")
                sheet.set(int(item["row"]), int(item["col"]), cell)
            doc.sheets.append(sheet)
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    def sheet_csv(self, name: str) -> str:
        sheet = self.sheet(name)
        buf = io.StringIO()
        if sheet.cells:
            nrows = max(r for r, _ in sheet.cells)
            ncols = max(c for _, c in sheet.cells)
            writer = csv.writer(buf, lineterminator="\n")
            for r in range(1, nrows + 1):
                row = []
                for c in range(1, ncols + 1):
                    cell = sheet.cells.get((r, c))
                    if cell is None:
                        row.append("")
                    elif isinstance(cell, Label):
                        row.append(cell.text)
                    elif isinstance(cell, Value):
                        row.append(format_number(cell.value))
                    else:
                        row.append(cell.text)
                writer.writerow(row)
        return buf.getvalue()

    def write_csv(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for sheet in self.sheets:
            path = directory / f"{sheet.name}.csv"
            path.write_text(self.sheet_csv(sheet.name), encoding="utf-8")
            paths.append(path)
        return paths
