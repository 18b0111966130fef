"""Reader and writer for the ``.dim`` model format.

A model file is line oriented::

    dimension Product: Standard Deluxe
    input [Base Price] = 100
    data [Unit Production Cost] over Product:
        Standard 48
        Deluxe   72
    calc [Price] over Sector, Product = [Sector Base Price] * [Base Price Multiplier]
    output [Total Profit] = SUM([Monthly Profit])
    total [Region Sales Distribution per Sector] over Sector = 1

``#`` starts a comment. Variable names are bracketed and may contain spaces;
dimension names and instance labels are bare tokens.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable

from .model import (
    BinOp,
    Dimension,
    Expression,
    Model,
    Neg,
    Number,
    Sum,
    TotalCheck,
    VariableDecl,
    VarRef,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1


@dataclass(frozen=True)
class ParseDiagnostic:
    span: SourceSpan
    severity: str
    message: str

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class _Fail(Exception):
    def __init__(self, message: str, column: int, length: int = 1):
        super().__init__(message)
        self.column = column
        self.length = length


# -- lexing -----------------------------------------------------------------

_NUMBER = re.compile(r"([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?")
_WORD = re.compile(r"[A-Za-z0-9_]+")
_DIGITS = "0123456789"
_PUNCT = "+-*/^(),:="
LABEL = re.compile(r"[A-Za-z0-9_]+\Z")
IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class _Tok:
    kind: str  # name | word | number | punct | end
    text: str
    col: int  # 1-based

    @property
    def length(self) -> int:
        return max(len(self.text), 1)


def _lex(line: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    while i < len(line):
        ch = line[i]
        if ch in " \t\r":
            i += 1
        elif ch == "#":
            break
        elif ch == "[":
            end = line.find("]", i + 1)
            if end < 0:
                raise _Fail("unterminated bracket name", i + 1, len(line) - i)
            if end == i + 1:
                raise _Fail("empty bracket name", i + 1, 2)
            toks.append(_Tok("name", line[i + 1 : end], i + 1))
            i = end + 1
        elif ch in _DIGITS or (ch == "." and line[i + 1 : i + 2] in _DIGITS and i + 1 < len(line)):
            m = _NUMBER.match(line, i)
            assert m
            j = m.end()
            # "12abc" or "1.2.3" is one malformed token, not a number and a word
            tail = _WORD.match(line, j) if j < len(line) else None
            if tail or (j < len(line) and line[j] == "."):
                stop = j
                while stop < len(line) and (line[stop].isalnum() or line[stop] in "._"):
                    stop += 1
                word = line[i:stop]
                if re.fullmatch(r"[A-Za-z0-9_]+", word):
                    toks.append(_Tok("word", word, i + 1))
                    i = stop
                    continue
                raise _Fail(f"malformed number {word!r}", i + 1, stop - i)
            toks.append(_Tok("number", m.group(0), i + 1))
            i = j
        elif _WORD.match(ch):
            m = _WORD.match(line, i)
            assert m
            toks.append(_Tok("word", m.group(0), i + 1))
            i = m.end()
        elif ch in _PUNCT:
            toks.append(_Tok("punct", ch, i + 1))
            i += 1
        else:
            raise _Fail(f"unexpected character {ch!r}", i + 1)
    toks.append(_Tok("end", "", len(line.rstrip()) + 1))
    return toks


class _Cursor:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        tok = self.toks[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.tok
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> _Tok:
        if not self.at(kind, text):
            self.fail(f"expected {what or text or kind}")
        return self.advance()

    def fail(self, message: str):
        tok = self.tok
        found = "end of line" if tok.kind == "end" else repr(tok.text)
        raise _Fail(f"{message}, found {found}", tok.col, tok.length)


# -- expressions --------------------------------------------------------------


def _expression(cur: _Cursor) -> Expression:
    node = _term(cur)
    while cur.at("punct", "+") or cur.at("punct", "-"):
        op = cur.advance().text
        node = BinOp(op, node, _term(cur))
    return node


def _term(cur: _Cursor) -> Expression:
    node = _unary(cur)
    while cur.at("punct", "*") or cur.at("punct", "/"):
        op = cur.advance().text
        node = BinOp(op, node, _unary(cur))
    return node


def _unary(cur: _Cursor) -> Expression:
    if cur.at("punct", "-"):
        cur.advance()
        return Neg(_unary(cur))
    return _power(cur)


def _power(cur: _Cursor) -> Expression:
    base = _atom(cur)
    if cur.at("punct", "^"):
        cur.advance()
        return BinOp("^", base, _unary(cur))
    return base


def _atom(cur: _Cursor) -> Expression:
    tok = cur.tok
    if tok.kind == "number":
        cur.advance()
        value = float(tok.text)
        if not math.isfinite(value):
            raise _Fail(f"malformed number {tok.text!r}", tok.col, tok.length)
        return Number(value)
    if tok.kind == "name":
        cur.advance()
        return VarRef(tok.text)
    if cur.at("punct", "("):
        cur.advance()
        node = _expression(cur)
        cur.expect("punct", ")")
        return node
    if tok.kind == "word" and tok.text.upper() == "SUM":
        cur.advance()
        cur.expect("punct", "(", "'(' after SUM")
        node = _expression(cur)
        cur.expect("punct", ")")
        return Sum(node)
    cur.fail("expected a number, [variable], '(', '-' or SUM(")


def parse_expression(text: str) -> Expression:
    """Parse a single formula. Raises ParseError with a column-accurate span."""
    if "\n" in text:
        raise ParseError([ParseDiagnostic(SourceSpan(1, text.index("\n") + 1), "error", "expression spans lines")])
    try:
        cur = _Cursor(_lex(text))
        node = _expression(cur)
        if not cur.at("end"):
            cur.fail("unexpected trailing input")
        return node
    except _Fail as err:
        raise ParseError([ParseDiagnostic(SourceSpan(1, err.column, err.length), "error", str(err))]) from None


# -- statements ---------------------------------------------------------------

_KEYWORDS = {"dimension", "input", "data", "calc", "output", "total"}
_KIND_OF = {"input": "input", "data": "data", "calc": "calculated", "output": "output"}


def _dim_list(cur: _Cursor) -> list[str]:
    dims = []
    if cur.at("word"):
        dims.append(cur.advance().text)
        while cur.at("punct", ","):
            cur.advance()
            tok = cur.expect("word", what="dimension name")
            dims.append(tok.text)
    for name in dims:
        if not IDENT.match(name):
            raise _Fail(f"bad dimension name {name!r}", 1)
    return dims


def _number_token(cur: _Cursor) -> float:
    neg = False
    if cur.at("punct", "-"):
        cur.advance()
        neg = True
    tok = cur.expect("number", what="a number")
    value = float(tok.text)
    if not math.isfinite(value):
        raise _Fail(f"malformed number {tok.text!r}", tok.col, tok.length)
    return -value if neg else value


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.diags: list[ParseDiagnostic] = []
        self.dimensions: list[Dimension] = []
        self.variables: list[VariableDecl] = []
        self.totals: list[TotalCheck] = []

    def error(self, line: int, column: int, message: str, length: int = 1):
        self.diags.append(ParseDiagnostic(SourceSpan(line, max(column, 1), max(length, 1)), "error", message))

    def run(self) -> Model:
        i = 0
        while i < len(self.lines):
            raw = self.lines[i]
            lineno = i + 1
            i += 1
            try:
                toks = _lex(raw)
            except _Fail as err:
                self.error(lineno, err.column, str(err), err.length)
                continue
            if toks[0].kind == "end":
                continue
            if raw[:1] in (" ", "\t"):
                self.error(lineno, toks[0].col, "indented row outside a data table", toks[0].length)
                continue
            try:
                rows = self.statement(_Cursor(toks), lineno)
            except _Fail as err:
                self.error(lineno, err.column, str(err), err.length)
                rows = None
            if rows is not None:
                i = self.rows(rows, i)
            else:
                # skip indented rows that belonged to a failed header
                while i < len(self.lines) and self.lines[i][:1] in (" ", "\t"):
                    i += 1
        if self.diags:
            raise ParseError(self.diags)
        return Model(tuple(self.dimensions), tuple(self.variables), tuple(self.totals))

    def statement(self, cur: _Cursor, lineno: int):
        """Parse one header line. Returns a pending table when rows follow."""
        head = cur.tok
        if head.kind != "word" or head.text not in _KEYWORDS:
            cur.fail("unknown keyword; expected one of " + ", ".join(sorted(_KEYWORDS)))
        cur.advance()
        if head.text == "dimension":
            name = cur.expect("word", what="dimension name")
            if not IDENT.match(name.text):
                raise _Fail(f"bad dimension name {name.text!r}", name.col, name.length)
            cur.expect("punct", ":")
            labels = []
            while cur.at("word") or cur.at("number"):
                tok = cur.advance()
                if not LABEL.match(tok.text):
                    raise _Fail(f"bad instance label {tok.text!r}", tok.col, tok.length)
                labels.append(tok.text)
            if not cur.at("end"):
                cur.fail("expected an instance label")
            if not labels:
                raise _Fail(f"dimension {name.text} has no instances", name.col, name.length)
            if len(set(labels)) != len(labels):
                raise _Fail(f"dimension {name.text} repeats an instance label", name.col, name.length)
            self.dimensions.append(Dimension(name.text, tuple(labels)))
            return None

        name = cur.expect("name", what="[variable name]")
        dims: list[str] = []
        if cur.at("word", "over"):
            cur.advance()
            dims = _dim_list(cur)
        if len(set(dims)) != len(dims):
            raise _Fail(f"[{name.text}] lists a dimension twice", name.col, name.length)

        if head.text == "total":
            cur.expect("punct", "=")
            value = _number_token(cur)
            if not cur.at("end"):
                cur.fail("unexpected trailing input")
            self.totals.append(TotalCheck(name.text, tuple(dims), value))
            return None

        kind = _KIND_OF[head.text]
        if kind in ("input", "data"):
            if cur.at("punct", ":"):
                cur.advance()
                if not cur.at("end"):
                    cur.fail("table rows go on the following indented lines")
                decl = VariableDecl(name.text, kind, tuple(dims), {})
                return decl, lineno
            cur.expect("punct", "=", "'=' or ':'")
            if dims:
                raise _Fail(f"[{name.text}] over {', '.join(dims)} needs a table (':')", name.col, name.length)
            value = _number_token(cur)
            if not cur.at("end"):
                cur.fail("unexpected trailing input")
            self.variables.append(VariableDecl(name.text, kind, (), {(): value}))
            return None

        cur.expect("punct", "=")
        expr = _expression(cur)
        if not cur.at("end"):
            cur.fail("unexpected trailing input")
        self.variables.append(VariableDecl(name.text, kind, tuple(dims), expr=expr))
        return None

    def rows(self, pending, i: int) -> int:
        decl, header_line = pending
        table: dict[tuple[str, ...], float] = {}
        width = len(decl.dims)
        ok = True
        while i < len(self.lines) and (self.lines[i][:1] in (" ", "\t") or not self.lines[i].strip()):
            raw = self.lines[i]
            lineno = i + 1
            i += 1
            try:
                toks = _lex(raw)
                if toks[0].kind == "end":
                    continue
                cur = _Cursor(toks)
                labels = []
                for _ in range(width):
                    tok = cur.tok
                    if tok.kind not in ("word", "number") or not LABEL.match(tok.text):
                        cur.fail("expected an instance label")
                    labels.append(cur.advance())
                value = _number_token(cur)
                if not cur.at("end"):
                    cur.fail(f"expected {width} labels and a value")
                key = tuple(t.text for t in labels)
                if key in table:
                    first = labels[0] if labels else toks[0]
                    raise _Fail(f"duplicate row {key} in [{decl.name}]", first.col, len(raw.strip()))
                table[key] = value
            except _Fail as err:
                ok = False
                self.error(lineno, err.column, str(err), err.length)
        if not table and ok:
            self.error(header_line, 1, f"[{decl.name}] has no rows")
            ok = False
        if ok:
            self.variables.append(VariableDecl(decl.name, decl.kind, decl.dims, table))
        return i


def parse_model(text: str) -> Model:
    """Parse model text; raises ParseError carrying every diagnostic found."""
    return _Reader(text).run()


# -- rendering ----------------------------------------------------------------


def format_number(value: float) -> str:
    """Shortest text that reads back as exactly ``value``."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG = 3
_ATOM = 5


def render_expression(expr: Expression) -> str:
    return _render(expr)


def _render(expr: Expression) -> str:
    text, _ = _render_prec(expr)
    return text


def _render_prec(expr: Expression) -> tuple[str, int]:
    if isinstance(expr, Number):
        if expr.value < 0 or not math.isfinite(expr.value):
            raise ValueError(f"literal {expr.value!r} has no source form; use Neg")
        return format_number(expr.value), _ATOM
    if isinstance(expr, VarRef):
        return f"[{expr.name}]", _ATOM
    if isinstance(expr, Sum):
        return f"SUM({_render(expr.operand)})", _ATOM
    if isinstance(expr, Neg):
        inner, prec = _render_prec(expr.operand)
        if prec < _NEG:
            inner = f"({inner})"
        return f"-{inner}", _NEG
    if isinstance(expr, BinOp):
        prec = _PREC[expr.op]
        lhs, lp = _render_prec(expr.lhs)
        rhs, rp = _render_prec(expr.rhs)
        if expr.op == "^":
            # base is an atom, exponent a unary (right associative)
            if lp < _ATOM:
                lhs = f"({lhs})"
            if rp < _NEG:
                rhs = f"({rhs})"
        else:
            if lp < prec:
                lhs = f"({lhs})"
            if rp <= prec:
                rhs = f"({rhs})"
        return f"{lhs} {expr.op} {rhs}", prec
    raise TypeError(f"not an expression node: {expr!r}")


def _over(dims: Iterable[str]) -> str:
    dims = list(dims)
    return f" over {', '.join(dims)}" if dims else ""


def render_model(model: Model) -> str:
    """Canonical text for ``model``; parse_model reads it back unchanged."""
    out: list[str] = []
    for dim in model.dimensions:
        out.append(f"dimension {dim.name}: {' '.join(dim.instances)}")
    keyword = {"input": "input", "data": "data", "calculated": "calc", "output": "output"}
    for var in model.variables:
        head = f"{keyword[var.kind]} [{var.name}]{_over(var.dims)}"
        if var.expr is not None:
            out.append(f"{head} = {_render(var.expr)}")
        elif not var.dims:
            out.append(f"{head} = {format_number(var.table[()])}")
        else:
            out.append(f"{head}:")
            for key, value in var.table.items():
                out.append(f"    {' '.join(key)} {format_number(value)}")
    for check in model.totals:
        out.append(f"total [{check.variable}]{_over(check.over)} = {format_number(check.value)}")
    return "\n".join(out) + ("\n" if out else "")
