import pytest
from hypothesis import given
from hypothesis import strategies as st

from dimsheet.grid import (
    A1SyntaxError,
    BinOp,
    Call,
    CellRef,
    Formula,
    GridDoc,
    Label,
    Literal,
    Neg,
    Range,
    Sheet,
    Text,
    Value,
    a1,
    column_index,
    column_letters,
    parse_a1,
    serialize,
)
from dimsheet.gridvm import CyclicGrid, GridArithmeticError, GridTypeError, RefToEmptyCell, eval_grid


@pytest.mark.parametrize("col, letters", [(1, "A"), (26, "Z"), (27, "AA"), (52, "AZ"), (703, "AAA")])
def test_column_letters(col, letters):
    assert column_letters(col) == letters
    assert column_index(letters) == col


def test_a1_absolute():
    assert a1(3, 2) == "$B$3"
    assert a1(3, 2, absolute=False) == "B3"


def test_parse_sum_range():
    assert parse_a1("=SUM(J51:J54)") == Call("SUM", (Range(None, 51, 10, 54, 10),))


def test_parse_product():
    assert parse_a1("=B2*C2") == BinOp("*", CellRef(None, 2, 2), CellRef(None, 2, 3))


def test_parse_sumifs():
    expr = parse_a1('=SUMIFS(E2:E481,A2:A481,"Jan",C2:C481,"Standard",D2:D481,"N")')
    assert expr.name == "SUMIFS"
    assert len(expr.args) == 7
    assert expr.args[2] == Text("Jan")
    assert expr.args[0] == Range(None, 2, 5, 481, 5)


def test_dollars_and_sheets():
    assert parse_a1("=$B$3") == parse_a1("=B3") == CellRef(None, 3, 2)
    assert parse_a1("=Sheet_Name!C4") == CellRef("Sheet_Name", 4, 3)
    assert parse_a1("='Region N'!B3:F3") == Range("Region N", 3, 2, 3, 6)


def test_excel_power_semantics():
    # left-associative, and unary minus binds tighter than ^
    assert parse_a1("=2^3^2") == BinOp("^", BinOp("^", Literal(2), Literal(3)), Literal(2))
    assert parse_a1("=-2^2") == BinOp("^", Neg(Literal(2)), Literal(2))


def test_serialize_parenthesizes_chained_power():
    expr = BinOp("^", Literal(2), BinOp("^", Literal(3), Literal(2)))
    assert serialize(expr) == "=2^(3^2)"
    assert serialize(Neg(BinOp("^", Literal(2), Literal(2)))) == "=-(2^2)"


def test_serialize_refs():
    assert serialize(BinOp("+", CellRef(None, 1, 1), CellRef("Params", 2, 2))) == "=$A$1+Params!$B$2"


@pytest.mark.parametrize("text, offset", [("=1+", 3), ("=SUM(A1", 7), ("=FOO(1)", 1), ("A1", 0)])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(A1SyntaxError) as err:
        parse_a1(text)
    assert err.value.offset == offset


def test_inverted_range_is_normalized():
    assert parse_a1("=SUM(B3:A1)") == parse_a1("=SUM(A1:B3)")


refs = st.builds(
    CellRef, st.sampled_from([None, "Params", "Table_Month", "Region N"]), st.integers(1, 500), st.integers(1, 60)
)
ranges = st.builds(
    lambda sheet, r, c, h, w: Range(sheet, r, c, r + h, c + w),
    st.sampled_from([None, "Model"]),
    st.integers(1, 500),
    st.integers(1, 60),
    st.integers(0, 10),
    st.integers(0, 10),
)
leaves = st.one_of(st.floats(0, 1e9, allow_nan=False).map(Literal), refs)
grid_exprs = st.recursive(
    leaves,
    lambda inner: st.one_of(
        inner.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), inner, inner).map(lambda t: BinOp(*t)),
        st.lists(st.one_of(inner, ranges), min_size=1, max_size=3).map(lambda a: Call("SUM", tuple(a))),
        st.builds(
            lambda s, k, t: Call("SUMIFS", (s, k, Text(t))),
            ranges.filter(lambda r: r.c1 == r.c2),
            ranges.filter(lambda r: r.c1 == r.c2),
            st.sampled_from(["Jan", "N", "a b"]),
        ),
    ),
    max_leaves=10,
)


@given(grid_exprs)
def test_serialize_round_trip(expr):
    assert parse_a1(serialize(expr)) == expr


def doc_of(cells, name="S"):
    sheet = Sheet(name)
    for (r, c), cell in cells.items():
        sheet.set(r, c, cell)
    return GridDoc([sheet])


def test_three_cell_sum():
    doc = doc_of({(1, 1): Value(2), (2, 1): Value(3), (3, 1): Formula(parse_a1("=A1+A2"))})
    assert eval_grid(doc)["S", 3, 1] == 5


def test_cycle():
    doc = doc_of({(1, 1): Formula(parse_a1("=A2")), (2, 1): Formula(parse_a1("=A1"))})
    with pytest.raises(CyclicGrid) as err:
        eval_grid(doc)
    assert {("S", 1, 1), ("S", 2, 1)} <= set(err.value.cells)


def test_empty_reference_is_an_error():
    with pytest.raises(RefToEmptyCell):
        eval_grid(doc_of({(1, 1): Formula(parse_a1("=B7+1"))}))


def test_label_used_as_number():
    with pytest.raises(GridTypeError):
        eval_grid(doc_of({(1, 1): Label("x"), (1, 2): Formula(parse_a1("=A1*2"))}))


def test_divide_by_zero():
    with pytest.raises(GridArithmeticError):
        eval_grid(doc_of({(1, 1): Value(0), (1, 2): Formula(parse_a1("=1/A1"))}))


def test_cross_sheet_reference():
    a = Sheet("A")
    a.set(1, 1, Value(4))
    b = Sheet("B")
    b.set(1, 1, Formula(parse_a1("=A!A1^2")))
    assert eval_grid(GridDoc([a, b]))["B", 1, 1] == 16


def test_sumifs_exact_match():
    cells = {(1, 1): Label("k"), (1, 2): Label("v")}
    rows = [("Jan", 1.0), ("jan", 10.0), ("Feb", 100.0), ("Jan", 1000.0)]
    for i, (k, v) in enumerate(rows, start=2):
        cells[i, 1] = Label(k)
        cells[i, 2] = Value(v)
    cells[1, 4] = Formula(parse_a1('=SUMIFS(B2:B5,A2:A5,"Jan")'))
    assert eval_grid(doc_of(cells))["S", 1, 4] == 1001


def test_double_write_rejected():
    sheet = Sheet("S")
    sheet.set(1, 1, Value(1))
    with pytest.raises(ValueError):
        sheet.set(1, 1, Value(2))


@given(st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from("xyz"), st.floats(-1e3, 1e3)), min_size=1, max_size=6, unique_by=lambda t: t[:2]))
def test_sumifs_on_full_key_returns_single_row(rows):
    cells = {}
    for i, (k1, k2, v) in enumerate(rows, start=2):
        cells[i, 1] = Label(k1)
        cells[i, 2] = Label(k2)
        cells[i, 3] = Value(v)
    last = len(rows) + 1
    for j, (k1, k2, _) in enumerate(rows):
        cells[j + 2, 5] = Formula(parse_a1(f'=SUMIFS(C2:C{last},A2:A{last},"{k1}",B2:B{last},"{k2}")'))
    values = eval_grid(doc_of(cells))
    for j, (_, _, v) in enumerate(rows):
        assert values["S", j + 2, 5] == v


def test_json_round_trip_and_csv():
    doc = doc_of({(1, 1): Label("x, y"), (2, 1): Value(0.5), (2, 2): Formula(parse_a1("=A2*2"))}, "Main")
    again = GridDoc.from_json(doc.to_json())
    assert again.to_json() == doc.to_json()
    assert doc.sheet_csv("Main") == '"x, y",\n0.5,=$A$2*2\n'


def test_from_json_rejects_unknown_kind():
    with pytest.raises(ValueError):
        GridDoc.from_json({"sheets": [{"name": "S", "cells": [{"row": 1, "col": 1, "kind": "bool", "value": 1}]}]})
