from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dimsheet.model import (
    BinOp,
    CyclicDependency,
    Dimension,
    DimensionMismatch,
    DuplicateDimension,
    IncompleteTable,
    InvalidReduction,
    Model,
    Neg,
    Number,
    Sum,
    UnknownDimension,
    UnknownVariable,
    VariableDecl,
    VarRef,
    as_model,
    canonicalize,
    inline_variable,
    infer_dims,
    validate,
)
from dimsheet.parser import parse_expression

MSPR = ("Month", "Sector", "Product", "Region")

ENV = {
    "MSP Unit Sales": ("Month", "Sector", "Product"),
    "Region Sales Distribution per Sector": ("Sector", "Region"),
    "MSPR Unit Sales": MSPR,
    "Annual Sector-Product Unit Sales": ("Sector", "Product"),
    "Monthly Sales Distribution per Sector": ("Month", "Sector"),
    "Base Price": (),
}


def test_canonicalize_sorts_by_declaration(atw):
    assert canonicalize(["Region", "Month"], atw) == ("Month", "Region")
    assert canonicalize(list(MSPR), atw) == MSPR


def test_canonicalize_rejects_duplicates_and_unknowns(atw):
    with pytest.raises(DuplicateDimension):
        canonicalize(["Month", "Month"], atw)
    with pytest.raises(UnknownDimension):
        canonicalize(["Quarter"], atw)


def test_infer_join():
    expr = parse_expression("[MSP Unit Sales] * [Region Sales Distribution per Sector]")
    assert infer_dims(expr, ENV, MSPR, MSPR) == MSPR


def test_infer_reduction():
    expr = Sum(VarRef("MSPR Unit Sales"))
    assert infer_dims(expr, ENV, ("Month", "Product", "Region"), MSPR) == ("Month", "Product", "Region")
    assert infer_dims(expr, ENV, MSPR, MSPR) == MSPR


def test_infer_invalid_reduction():
    with pytest.raises(InvalidReduction):
        infer_dims(Sum(VarRef("MSP Unit Sales")), ENV, ("Month", "Product", "Region"), MSPR)


def test_infer_unknown_variable():
    with pytest.raises(UnknownVariable):
        infer_dims(VarRef("nope"), ENV, (), MSPR)


def test_scalar_literal_has_no_dims():
    assert infer_dims(Number(5), ENV, (), MSPR) == ()


names = st.sampled_from(sorted(ENV))


@given(names, names, st.sampled_from("+-*/^"))
def test_infer_is_canonical_union_and_symmetric(a, b, op):
    ab = infer_dims(BinOp(op, VarRef(a), VarRef(b)), ENV, (), MSPR)
    ba = infer_dims(BinOp(op, VarRef(b), VarRef(a)), ENV, (), MSPR)
    assert ab == ba == tuple(d for d in MSPR if d in set(ENV[a]) | set(ENV[b]))


@given(names, st.data())
def test_sum_infers_its_target(name, data):
    dims = ENV[name]
    target = tuple(d for d in dims if data.draw(st.booleans()))
    assert infer_dims(Sum(Neg(VarRef(name))), ENV, target, MSPR) == target


def test_validate_atw(atw):
    assert len(atw.variables) == 31
    assert atw.eval_order == tuple(v.name for v in atw.variables)
    kinds = [atw.variable(n).kind for n in atw.eval_order[:17]]
    assert set(kinds) <= {"input", "data", "calculated"}
    for name in atw.eval_order[17:]:
        assert atw.variable(name).kind in ("calculated", "output", "data")
    assert atw.warnings == ()
    assert all(atw.inferred_dims[v.name] == v.dims for v in atw.variables)


def test_validate_is_idempotent(atw):
    again = validate(atw)
    assert as_model(again) == as_model(atw)
    assert again.eval_order == atw.eval_order


FORMULA_LIST = [
    "Base Price", "Base Price Multiplier", "Unit Production Cost", "Rebate Percentage",
    "Sector Price Factor", "Sector Base Price", "DemParA", "DemParB",
    "Sector Annual Demand Units", "Unit Delivery Cost", "PR Unit Cost",
    "Product Distribution per Sector", "Annual Sector-Product Unit Sales", "Price",
    "Annual Sector-Product Sales Amount", "Region Sales Distribution per Sector",
    "Monthly Sales Distribution per Sector", "MSP Unit Sales", "MSP Sales Amount",
    "MSPR Unit Sales", "MSPR Variable Cost", "Monthly Variable Cost", "Monthly Unit Sales",
    "Monthly Sales Amount", "Monthly Fixed Cost", "Monthly Costs", "Monthly Profit",
    "MPR Unit Sales", "MP Unit Sales", "MP Sales Amount", "Total Profit",
]


def test_every_formula_list_symbol_declared_once(atw):
    assert [v.name for v in atw.variables] == FORMULA_LIST


def test_declared_dims_follow_formula_list(atw):
    assert atw.variable("MSPR Unit Sales").dims == MSPR
    assert atw.variable("MPR Unit Sales").dims == ("Month", "Product", "Region")
    assert atw.variable("Total Profit").dims == ()
    assert atw.variable("Monthly Unit Sales").kind == "output"


def test_dimension_mismatch(atw):
    bad = replace(atw.variable("MSP Unit Sales"), dims=("Month", "Sector"))
    model = Model(atw.dimensions, tuple(bad if v.name == bad.name else v for v in atw.variables))
    with pytest.raises(DimensionMismatch) as err:
        validate(model)
    assert err.value.inferred == ("Month", "Sector", "Product")


def test_cycle_detected():
    model = Model(
        (),
        (
            VariableDecl("a", "calculated", (), expr=Neg(VarRef("b"))),
            VariableDecl("b", "calculated", (), expr=Neg(VarRef("a"))),
        ),
    )
    with pytest.raises(CyclicDependency) as err:
        validate(model)
    assert set(err.value.cycle) == {"a", "b"}
    assert err.value.cycle[0] == err.value.cycle[-1]


def test_incomplete_table():
    model = Model(
        (Dimension("P", ("x", "y")),),
        (VariableDecl("t", "data", ("P",), {("x",): 1.0}),),
    )
    with pytest.raises(IncompleteTable) as err:
        validate(model)
    assert err.value.missing == ("y",)


def test_unknown_reference():
    model = Model((), (VariableDecl("a", "calculated", (), expr=VarRef("ghost")),))
    with pytest.raises(UnknownVariable):
        validate(model)


def test_broadcast_up_is_rejected():
    model = Model(
        (Dimension("P", ("x", "y")),),
        (
            VariableDecl("k", "input", (), {(): 1.0}),
            VariableDecl("up", "calculated", ("P",), expr=VarRef("k")),
        ),
    )
    with pytest.raises(DimensionMismatch):
        validate(model)


def test_table_keys_are_canonicalized():
    model = Model(
        (Dimension("A", ("a1", "a2")), Dimension("B", ("b1",))),
        (VariableDecl("t", "data", ("B", "A"), {("b1", "a1"): 1.0, ("b1", "a2"): 2.0}),),
    )
    checked = validate(model)
    assert checked.variable("t").dims == ("A", "B")
    assert checked.variable("t").table == {("a1", "b1"): 1.0, ("a2", "b1"): 2.0}


def test_total_check_warns(atw):
    table = dict(atw.variable("Region Sales Distribution per Sector").table)
    table["Government", "N"] = 0.26
    var = replace(atw.variable("Region Sales Distribution per Sector"), table=table)
    model = Model(atw.dimensions, tuple(var if v.name == var.name else v for v in atw.variables), atw.totals)
    checked = validate(model)
    assert len(checked.warnings) == 1
    assert "Government" in checked.warnings[0]


def test_inline_variable(atw):
    fused = validate(inline_variable(atw, "MSPR Unit Sales"))
    assert "MSPR Unit Sales" not in [v.name for v in fused.variables]
    expr = fused.variable("MPR Unit Sales").expr
    assert expr == Sum(BinOp("*", VarRef("MSP Unit Sales"), VarRef("Region Sales Distribution per Sector")))
