"""Dimensional model types, dimension inference and whole-model validation."""

from __future__ import annotations

import graphlib
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence, Union

KINDS = ("input", "data", "calculated", "output")
OPERATORS = ("+", "-", "*", "/", "^")


class ModelError(Exception):
    """Base class for model construction and validation failures."""


class UnknownDimension(ModelError):
    def __init__(self, name: str):
        super().__init__(f"unknown dimension {name!r}")
        self.name = name


class DuplicateDimension(ModelError):
    def __init__(self, name: str):
        super().__init__(f"duplicate dimension {name!r}")
        self.name = name


class DuplicateVariable(ModelError):
    def __init__(self, name: str):
        super().__init__(f"duplicate variable [{name}]")
        self.name = name


class UnknownVariable(ModelError):
    def __init__(self, name: str, referrer: str | None = None):
        where = f" (referenced by [{referrer}])" if referrer else ""
        super().__init__(f"unknown variable [{name}]{where}")
        self.name = name
        self.referrer = referrer


class InvalidReduction(ModelError):
    def __init__(self, target: Sequence[str], operand: Sequence[str]):
        super().__init__(
            f"cannot reduce over {tuple(operand)} to {tuple(target)}: "
            "target is not a subset of the operand's dimensions"
        )
        self.target = tuple(target)
        self.operand = tuple(operand)


class DimensionMismatch(ModelError):
    def __init__(self, var: str, declared: Sequence[str], inferred: Sequence[str]):
        super().__init__(
            f"[{var}] declared over {tuple(declared)} but its formula is over {tuple(inferred)}"
        )
        self.var = var
        self.declared = tuple(declared)
        self.inferred = tuple(inferred)


class CyclicDependency(ModelError):
    def __init__(self, cycle: Sequence[str]):
        super().__init__("cyclic dependency: " + " -> ".join(f"[{n}]" for n in cycle))
        self.cycle = tuple(cycle)


class IncompleteTable(ModelError):
    def __init__(self, var: str, missing: tuple[str, ...]):
        super().__init__(f"[{var}] has no value for {missing}")
        self.var = var
        self.missing = missing


class MalformedVariable(ModelError):
    """A declaration whose body does not fit its kind, or a table with bad labels."""


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expression"
    rhs: "Expression"


@dataclass(frozen=True)
class Sum:
    """Reduction of ``operand`` onto the dimension set of the enclosing variable."""

    operand: "Expression"


Expression = Union[Number, VarRef, Neg, BinOp, Sum]


def walk(expr: Expression) -> Iterator[Expression]:
    yield expr
    if isinstance(expr, (Neg, Sum)):
        yield from walk(expr.operand)
    elif isinstance(expr, BinOp):
        yield from walk(expr.lhs)
        yield from walk(expr.rhs)


def references(expr: Expression) -> list[str]:
    """Referenced variable names, first occurrence order, no repeats."""
    seen: dict[str, None] = {}
    for node in walk(expr):
        if isinstance(node, VarRef):
            seen.setdefault(node.name)
    return list(seen)


def contains_sum(expr: Expression) -> bool:
    return any(isinstance(node, Sum) for node in walk(expr))


def substitute(expr: Expression, name: str, replacement: Expression) -> Expression:
    if isinstance(expr, VarRef):
        return replacement if expr.name == name else expr
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, name, replacement))
    if isinstance(expr, Sum):
        return Sum(substitute(expr.operand, name, replacement))
    if isinstance(expr, BinOp):
        return BinOp(
            expr.op,
            substitute(expr.lhs, name, replacement),
            substitute(expr.rhs, name, replacement),
        )
    return expr


# -- declarations ------------------------------------------------------------


@dataclass(frozen=True)
class Dimension:
    name: str
    instances: tuple[str, ...]


@dataclass(frozen=True)
class VariableDecl:
    """One row of the formula list.

    ``table`` maps coordinate tuples (labels ordered like ``dims``) to values and
    is set for input/data variables; ``expr`` is set for calculated/output ones.
    """

    name: str
    kind: str
    dims: tuple[str, ...] = ()
    table: Mapping[tuple[str, ...], float] | None = None
    expr: Expression | None = None

    @property
    def is_formula(self) -> bool:
        return self.kind in ("calculated", "output")


@dataclass(frozen=True)
class TotalCheck:
    """Declares that ``variable`` summed down to ``over`` should equal ``value``.

    Violations are reported as validation warnings, not errors.
    """

    variable: str
    over: tuple[str, ...]
    value: float


@dataclass(frozen=True)
class Model:
    dimensions: tuple[Dimension, ...] = ()
    variables: tuple[VariableDecl, ...] = ()
    totals: tuple[TotalCheck, ...] = ()

    def dimension(self, name: str) -> Dimension:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        raise UnknownDimension(name)

    def variable(self, name: str) -> VariableDecl:
        for var in self.variables:
            if var.name == name:
                return var
        raise UnknownVariable(name)


@dataclass(frozen=True)
class ValidatedModel(Model):
    """A model whose dimension sets, tables and dependencies have been checked.

    Variable dims and table keys are stored in canonical order.
    """

    eval_order: tuple[str, ...] = ()
    inferred_dims: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def instances(self, dims: Sequence[str]) -> list[tuple[str, ...]]:
        return coordinates([self.dimension(d).instances for d in dims])

    def sizes(self) -> dict[str, int]:
        return {d.name: len(d.instances) for d in self.dimensions}


def coordinates(label_lists: Sequence[Sequence[str]]) -> list[tuple[str, ...]]:
    """Row-major Cartesian product (first list outermost)."""
    return [tuple(c) for c in itertools.product(*label_lists)]


# -- operations --------------------------------------------------------------


def canonicalize(dims: Sequence[str], model: Model) -> tuple[str, ...]:
    rank = {d.name: i for i, d in enumerate(model.dimensions)}
    seen: set[str] = set()
    for name in dims:
        if name not in rank:
            raise UnknownDimension(name)
        if name in seen:
            raise DuplicateDimension(name)
        seen.add(name)
    return tuple(sorted(dims, key=rank.__getitem__))


def _union(a: Sequence[str], b: Sequence[str], rank: Mapping[str, int]) -> tuple[str, ...]:
    return tuple(sorted(set(a) | set(b), key=rank.__getitem__))


def infer_dims(
    expr: Expression,
    env: Mapping[str, Sequence[str]],
    target: Sequence[str],
    order: Sequence[str] | None = None,
) -> tuple[str, ...]:
    """Dimension set of ``expr`` when it defines a variable over ``target``.

    ``order`` is the canonical dimension order; when omitted it is the order in
    which dimensions first appear in ``target`` and then in ``env``.
    """
    if order is None:
        order = list(dict.fromkeys([*target, *itertools.chain.from_iterable(env.values())]))
    rank = {d: i for i, d in enumerate(order)}
    target = tuple(sorted(target, key=rank.__getitem__))

    def visit(node: Expression) -> tuple[str, ...]:
        if isinstance(node, Number):
            return ()
        if isinstance(node, VarRef):
            if node.name not in env:
                raise UnknownVariable(node.name)
            return tuple(sorted(env[node.name], key=rank.__getitem__))
        if isinstance(node, Neg):
            return visit(node.operand)
        if isinstance(node, BinOp):
            return _union(visit(node.lhs), visit(node.rhs), rank)
        if isinstance(node, Sum):
            inner = visit(node.operand)
            if not set(target) <= set(inner):
                raise InvalidReduction(target, inner)
            return target
        raise TypeError(f"not an expression node: {node!r}")

    return visit(expr)


def _check_table(var: VariableDecl, dims: tuple[str, ...], model: Model) -> dict:
    """Re-key ``var.table`` to canonical dim order and check completeness."""
    assert var.table is not None
    perm = [var.dims.index(d) for d in dims]
    labels = {d: set(model.dimension(d).instances) for d in dims}
    table: dict[tuple[str, ...], float] = {}
    for key, value in var.table.items():
        if len(key) != len(dims):
            raise MalformedVariable(f"[{var.name}] row {key} has {len(key)} labels, expected {len(dims)}")
        for d, label in zip(var.dims, key):
            if label not in labels[d]:
                raise MalformedVariable(f"[{var.name}] row {key}: {label!r} is not an instance of {d}")
        if not math.isfinite(value):
            raise MalformedVariable(f"[{var.name}] row {key} is not finite")
        table[tuple(key[i] for i in perm)] = float(value)
    for coord in coordinates([model.dimension(d).instances for d in dims]):
        if coord not in table:
            raise IncompleteTable(var.name, coord)
    # canonical row-major key order keeps rendering and equality stable
    return {coord: table[coord] for coord in coordinates([model.dimension(d).instances for d in dims])}


def _eval_order(model: Model, deps: Mapping[str, list[str]]) -> tuple[str, ...]:
    position = {v.name: i for i, v in enumerate(model.variables)}
    sorter = graphlib.TopologicalSorter({name: deps[name] for name in position})
    try:
        sorter.prepare()
    except graphlib.CycleError as err:
        cycle = list(err.args[1])
        # graphlib reports the cycle against dependency direction
        raise CyclicDependency(cycle[::-1]) from None
    order: list[str] = []
    ready: list[str] = []
    while sorter.is_active():
        ready.extend(sorter.get_ready())
        ready.sort(key=position.__getitem__)
        name = ready.pop(0)
        order.append(name)
        sorter.done(name)
    return tuple(order)


def _check_totals(model: ValidatedModel, tol: float = 1e-12) -> list[str]:
    warnings = []
    for check in model.totals:
        var = model.variable(check.variable)
        if var.table is None:
            warnings.append(f"total check on [{var.name}] skipped: not a data table")
            continue
        over = canonicalize(check.over, model)
        if not set(over) <= set(var.dims):
            raise InvalidReduction(over, var.dims)
        keep = [var.dims.index(d) for d in over]
        sums: dict[tuple[str, ...], float] = {}
        for key, value in var.table.items():
            k = tuple(key[i] for i in keep)
            sums[k] = sums.get(k, 0.0) + value
        for k, total in sums.items():
            if abs(total - check.value) > tol:
                warnings.append(
                    f"[{var.name}] at {dict(zip(over, k))} totals {total!r}, expected {check.value!r}"
                )
    return warnings


def validate(model: Model) -> ValidatedModel:
    """Check the model and return it with canonical dims and an evaluation order."""
    names: set[str] = set()
    for dim in model.dimensions:
        if dim.name in names:
            raise DuplicateDimension(dim.name)
        names.add(dim.name)
        if not dim.instances:
            raise MalformedVariable(f"dimension {dim.name} has no instances")
        if len(set(dim.instances)) != len(dim.instances):
            raise MalformedVariable(f"dimension {dim.name} repeats an instance label")

    declared: dict[str, tuple[str, ...]] = {}
    for var in model.variables:
        if var.name in declared:
            raise DuplicateVariable(var.name)
        if var.kind not in KINDS:
            raise MalformedVariable(f"[{var.name}] has unknown kind {var.kind!r}")
        declared[var.name] = canonicalize(var.dims, model)

    order = [d.name for d in model.dimensions]
    variables = []
    inferred: dict[str, tuple[str, ...]] = {}
    deps: dict[str, list[str]] = {}
    for var in model.variables:
        dims = declared[var.name]
        if var.is_formula:
            if var.expr is None or var.table is not None:
                raise MalformedVariable(f"{var.kind} [{var.name}] needs a formula")
            for ref in references(var.expr):
                if ref not in declared:
                    raise UnknownVariable(ref, var.name)
            got = infer_dims(var.expr, declared, dims, order)
            if got != dims:
                raise DimensionMismatch(var.name, dims, got)
            deps[var.name] = references(var.expr)
            variables.append(replace(var, dims=dims))
        else:
            if var.table is None or var.expr is not None:
                raise MalformedVariable(f"{var.kind} [{var.name}] needs a value table")
            got = dims
            deps[var.name] = []
            variables.append(replace(var, dims=dims, table=_check_table(var, dims, model)))
        inferred[var.name] = got

    eval_order = _eval_order(model, deps)
    checked = ValidatedModel(
        dimensions=model.dimensions,
        variables=tuple(variables),
        totals=tuple(replace(t, over=canonicalize(t.over, model)) for t in model.totals),
        eval_order=eval_order,
        inferred_dims=inferred,
    )
    for check in model.totals:
        if check.variable not in declared:
            raise UnknownVariable(check.variable)
    return replace(checked, warnings=tuple(_check_totals(checked)))


def as_model(model: Model) -> Model:
    """Strip validation results, keeping declarations."""
    return Model(model.dimensions, model.variables, model.totals)


def consumers(model: Model, name: str) -> list[str]:
    return [v.name for v in model.variables if v.expr is not None and name in references(v.expr)]


def inline_variable(model: Model, name: str) -> Model:
    """Replace every reference to a calculated variable by its formula and drop it.

    Refused when the formula contains a SUM and a consumer lives over different
    dims, since SUM reduces onto the enclosing variable's dimension set.
    """
    var = model.variable(name)
    if not var.is_formula:
        raise MalformedVariable(f"[{name}] is {var.kind}; only formulas can be inlined")
    assert var.expr is not None
    if var.kind == "output":
        raise MalformedVariable(f"[{name}] is an output and cannot be removed")
    new_vars = []
    for other in model.variables:
        if other.name == name:
            continue
        if other.expr is not None and name in references(other.expr):
            if contains_sum(var.expr) and set(other.dims) != set(var.dims):
                raise MalformedVariable(
                    f"cannot inline [{name}] into [{other.name}]: its SUM would reduce differently"
                )
            other = replace(other, expr=substitute(other.expr, name, var.expr))
        new_vars.append(other)
    totals = tuple(t for t in model.totals if t.variable != name)
    return Model(model.dimensions, tuple(new_vars), totals)
