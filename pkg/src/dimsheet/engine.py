"""Dense evaluation of validated models over named dimensions."""

from __future__ import annotations

import types
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .model import (
    BinOp,
    Expression,
    InvalidReduction,
    ModelError,
    Neg,
    Number,
    Sum,
    ValidatedModel,
    VarRef,
)


class EvaluationError(ArithmeticError):
    def __init__(self, message: str, coordinate: Mapping[str, str] | None = None, variable: str | None = None):
        self.coordinate = dict(coordinate or {})
        self.variable = variable
        super().__init__(message)

    def __str__(self) -> str:
        where = f"[{self.variable}] " if self.variable else ""
        at = f" at {self.coordinate}" if self.coordinate else ""
        return f"{where}{self.args[0]}{at}"


class DivideByZero(EvaluationError):
    pass


class NonFiniteResult(EvaluationError):
    pass


class UnknownInput(ModelError):
    def __init__(self, name: str, reason: str = "not a scalar input"):
        super().__init__(f"[{name}] {reason}")
        self.name = name


class Axis(NamedTuple):
    name: str
    labels: tuple[str, ...]
    rank: int  # position in the model's canonical dimension order


@dataclass(frozen=True, eq=False)
class DimArray:
    """Values over a canonical-ordered dimension set, row-major, first axis outermost."""

    axes: tuple[Axis, ...]
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(len(a.labels) for a in self.axes)
        values = np.asarray(self.values, dtype=float).reshape(shape)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        ranks = [a.rank for a in self.axes]
        if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
            raise ValueError(f"axes not in canonical order: {[a.name for a in self.axes]}")

    @property
    def dims(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def coords(self) -> dict[str, tuple[str, ...]]:
        return {a.name: a.labels for a in self.axes}

    def __getitem__(self, labels: tuple[str, ...] | str) -> float:
        if isinstance(labels, str):
            labels = (labels,)
        if len(labels) != len(self.axes):
            raise KeyError(labels)
        index = tuple(a.labels.index(lab) for a, lab in zip(self.axes, labels))
        return float(self.values[index])

    def sel(self, **labels: str) -> "DimArray":
        """Fix some dimensions to one label each, dropping them."""
        index = []
        axes = []
        for axis in self.axes:
            if axis.name in labels:
                index.append(axis.labels.index(labels[axis.name]))
            else:
                index.append(slice(None))
                axes.append(axis)
        return DimArray(tuple(axes), self.values[tuple(index)])

    def __repr__(self) -> str:
        return f"DimArray(dims={self.dims}, shape={self.shape})"


def scalar(value: float) -> DimArray:
    return DimArray((), np.array(float(value)))


def _coordinate(axes: Sequence[Axis], flat_index: int) -> dict[str, str]:
    shape = tuple(len(a.labels) for a in axes)
    idx = np.unravel_index(flat_index, shape) if shape else ()
    return {a.name: a.labels[i] for a, i in zip(axes, idx)}


def _union_axes(a: DimArray, b: DimArray) -> tuple[Axis, ...]:
    merged: dict[str, Axis] = {}
    for axis in (*a.axes, *b.axes):
        seen = merged.get(axis.name)
        if seen is not None and seen != axis:
            raise ValueError(f"operands disagree on dimension {axis.name}")
        merged[axis.name] = axis
    return tuple(sorted(merged.values(), key=lambda ax: ax.rank))


def _expand(a: DimArray, axes: Sequence[Axis]) -> np.ndarray:
    names = set(a.dims)
    shape = [len(ax.labels) if ax.name in names else 1 for ax in axes]
    return a.values.reshape(shape)


_UFUNC = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


def broadcast_binop(op: str, a: DimArray, b: DimArray) -> DimArray:
    """Elementwise ``a op b`` over the union of both dimension sets."""
    axes = _union_axes(a, b)
    x = _expand(a, axes)
    y = _expand(b, axes)
    shape = tuple(len(ax.labels) for ax in axes)
    if op == "/":
        zero = np.broadcast_to(y == 0, shape)
        if zero.any():
            raise DivideByZero("division by zero", _coordinate(axes, int(np.flatnonzero(zero)[0])))
    with np.errstate(all="ignore"):
        out = np.broadcast_to(_UFUNC[op](x, y), shape)
    bad = ~np.isfinite(out)
    if bad.any():
        raise NonFiniteResult(f"non-finite result of {op!r}", _coordinate(axes, int(np.flatnonzero(bad)[0])))
    return DimArray(axes, np.array(out))


def reduce_sum(a: DimArray, target: Sequence[str]) -> DimArray:
    """Sum out every dimension of ``a`` not in ``target``."""
    if not set(target) <= set(a.dims):
        raise InvalidReduction(tuple(target), a.dims)
    drop = tuple(i for i, ax in enumerate(a.axes) if ax.name not in target)
    kept = tuple(ax for ax in a.axes if ax.name in target)
    values = a.values.sum(axis=drop) if drop else a.values
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise NonFiniteResult("non-finite sum", _coordinate(kept, int(np.flatnonzero(bad)[0])))
    return DimArray(kept, values)


def eval_expression(expr: Expression, env: Mapping[str, DimArray], target: Sequence[str]) -> DimArray:
    if isinstance(expr, Number):
        return scalar(expr.value)
    if isinstance(expr, VarRef):
        return env[expr.name]
    if isinstance(expr, Neg):
        inner = eval_expression(expr.operand, env, target)
        return DimArray(inner.axes, -inner.values)
    if isinstance(expr, BinOp):
        return broadcast_binop(
            expr.op,
            eval_expression(expr.lhs, env, target),
            eval_expression(expr.rhs, env, target),
        )
    if isinstance(expr, Sum):
        return reduce_sum(eval_expression(expr.operand, env, target), target)
    raise TypeError(f"not an expression node: {expr!r}")


def axes_for(model: ValidatedModel, dims: Sequence[str]) -> tuple[Axis, ...]:
    rank = {d.name: i for i, d in enumerate(model.dimensions)}
    return tuple(Axis(d, model.dimension(d).instances, rank[d]) for d in dims)


def apply_overrides(model: ValidatedModel, overrides: Mapping[str, float]) -> ValidatedModel:
    """Return ``model`` with scalar input values replaced."""
    if not overrides:
        return model
    by_name = {v.name: v for v in model.variables}
    for name, value in overrides.items():
        var = by_name.get(name)
        if var is None:
            raise UnknownInput(name, "is not a variable of the model")
        if var.kind != "input" or var.dims:
            raise UnknownInput(name, "is not a scalar input")
        if not np.isfinite(value):
            raise UnknownInput(name, f"override {value!r} is not finite")
    variables = tuple(
        replace(v, table={(): float(overrides[v.name])}) if v.name in overrides else v for v in model.variables
    )
    return replace(model, variables=variables)


def eval_model(model: ValidatedModel, overrides: Mapping[str, float] | None = None) -> Mapping[str, DimArray]:
    """Evaluate every variable in dependency order.

    Returns a read-only mapping from variable name to its DimArray.
    """
    model = apply_overrides(model, overrides or {})
    by_name = {v.name: v for v in model.variables}
    store: dict[str, DimArray] = {}
    for name in model.eval_order:
        var = by_name[name]
        axes = axes_for(model, var.dims)
        if var.table is not None:
            values = np.array([var.table[c] for c in model.instances(var.dims)], dtype=float)
            store[name] = DimArray(axes, values)
            continue
        try:
            result = eval_expression(var.expr, store, var.dims)
        except EvaluationError as err:
            err.variable = name
            raise
        # a formula over fewer dims than declared would have failed validation
        assert result.dims == var.dims, (name, result.dims, var.dims)
        store[name] = result
    return types.MappingProxyType({v.name: store[v.name] for v in model.variables})


def value_dump(store: Mapping[str, DimArray], digits: int | None = None) -> dict:
    """JSON-ready dump: {name: {dims, shape, coords, values}} with row-major values."""

    def fmt(x: float) -> float:
        return float(f"{x:.{digits}g}") if digits else float(x)

    return {
        name: {
            "dims": list(arr.dims),
            "shape": list(arr.shape),
            "coords": {k: list(v) for k, v in arr.coords.items()},
            "values": [fmt(x) for x in arr.values.ravel()],
        }
        for name, arr in store.items()
    }
