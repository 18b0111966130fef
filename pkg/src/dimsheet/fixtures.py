"""The bundled ATW model and helpers to derive variants of it."""

from __future__ import annotations

from dataclasses import replace
from importlib import resources

from .model import Dimension, Model, ValidatedModel, VariableDecl, coordinates, validate
from .parser import parse_expression, parse_model

ATW_PATH = resources.files("dimsheet") / "data" / "atw.dim"


def atw_text() -> str:
    return ATW_PATH.read_text(encoding="utf-8")


def load_atw() -> ValidatedModel:
    return validate(parse_model(atw_text()))


def resize_dimension(model: Model, name: str, size: int) -> Model:
    """Give dimension ``name`` exactly ``size`` instances.

    New instances are named ``<label>_<k>`` and copy the table values of the
    original instance they cycle from, so distribution totals no longer hold.
    """
    dim = model.dimension(name)
    base = dim.instances
    labels = tuple(
        base[i] if i < len(base) else f"{base[i % len(base)]}_{i // len(base)}" for i in range(size)
    )
    source = {new: base[i % len(base)] for i, new in enumerate(labels)}
    dims = tuple(Dimension(d.name, labels) if d.name == name else d for d in model.dimensions)

    variables = []
    for var in model.variables:
        if var.table is None or name not in var.dims:
            variables.append(var)
            continue
        axis = var.dims.index(name)
        table = {}
        for key in _keys(dims, var.dims):
            old = key[:axis] + (source[key[axis]],) + key[axis + 1 :]
            table[key] = var.table[old]
        variables.append(replace(var, table=table))
    return Model(dims, tuple(variables), model.totals)


def add_formula(model: Model, name: str, dims: tuple[str, ...], formula: str, kind: str = "calculated") -> Model:
    """Append a formula variable, e.g. a probe aggregate for metrics experiments."""
    var = VariableDecl(name, kind, tuple(dims), expr=parse_expression(formula))
    return Model(model.dimensions, (*model.variables, var), model.totals)


def _keys(dimensions, var_dims):
    lookup = {d.name: d.instances for d in dimensions}
    return coordinates([lookup[d] for d in var_dims])
