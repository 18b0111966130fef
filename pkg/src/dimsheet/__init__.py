"""Compile and evaluate multidimensional spreadsheet models."""

from .engine import DimArray, broadcast_binop, eval_expression, eval_model, reduce_sum
from .fixtures import load_atw
from .model import Model, ValidatedModel, canonicalize, infer_dims, validate
from .parser import parse_expression, parse_model, render_model

__all__ = [
    "DimArray",
    "Model",
    "ValidatedModel",
    "broadcast_binop",
    "canonicalize",
    "eval_expression",
    "eval_model",
    "infer_dims",
    "load_atw",
    "parse_expression",
    "parse_model",
    "reduce_sum",
    "render_model",
    "validate",
]
