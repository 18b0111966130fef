"""Compile dimensional models onto 2D grids.

A variable is either *projected* (its dimensions split over sheet, row and
column axes, outer to inner) or stored as a *table column* of a flat table
whose key columns enumerate every coordinate of a dimension set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .grid import (
    BinOp as GBinOp,
    Call,
    CellRef,
    Formula,
    GridDoc,
    GridExpr,
    Label,
    Literal,
    Neg as GNeg,
    Range,
    Text,
    Value,
)
from .model import (
    BinOp,
    Expression,
    Neg,
    Number,
    Sum,
    ValidatedModel,
    VarRef,
    coordinates,
    infer_dims,
)

PARAMS_SHEET = "Params"
MAIN_SHEET = "Model"
PROJECTION = "projection"
TABLE_COLUMN = "table-column"

DEFAULT_ROLES = {"M": "Month", "S": "Sector", "P": "Product", "R": "Region"}


class LayoutError(Exception):
    pass


class UnknownPreset(LayoutError):
    def __init__(self, name: str):
        super().__init__(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        self.name = name


class PresetInapplicable(LayoutError):
    pass


class UnplacedVariable(LayoutError):
    pass


class BadCoordinate(LayoutError):
    pass


class OverlapError(LayoutError):
    pass


# -- plan types ------------------------------------------------------------------


@dataclass(frozen=True)
class FlatTable:
    """Rows enumerate ``nest`` (outer to inner); key columns follow ``key``."""

    key: tuple[str, ...]
    nest: tuple[str, ...]
    sheet: str
    origin: tuple[int, int]  # first data row, first key column
    members: tuple[str, ...]

    def key_col(self, dim: str) -> int:
        return self.origin[1] + self.key.index(dim)

    def value_col(self, var: str) -> int:
        return self.origin[1] + len(self.key) + self.members.index(var)


@dataclass(frozen=True)
class Placement:
    variable: str
    style: str
    sheet_dims: tuple[str, ...] = ()
    row_dims: tuple[str, ...] = ()
    col_dims: tuple[str, ...] = ()
    sheet: str = MAIN_SHEET  # a str.format template when sheet_dims is set
    origin: tuple[int, int] = (1, 1)
    table: int | None = None
    column: int | None = None

    @property
    def dims(self) -> tuple[str, ...]:
        return self.sheet_dims + self.row_dims + self.col_dims


@dataclass(frozen=True)
class LayoutPlan:
    placements: Mapping[str, Placement]
    tables: tuple[FlatTable, ...]
    preset: str | None
    instances: Mapping[str, tuple[str, ...]]  # dimension -> labels, canonical order
    var_dims: Mapping[str, tuple[str, ...]]  # variable -> canonical dims

    def placement(self, var: str) -> Placement:
        try:
            return self.placements[var]
        except KeyError:
            raise UnplacedVariable(f"[{var}] has no placement") from None

    def size(self, dims: Sequence[str]) -> int:
        return math.prod(len(self.instances[d]) for d in dims)

    def sheets_of(self, var: str) -> list[str]:
        p = self.placement(var)
        if p.style == TABLE_COLUMN:
            return [self.tables[p.table].sheet]
        if not p.sheet_dims:
            return [p.sheet]
        return [
            sheet_name(p.sheet_dims, labels)
            for labels in coordinates([self.instances[d] for d in p.sheet_dims])
        ]


def sheet_name(dims: Sequence[str], labels: Sequence[str]) -> str:
    return "__".join(f"{d}_{lab}" for d, lab in zip(dims, labels))


def _template(dims: Sequence[str]) -> str:
    return "__".join(f"{d}_{{{d}}}" for d in dims)


# -- assignments and presets ------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    sheets: tuple[str, ...] = ()
    rows: tuple[str, ...] = ()
    cols: tuple[str, ...] = ()


@dataclass(frozen=True)
class TableColumn:
    key: tuple[str, ...]
    nest: tuple[str, ...] | None = None  # defaults to canonical order


# role letters: M S P R; signature is the role set a preset targets
PRESETS: dict[str, tuple[str, object]] = {
    "MPR1": ("MPR", Projection(rows=("P", "R"), cols=("M",))),
    "MPR2": ("MPR", TableColumn(key=("M", "R", "P"), nest=("P", "R", "M"))),
    "MSP1": ("MSP", Projection(rows=("P", "S"), cols=("M",))),
    "MSP2": ("MSP", Projection(rows=("M",), cols=("S", "P"))),
    "MSP3": ("MSP", Projection(rows=("S", "P"), cols=("M",))),
    "MSP4": ("MSP", Projection(rows=("M",), cols=("P", "S"))),
    "MSP5": ("MSP", Projection(sheets=("S",), rows=("P",), cols=("M",))),
    "MSP6": ("MSP", Projection(rows=("P", "S", "M"))),
    "MSPR1": ("MSPR", Projection(rows=("P", "S", "R"), cols=("M",))),
    "MSPR2": ("MSPR", Projection(sheets=("R",), rows=("S", "P"), cols=("M",))),
    "MSPR3": ("MSPR", Projection(rows=("R", "P", "S"), cols=("M",))),
    "MSPR4": ("MSPR", Projection(rows=("S", "R", "P", "M"))),
    "MSPR6": ("MSPR", Projection(sheets=("S", "R"), rows=("P",), cols=("M",))),
    "DB": ("", None),
}


def default_assignment(dims: Sequence[str]) -> Projection:
    """Innermost dimension across columns, the rest down the rows."""
    dims = tuple(dims)
    if not dims:
        return Projection()
    return Projection(rows=dims[:-1], cols=dims[-1:])


def preset_plan(model: ValidatedModel, preset: str, roles: Mapping[str, str] | None = None) -> LayoutPlan:
    """Plan for a catalogued structure; uncovered variables get the default layout."""
    if preset not in PRESETS:
        raise UnknownPreset(preset)
    roles = dict(DEFAULT_ROLES if roles is None else roles)
    signature, scheme = PRESETS[preset]
    model_dims = [d.name for d in model.dimensions]
    missing = [r for r in signature if roles.get(r) not in model_dims]
    if missing:
        raise PresetInapplicable(
            f"preset {preset} needs dimensions for roles {', '.join(missing)} "
            f"({', '.join(str(roles.get(r)) for r in missing)}); model has {', '.join(model_dims) or 'none'}"
        )

    assignments: dict[str, object] = {}
    for var in model.variables:
        if not var.dims:
            continue
        if preset == "DB":
            assignments[var.name] = TableColumn(key=var.dims)
        elif set(var.dims) == {roles[r] for r in signature}:
            assignments[var.name] = _resolve(scheme, roles)
        else:
            assignments[var.name] = default_assignment(var.dims)
    return build_plan(model, assignments, preset)


def _resolve(scheme, roles: Mapping[str, str]):
    def names(letters):
        return tuple(roles[r] for r in letters)

    if isinstance(scheme, Projection):
        return Projection(names(scheme.sheets), names(scheme.rows), names(scheme.cols))
    return TableColumn(names(scheme.key), names(scheme.nest) if scheme.nest else None)


def plan_from_json(model: ValidatedModel, data: Mapping) -> LayoutPlan:
    """Plan from a file of per-variable axis assignments.

    ``{"name": ..., "variables": {"MSPR Unit Sales": {"sheets": [], "rows": [...],
    "cols": [...]}, "MPR Unit Sales": {"table": [...], "nest": [...]}}}``;
    unlisted variables get the default layout.
    """
    known = {v.name for v in model.variables}
    spec = data.get("variables", {})
    for name in spec:
        if name not in known:
            raise UnplacedVariable(f"plan names unknown variable [{name}]")
    assignments: dict[str, object] = {}
    for var in model.variables:
        if not var.dims:
            continue
        entry = spec.get(var.name)
        if entry is None:
            assignments[var.name] = default_assignment(var.dims)
        elif "table" in entry:
            nest = entry.get("nest")
            assignments[var.name] = TableColumn(tuple(entry["table"]), tuple(nest) if nest else None)
        else:
            assignments[var.name] = Projection(
                tuple(entry.get("sheets", ())), tuple(entry.get("rows", ())), tuple(entry.get("cols", ()))
            )
    return build_plan(model, assignments, data.get("name"))


# -- packing -----------------------------------------------------------------------


def header_rows(p: Placement) -> int:
    """Rows between a block's title row and its first value row."""
    return max(len(p.col_dims), 1)


def block_top_left(p: Placement) -> tuple[int, int]:
    """Title cell of a projected block, derived from its value origin."""
    r0, c0 = p.origin
    return r0 - 1 - header_rows(p), c0 - len(p.row_dims) - (1 if p.col_dims else 0)


def _check_partition(var: str, dims: tuple[str, ...], parts: Sequence[Sequence[str]]):
    flat = [d for part in parts for d in part]
    if len(flat) != len(set(flat)) or set(flat) != set(dims):
        raise LayoutError(f"[{var}] axes {list(map(list, parts))} do not partition its dims {list(dims)}")


def build_plan(model: ValidatedModel, assignments: Mapping[str, object], preset: str | None) -> LayoutPlan:
    instances = {d.name: d.instances for d in model.dimensions}
    var_dims = {v.name: v.dims for v in model.variables}
    placements: dict[str, Placement] = {}
    cursors: dict[tuple[str, ...] | str, int] = {}
    tables: dict[tuple[tuple[str, ...], tuple[str, ...]], list[str]] = {}
    params_row = 0

    for var in model.variables:
        if not var.dims:
            params_row += 1
            placements[var.name] = Placement(var.name, PROJECTION, sheet=PARAMS_SHEET, origin=(params_row, 2))
            continue
        a = assignments.get(var.name, default_assignment(var.dims))
        if isinstance(a, TableColumn):
            _check_partition(var.name, var.dims, [a.key])
            nest = tuple(a.nest) if a.nest else var.dims
            _check_partition(var.name, var.dims, [nest])
            tables.setdefault((tuple(a.key), nest), []).append(var.name)
            continue
        _check_partition(var.name, var.dims, [a.sheets, a.rows, a.cols])
        group = tuple(a.sheets) or MAIN_SHEET
        top = cursors.get(group, 1)
        p = Placement(
            var.name,
            PROJECTION,
            tuple(a.sheets),
            tuple(a.rows),
            tuple(a.cols),
            sheet=_template(a.sheets) if a.sheets else MAIN_SHEET,
        )
        origin = (top + 1 + header_rows(p), 1 + len(p.row_dims) + (1 if p.col_dims else 0))
        p = Placement(p.variable, p.style, p.sheet_dims, p.row_dims, p.col_dims, p.sheet, origin)
        nrows = math.prod(len(instances[d]) for d in p.row_dims)
        cursors[group] = origin[0] + nrows + 1
        placements[var.name] = p

    flat: list[FlatTable] = []
    names: set[str] = set()
    for (key, nest), members in tables.items():
        name = "Table_" + "_".join(key)
        if name in names:
            name += f"_{len(flat)}"
        names.add(name)
        table = FlatTable(key, nest, name, (2, 1), tuple(members))
        index = len(flat)
        flat.append(table)
        for m in members:
            placements[m] = Placement(
                m,
                TABLE_COLUMN,
                row_dims=nest,
                sheet=name,
                origin=(2, table.value_col(m)),
                table=index,
                column=table.value_col(m),
            )
    ordered = {v.name: placements[v.name] for v in model.variables}
    return LayoutPlan(ordered, tuple(flat), preset, instances, var_dims)


# -- addressing ----------------------------------------------------------------------


def _radix(dims: Sequence[str], labels: Mapping[str, str], instances) -> int:
    index = 0
    for d in dims:
        options = instances[d]
        index = index * len(options) + options.index(labels[d])
    return index


def cell_address(plan: LayoutPlan, var: str, coords: Sequence[str]) -> CellRef:
    """Sheet, row and column of ``var`` at ``coords`` (labels in canonical dim order)."""
    p = plan.placement(var)
    dims = plan.var_dims[var]
    if len(coords) != len(dims):
        raise BadCoordinate(f"[{var}] over {dims} given {tuple(coords)}")
    labels = dict(zip(dims, coords))
    for d, lab in labels.items():
        if lab not in plan.instances[d]:
            raise BadCoordinate(f"{lab!r} is not an instance of {d}")
    if p.style == TABLE_COLUMN:
        table = plan.tables[p.table]
        return CellRef(table.sheet, table.origin[0] + _radix(table.nest, labels, plan.instances), p.column)
    sheet = p.sheet.format(**labels) if p.sheet_dims else p.sheet
    row = p.origin[0] + _radix(p.row_dims, labels, plan.instances)
    col = p.origin[1] + _radix(p.col_dims, labels, plan.instances)
    return CellRef(sheet, row, col)


Box = tuple[str, int, int, int, int]  # sheet, r1, c1, r2, c2


def regions(plan: LayoutPlan) -> list[tuple[str, Box]]:
    """Bounding box of every block (headers included) and flat table."""
    out: list[tuple[str, Box]] = []
    for var, p in plan.placements.items():
        if p.style == TABLE_COLUMN:
            continue
        if not plan.var_dims[var]:
            r, c = p.origin
            out.append((var, (p.sheet, r, c - 1, r, c)))
            continue
        top, left = block_top_left(p)
        bottom = p.origin[0] + plan.size(p.row_dims) - 1
        right = p.origin[1] + plan.size(p.col_dims) - 1
        right = max(right, left + len(p.row_dims))
        for sheet in plan.sheets_of(var):
            out.append((var, (sheet, top, left, bottom, right)))
    for t in plan.tables:
        box = (
            t.sheet,
            t.origin[0] - 1,
            t.origin[1],
            t.origin[0] + plan.size(t.key) - 1,
            t.origin[1] + len(t.key) + len(t.members) - 1,
        )
        out.append((f"table {t.sheet}", box))
    return out


def check_overlaps(plan: LayoutPlan) -> None:
    boxes = regions(plan)
    for name, (sheet, r1, c1, r2, c2) in boxes:
        if r1 < 1 or c1 < 1:
            raise OverlapError(f"{name} extends past the sheet edge on {sheet}")
    by_sheet: dict[str, list[tuple[str, Box]]] = {}
    for name, box in boxes:
        by_sheet.setdefault(box[0], []).append((name, box))
    for sheet, items in by_sheet.items():
        for (n1, a), (n2, b) in itertools.combinations(items, 2):
            if a[1] <= b[3] and b[1] <= a[3] and a[2] <= b[4] and b[2] <= a[4]:
                raise OverlapError(f"{n1} and {n2} overlap on sheet {sheet}")


# -- formula emission -----------------------------------------------------------------


def _local(ref: CellRef, host: str) -> CellRef:
    return CellRef(None if ref.sheet == host else ref.sheet, ref.row, ref.col)


def _rectangle(refs: Sequence[CellRef]) -> Range | None:
    sheets = {r.sheet for r in refs}
    if len(sheets) != 1:
        return None
    rows = [r.row for r in refs]
    cols = [r.col for r in refs]
    r1, r2, c1, c2 = min(rows), max(rows), min(cols), max(cols)
    cells = {(r.row, r.col) for r in refs}
    if len(cells) != len(refs) or (r2 - r1 + 1) * (c2 - c1 + 1) != len(cells):
        return None
    return Range(sheets.pop(), r1, c1, r2, c2)


def emit_aggregate(
    plan: LayoutPlan,
    source: str,
    coords: Sequence[Sequence[str]],
    host_sheet: str,
    kept: Mapping[str, str] | None = None,
) -> GridExpr:
    """SUM of ``source`` over ``coords`` as one formula.

    Table columns become SUMIFS over the key columns (one criterion per kept
    dimension); a set of cells forming one rectangle becomes ``SUM(range)``;
    anything else lists every cell.
    """
    if not coords:
        raise BadCoordinate(f"empty reduction over [{source}]")
    kept = dict(kept or {})
    p = plan.placement(source)
    if p.style == TABLE_COLUMN:
        table = plan.tables[p.table]
        r1 = table.origin[0]
        r2 = r1 + plan.size(table.key) - 1
        sheet = None if table.sheet == host_sheet else table.sheet
        values = Range(sheet, r1, p.column, r2, p.column)
        criteria: list[GridExpr] = []
        for d in table.key:
            if d in kept:
                col = table.key_col(d)
                criteria += [Range(sheet, r1, col, r2, col), Text(kept[d])]
        if criteria:
            return Call("SUMIFS", (values, *criteria))
        return Call("SUM", (values,))
    refs = [cell_address(plan, source, c) for c in coords]
    rect = _rectangle(refs)
    if rect is not None:
        sheet = None if rect.sheet == host_sheet else rect.sheet
        if rect.r1 == rect.r2 and rect.c1 == rect.c2:
            return Call("SUM", (CellRef(sheet, rect.r1, rect.c1),))
        return Call("SUM", (Range(sheet, rect.r1, rect.c1, rect.r2, rect.c2),))
    return Call("SUM", tuple(_local(r, host_sheet) for r in refs))


def translate(
    plan: LayoutPlan,
    expr: Expression,
    at: Mapping[str, str],
    target: Sequence[str],
    host_sheet: str,
) -> GridExpr:
    """Grid formula for ``expr`` evaluated at coordinate ``at`` of a variable over ``target``."""
    order = list(plan.instances)
    if isinstance(expr, Number):
        return Literal(expr.value)
    if isinstance(expr, VarRef):
        dims = plan.var_dims[expr.name]
        return _local(cell_address(plan, expr.name, [at[d] for d in dims]), host_sheet)
    if isinstance(expr, Neg):
        return GNeg(translate(plan, expr.operand, at, target, host_sheet))
    if isinstance(expr, BinOp):
        return GBinOp(
            expr.op,
            translate(plan, expr.lhs, at, target, host_sheet),
            translate(plan, expr.rhs, at, target, host_sheet),
        )
    if isinstance(expr, Sum):
        kept = {d: at[d] for d in target}
        inner = infer_dims(expr.operand, plan.var_dims, target, order)
        axes = [plan.instances[d] if d not in kept else (kept[d],) for d in inner]
        points = coordinates(axes)
        if isinstance(expr.operand, VarRef):
            return emit_aggregate(plan, expr.operand.name, points, host_sheet, kept)
        terms = [translate(plan, expr.operand, dict(zip(inner, pt)), target, host_sheet) for pt in points]
        return Call("SUM", tuple(terms))
    raise TypeError(f"not an expression node: {expr!r}")


def _group_starts(dims: Sequence[str], instances) -> list[list[tuple[int, str]]]:
    """Per nesting level, the (offset, label) pairs where a new group begins."""
    total = math.prod(len(instances[d]) for d in dims)
    levels = []
    for level, d in enumerate(dims):
        inner = math.prod(len(instances[x]) for x in dims[level + 1 :])
        labels = instances[d]
        levels.append([(i, labels[(i // inner) % len(labels)]) for i in range(0, total, inner)])
    return levels


def _write_headers(doc: GridDoc, plan: LayoutPlan, var: str) -> None:
    p = plan.placements[var]
    if p.style == TABLE_COLUMN:
        return
    if not plan.var_dims[var]:
        doc.ensure(p.sheet).set(p.origin[0], p.origin[1] - 1, Label(var))
        return
    top, left = block_top_left(p)
    r0, c0 = p.origin
    col_groups = _group_starts(p.col_dims, plan.instances)
    row_groups = _group_starts(p.row_dims, plan.instances)
    for name in plan.sheets_of(var):
        sheet = doc.ensure(name)
        sheet.set(top, left, Label(var))
        for level, d in enumerate(p.col_dims):
            sheet.set(top + 1 + level, c0 - 1, Label(d))
            for offset, label in col_groups[level]:
                sheet.set(top + 1 + level, c0 + offset, Label(label))
        for level, d in enumerate(p.row_dims):
            sheet.set(r0 - 1, left + level, Label(d))
            for offset, label in row_groups[level]:
                sheet.set(r0 + offset, left + level, Label(label))


def compile_model(model: ValidatedModel, plan: LayoutPlan) -> GridDoc:
    """Emit every variable of ``model`` onto a grid laid out by ``plan``."""
    for var in model.variables:
        plan.placement(var.name)
    check_overlaps(plan)
    doc = GridDoc()
    if any(not v.dims for v in model.variables):
        doc.ensure(PARAMS_SHEET)
    if any(p.style == PROJECTION and p.sheet == MAIN_SHEET for p in plan.placements.values()):
        doc.ensure(MAIN_SHEET)
    for var in model.variables:
        _write_headers(doc, plan, var.name)
    for table in plan.tables:
        sheet = doc.ensure(table.sheet)
        header = table.origin[0] - 1
        for d in table.key:
            sheet.set(header, table.key_col(d), Label(d))
        for m in table.members:
            sheet.set(header, table.value_col(m), Label(m))
        for i, labels in enumerate(coordinates([plan.instances[d] for d in table.nest])):
            at = dict(zip(table.nest, labels))
            for d in table.key:
                sheet.set(table.origin[0] + i, table.key_col(d), Label(at[d]))

    for var in model.variables:
        for coord in model.instances(var.dims):
            ref = cell_address(plan, var.name, coord)
            sheet = doc.ensure(ref.sheet)
            if var.table is not None:
                sheet.set(ref.row, ref.col, Value(var.table[coord]))
            else:
                at = dict(zip(var.dims, coord))
                sheet.set(ref.row, ref.col, Formula(translate(plan, var.expr, at, var.dims, ref.sheet)))
    return doc


def read_back(plan: LayoutPlan, model: ValidatedModel, values: Mapping[tuple[str, int, int], float]) -> dict:
    """Per-variable lists of grid values in row-major coordinate order (None if missing)."""
    out = {}
    for var in model.variables:
        vals = []
        for coord in model.instances(var.dims):
            ref = cell_address(plan, var.name, coord)
            vals.append(values.get((ref.sheet, ref.row, ref.col)))
        out[var.name] = vals
    return out


def grid_value_dump(plan: LayoutPlan, model: ValidatedModel, values, digits: int | None = None) -> dict:
    """Grid values in the engine's value-dump schema."""
    read = read_back(plan, model, values)

    def fmt(x):
        if x is None:
            return None
        return float(f"{x:.{digits}g}") if digits else float(x)

    return {
        var.name: {
            "dims": list(var.dims),
            "shape": [len(plan.instances[d]) for d in var.dims],
            "coords": {d: list(plan.instances[d]) for d in var.dims},
            "values": [fmt(x) for x in read[var.name]],
        }
        for var in model.variables
    }
