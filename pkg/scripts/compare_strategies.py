"""Compile the ATW model under every layout preset and compare formula complexity.

For each preset the grid is also evaluated and checked against the engine, so
the table only lists layouts that compute the same numbers.
"""

import argparse
from dataclasses import dataclass, field

import numpy as np

from dimsheet import eval_model, load_atw
from dimsheet.engine import apply_overrides
from dimsheet.gridvm import eval_grid
from dimsheet.layout import PRESETS, compile_model, preset_plan, read_back
from dimsheet.metrics import comparison_table, measure_plan


@dataclass(frozen=True)
class CompareConfig:
    presets: tuple[str, ...] = field(default_factory=lambda: tuple(sorted(PRESETS)))
    metric: str = "reference_count"
    base_price: float = 140.0


def run(cfg: CompareConfig):
    model = apply_overrides(load_atw(), {"Base Price": cfg.base_price})
    store = eval_model(model)
    reports = []
    for preset in cfg.presets:
        plan = preset_plan(model, preset)
        doc = compile_model(model, plan)
        grid = read_back(plan, model, eval_grid(doc))
        worst = 0.0
        for var in model.variables:
            want = store[var.name].values.ravel()
            got = np.array(grid[var.name], dtype=float)
            scale = np.maximum(np.abs(want), np.abs(got))
            err = np.abs(got - want) / np.where(scale == 0, 1, scale)
            worst = max(worst, float(err.max(initial=0.0)))
        cells = sum(len(s.cells) for s in doc.sheets)
        print(f"{preset:>6}: {len(doc.sheets):>3} sheets {cells:>6} cells  max rel err {worst:.1e}")
        reports.append(measure_plan(model, plan, doc))
    return model, sorted(reports, key=lambda r: r.preset)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--presets", help="comma-separated presets (default: all)")
    parser.add_argument("--metric", default=CompareConfig.metric,
                        choices=["operator_count", "function_count", "reference_count", "text_length"])
    parser.add_argument("--base-price", type=float, default=CompareConfig.base_price)
    args = parser.parse_args()
    presets = tuple(p for p in args.presets.split(",") if p) if args.presets else CompareConfig().presets
    cfg = CompareConfig(presets, args.metric, args.base_price)

    model, reports = run(cfg)
    print()
    print(comparison_table(model, reports, cfg.metric), end="")


if __name__ == "__main__":
    main()
