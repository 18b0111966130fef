"""How aggregate reference counts grow with the size of one dimension.

Regenerates the ATW model with more Region (or any other) instances and
measures the largest reference_count per aggregate variable under table and
projection presets. Table layouts stay flat; ref-list projections grow linearly.
"""

import argparse
from dataclasses import dataclass

from dimsheet import load_atw, validate
from dimsheet.fixtures import add_formula, resize_dimension
from dimsheet.metrics import aggregate_variables, compare

PROBE = "MSP Unit Sales Check"


@dataclass(frozen=True)
class ScaleConfig:
    dimension: str = "Region"
    sizes: tuple[int, ...] = (5, 10, 20, 40)
    presets: tuple[str, ...] = ("DB", "MSPR1", "MSPR2", "MSPR3", "MSPR6")


def variant(cfg: ScaleConfig, size: int):
    model = resize_dimension(load_atw(), cfg.dimension, size)
    # a pure reduction over Region; ATW itself never sums Region alone
    model = add_formula(model, PROBE, ("Month", "Sector", "Product"), "SUM([MSPR Unit Sales])")
    return validate(model)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dimension", default=ScaleConfig.dimension)
    parser.add_argument("--sizes", default=",".join(map(str, ScaleConfig.sizes)))
    args = parser.parse_args()
    cfg = ScaleConfig(args.dimension, tuple(int(s) for s in args.sizes.split(",")))

    for size in cfg.sizes:
        model = variant(cfg, size)
        reports = compare(model, cfg.presets)
        print(f"|{cfg.dimension}| = {size}")
        print(f"  {'variable':<24}" + "".join(f"{r.preset:>8}" for r in reports))
        for name in aggregate_variables(model):
            counts = "".join(f"{r.variable(name).max.reference_count:>8}" for r in reports)
            print(f"  {name:<24}{counts}")


if __name__ == "__main__":
    main()
