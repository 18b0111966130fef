"""Sweep Base Price and report how well each value reproduces a target cell.

Prints the residual against MPR Unit Sales (Jan, Standard, N) = 160.9580294 for
every integer price in the range, plus Total Profit, and names the best fit.
"""

import argparse
from dataclasses import dataclass

from dimsheet import eval_model, load_atw


@dataclass(frozen=True)
class SweepConfig:
    low: int = 100
    high: int = 200
    step: int = 1
    target: float = 160.9580294
    coord: tuple[str, str, str] = ("Jan", "Standard", "N")
    show: int = 5  # rows printed either side of the best fit


def sweep(cfg: SweepConfig) -> list[tuple[int, float, float]]:
    model = load_atw()
    rows = []
    for price in range(cfg.low, cfg.high + 1, cfg.step):
        store = eval_model(model, {"Base Price": price})
        got = store["MPR Unit Sales"][cfg.coord]
        rows.append((price, abs(got - cfg.target), float(store["Total Profit"].values)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--low", type=int, default=SweepConfig.low)
    parser.add_argument("--high", type=int, default=SweepConfig.high)
    parser.add_argument("--step", type=int, default=SweepConfig.step)
    args = parser.parse_args()
    cfg = SweepConfig(args.low, args.high, args.step)

    rows = sweep(cfg)
    best = min(range(len(rows)), key=lambda i: rows[i][1])
    print(f"{'price':>6} {'residual':>14} {'total profit':>16}")
    for price, residual, profit in rows[max(0, best - cfg.show) : best + cfg.show + 1]:
        mark = "  <- best" if price == rows[best][0] else ""
        print(f"{price:>6} {residual:>14.3e} {profit:>16.2f}{mark}")
    peak = max(rows, key=lambda r: r[2])
    print(f"best fit: Base Price = {rows[best][0]} (residual {rows[best][1]:.2e})")
    print(f"highest total profit in range: Base Price = {peak[0]} ({peak[2]:.2f})")


if __name__ == "__main__":
    main()
