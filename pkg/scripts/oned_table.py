"""Tabulate the 1D power gap of the non-uniqueness pair over a range of intervals."""

import argparse

import numpy as np

from powergap.oned import interval_sweep, monotonicity_conditions, nonuniqueness_problem


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=9, help="number of symmetric intervals [-t, t]")
    args = ap.parse_args()
    p = nonuniqueness_problem()
    print("monotonicity:", monotonicity_conditions(p))
    intervals = [(-t, t) for t in np.linspace(0.1, 0.9, args.n)]
    print(f"{'a':>8} {'b':>8} {'Re dW':>14} {'Im dW':>14}")
    for a, b, re, im in interval_sweep(p.gamma0, p.gamma1, intervals):
        print(f"{a:8.3f} {b:8.3f} {re:14.6e} {im:14.6e}")


if __name__ == "__main__":
    main()
