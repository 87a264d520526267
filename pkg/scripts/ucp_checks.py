"""Print frequency, doubling and three-spheres diagnostics for harmonic monomials."""

import argparse

import numpy as np

from powergap.ucp import doubling_ratio, frequency_profile, harmonic_monomial, three_spheres_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-degree", type=int, default=6)
    args = ap.parse_args()
    radii = np.linspace(0.1, 0.9, 9)
    print(f"{'k':>3} {'max|N-k|':>10} {'doubling/4^k':>13} {'3-spheres':>10}")
    for k in range(1, args.max_degree + 1):
        v = harmonic_monomial(k)
        prof = frequency_profile(v, None, (0.0, 0.0), radii, n_angular=256)
        dr = doubling_ratio(v, (0.0, 0.0), 0.5).ratio / 4 ** k
        ts = three_spheres_check(v, (0.0, 0.0), 1.0, 2.0, 4.0).ratio
        print(f"{k:3d} {np.max(np.abs(prof.N - k)):10.2e} {dr:13.10f} {ts:10.7f}")


if __name__ == "__main__":
    main()
