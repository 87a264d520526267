"""Mesh convergence of the FEM power gap against the exact 1D value on a strip inclusion."""

import argparse

from powergap.fem import AdmittivityField, BoundaryCurrent, solve_pair
from powergap.geometry import generate_mesh, inclusion_mask, strip
from powergap.oned import OneDProblem, polynomial, power_gap_1d
from powergap.power import compute_powers


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--a", type=float, default=-0.5)
    ap.add_argument("--b", type=float, default=0.5)
    args = ap.parse_args()

    g0 = polynomial([1.0, 0.5j, -0.25])
    g1 = polynomial([2.0 + 1.0j, 0.3])
    exact = power_gap_1d(OneDProblem(g0, g1, args.a, args.b, 1.0))
    print(f"exact dW = {exact:.15g}")
    print(f"{'n':>5} {'dW_fem':>40} {'rel_err':>10} {'ratio':>7}")
    prev = None
    for n in args.resolutions:
        # the unit square maps to (-1, 1) through t = 2x - 1
        mesh = generate_mesh("unit_square", n)
        field = AdmittivityField.general(mesh, lambda x, y: g0(2 * x - 1), lambda x, y: g1(2 * x - 1))
        D = inclusion_mask(mesh, strip((args.a + 1) / 2, (args.b + 1) / 2))
        h = BoundaryCurrent.affine_flux(mesh, 1.0, [1.0, 0.0])
        u0, u1 = solve_pair(mesh, field, h, D)
        dW = compute_powers(u0, u1, h, field, D).deltaW
        err = abs(dW - exact) / abs(exact)
        ratio = "" if prev is None else f"{prev / err:7.3f}"
        print(f"{n:5d} {dW!s:>40} {err:10.3e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
