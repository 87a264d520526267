"""Powers, the power gap, energy identities and explicit energy bounds.

At the discrete level the identities follow from Galerkin orthogonality alone,
so their residuals measure solver accuracy, not discretisation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument, InvalidRegime
from .fem import AdmittivityField, BoundaryCurrent, ComplexField, assemble_current, cell_products
from .geometry import InclusionMask

IDENTITY_NAMES = ("id1", "id2", "id3", "id4", "loc", "id1c", "id2c", "id3c", "id4c", "id1s", "id2s", "id3s")
CONSTANT_ONLY = ("id1c", "id2c", "id3c", "id4c")
REAL_BACKGROUND_ONLY = ("id1s", "id2s", "id3s")


@dataclass(frozen=True)
class PowerReport:
    W0: complex
    W1: complex
    deltaW: complex
    deltaV: Optional[complex]
    energy_D: float
    energy_Omega: float
    W0_volume: complex
    W1_volume: complex
    regime: str

    @property
    def scale(self) -> float:
        return max(abs(self.W0), self.energy_Omega)

    @property
    def consistency(self) -> float:
        """Largest gap between boundary and volume evaluations of W0, W1, relative to scale."""
        return max(abs(self.W0 - self.W0_volume), abs(self.W1 - self.W1_volume)) / self.scale

    def to_record(self) -> dict:
        rec = {}
        for name in ("W0", "W1", "deltaW", "deltaV"):
            z = getattr(self, name)
            rec[f"{name}_re"] = None if z is None else z.real
            rec[f"{name}_im"] = None if z is None else z.imag
        rec["energy_D"] = self.energy_D
        rec["energy_Omega"] = self.energy_Omega
        rec["consistency"] = self.consistency
        return rec


@dataclass(frozen=True)
class IdentityLedger:
    residuals: dict
    applicable: dict
    lhs: dict = field(default_factory=dict, repr=False)
    rhs: dict = field(default_factory=dict, repr=False)

    def max_applicable(self) -> float:
        vals = [self.residuals[k] for k in IDENTITY_NAMES if self.applicable[k]]
        return max(vals) if vals else 0.0

    def failures(self, tol: float) -> list[str]:
        return [k for k in IDENTITY_NAMES if self.applicable[k] and self.residuals[k] > tol]

    def to_record(self) -> dict:
        return {k: (self.residuals[k] if self.applicable[k] else None) for k in IDENTITY_NAMES}


def _boundary_power(load: np.ndarray, u: ComplexField) -> complex:
    # int h conj(u) for P1 u and the assembled load b_i = int h phi_i
    return complex(load @ np.conj(u.nodal_values))


def compute_powers(
    u0: ComplexField,
    u1: ComplexField,
    h: BoundaryCurrent,
    gamma: AdmittivityField,
    D: InclusionMask,
) -> PowerReport:
    mesh = u0.mesh
    if u1.mesh is not mesh or D.mesh is not mesh:
        raise InvalidArgument("u0, u1 and D must share one mesh")
    load = assemble_current(mesh, h)
    W0 = _boundary_power(load, u0)
    W1 = _boundary_power(load, u1)
    p00 = cell_products(u0, u0)
    p11 = cell_products(u1, u1)
    W0_vol = complex(np.sum(gamma.background * p00))
    W1_vol = complex(np.sum(gamma.combined(D) * p11))
    dW = W1 - W0
    dV = None
    if gamma.regime == "constant_pair":
        g0 = complex(gamma.gamma0[0])
        dV = dW - 2j * g0 * (dW / g0).imag
    return PowerReport(
        W0=W0,
        W1=W1,
        deltaW=dW,
        deltaV=dV,
        energy_D=float(p00.real[D.cells].sum()),
        energy_Omega=float(p00.real.sum()),
        W0_volume=W0_vol,
        W1_volume=W1_vol,
        regime=gamma.regime,
    )


def identity_residuals(
    u0: ComplexField,
    u1: ComplexField,
    gamma: AdmittivityField,
    D: InclusionMask,
    h: BoundaryCurrent | None = None,
) -> IdentityLedger:
    """Residuals of the energy identities and their constant / real-background forms.

    With ``h`` the power gap is taken from boundary integrals; without it the
    volume forms a(u, u) are used.
    """
    cells = D.cells
    g0 = gamma.background
    g = gamma.combined(D)
    diff = (gamma.gamma1 - gamma.gamma0)[cells]
    d = u1 - u0
    pdd = cell_products(d, d).real
    p00 = cell_products(u0, u0)
    p11 = cell_products(u1, u1)
    p10 = cell_products(u1, u0)
    p01 = cell_products(u0, u1)
    p0d = cell_products(u0, d)
    im10 = p10.imag

    if h is not None:
        load = assemble_current(u0.mesh, h)
        W0 = _boundary_power(load, u0)
        W1 = _boundary_power(load, u1)
    else:
        W0 = complex(np.sum(g0 * p00))
        W1 = complex(np.sum(g * p11))
    dW = W1 - W0
    scale = max(abs(W0), float(p00.real.sum()))

    im_all_g = 2j * np.sum(g * im10)
    im_all_g0 = 2j * np.sum(g0 * im10)
    im_D = 2j * np.sum(diff * im10[cells])

    L1 = np.sum(g * pdd) - np.sum(diff * p00.real[cells])
    L2 = np.sum(g0 * pdd) + np.sum(diff * p11.real[cells])
    L3 = np.sum(-diff * p10[cells])
    L4 = np.sum(diff * p01[cells])
    pairs = {
        "id1": (L1, dW + im_all_g),
        "id2": (L2, -dW - im_all_g0),
        "id3": (L3, dW + im_all_g0),
        "id4": (L4, -dW - im_all_g),
        "loc": (np.sum(g * pdd), np.sum(-diff * p0d[cells])),
    }
    applicable = {k: True for k in pairs}

    constant = gamma.regime == "constant_pair"
    if constant:
        c = complex(g0[0])
        dV = dW - 2j * c * (dW / c).imag
    else:
        dV = 0j
    pairs.update(
        {
            "id1c": (L1, im_D + dV),
            "id2c": (L2, -dV),
            "id3c": (L3, dV),
            "id4c": (L4, -im_D - dV),
        }
    )
    applicable.update({k: constant for k in CONSTANT_ONLY})

    real_bg = gamma.regime == "real_background" or (constant and complex(g0[0]).imag == 0)
    cdW = np.conj(dW)
    pairs.update(
        {
            "id1s": (L1, cdW + im_D),
            "id2s": (L2, -cdW),
            "id3s": (L3, cdW),
        }
    )
    applicable.update({k: real_bg for k in REAL_BACKGROUND_ONLY})

    residuals, lhs, rhs = {}, {}, {}
    for name in IDENTITY_NAMES:
        a, b = complex(pairs[name][0]), complex(pairs[name][1])
        lhs[name], rhs[name] = a, b
        denom = abs(a) + abs(b) + scale
        residuals[name] = abs(a - b) / denom if denom > 0 else 0.0
    return IdentityLedger(residuals=residuals, applicable=applicable, lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class BoundCheck:
    lower: float
    mid: float
    upper: float
    holds: bool
    K1: float
    K2: float


def _holds(lower, mid, upper, K1, K2, slack) -> bool:
    # |dW| comes from W1 - W0 and carries an absolute error of order slack;
    # the chain multiplies it by K1, K2, so the comparison does too.
    return lower <= mid + slack * max(1.0, K1) and mid <= upper + slack * max(1.0, K2)


def constant_bound_constants(c0: float, mu0: float) -> tuple[float, float]:
    """Multipliers of |dW| in the constant-pair chain K1 |dW| <= int_D |grad u0|^2 <= K2 |dW|."""
    return c0 / ((c0 + mu0) * mu0), 1.0 / c0 + 2.0 / mu0


def variable_bound_constants(c0: float, mu0: float) -> tuple[float, float]:
    """K1 = c0^3 / (2 (2 + c0^2)),  K2 = 2 (1/(mu0 c0^2) + 1/mu0 + 1/c0)."""
    return c0 ** 3 / (2.0 * (2.0 + c0 ** 2)), 2.0 * (1.0 / (mu0 * c0 ** 2) + 1.0 / mu0 + 1.0 / c0)


def _chain_c0(gamma: AdmittivityField, c0: float | None) -> float:
    """Ellipticity constant used in a bound chain.

    Defaults to the field's ellipticity constant. An explicit value may be larger
    (a tighter chain) as long as Re(gamma0), Re(gamma1) >= c0 on every cell,
    which is the only use the constant-pair chain makes of it.
    """
    if c0 is None:
        return gamma.c0
    if c0 <= 0:
        raise InvalidRegime("c0 must be positive")
    if min(gamma.gamma0.real.min(), gamma.gamma1.real.min()) < c0 - 1e-12:
        raise InvalidRegime(f"Re(gamma) drops below c0 = {c0}")
    return float(c0)


def bound_check_constant(
    report: PowerReport, gamma: AdmittivityField, c0: float | None = None, rtol: float = 1e-9
) -> BoundCheck:
    if gamma.regime != "constant_pair":
        raise InvalidRegime("constant bound needs the constant_pair regime")
    mu0 = abs(complex(gamma.gamma1[0] - gamma.gamma0[0]))
    if mu0 == 0:
        raise InvalidRegime("gamma1 == gamma0: mu0 = 0")
    K1, K2 = constant_bound_constants(_chain_c0(gamma, c0), mu0)
    lo, hi = K1 * abs(report.deltaW), K2 * abs(report.deltaW)
    mid = report.energy_D
    return BoundCheck(lo, mid, hi, _holds(lo, mid, hi, K1, K2, rtol * report.scale), K1, K2)


def bound_check_variable(
    report: PowerReport, gamma: AdmittivityField, c0: float | None = None, rtol: float = 1e-9
) -> BoundCheck:
    """Variable-background chain with K1, K2 in closed form.

    An explicit ``c0`` must additionally keep sup|gamma1 - gamma0| <= 2/c0 and
    sup|sigma1 - sigma0| <= 1/c0, the two consequences of |gamma| <= 1/c0
    the chain relies on.
    """
    if gamma.regime != "real_background":
        raise InvalidRegime("variable bound needs the real_background regime")
    if gamma.contrast_alternative() is None:
        raise InvalidRegime("neither |eps1| >= mu0 nor sigma1 - sigma0 >= mu0 holds on every cell")
    c = _chain_c0(gamma, c0)
    if c0 is not None:
        jump = gamma.gamma1 - gamma.gamma0
        if np.abs(jump).max() > 2.0 / c + 1e-12 or np.abs(jump.real).max() > 1.0 / c + 1e-12:
            raise InvalidRegime(f"coefficient jump too large for c0 = {c}")
    K1, K2 = variable_bound_constants(c, gamma.mu0)
    lo, hi = K1 * abs(report.deltaW), K2 * abs(report.deltaW)
    mid = report.energy_D
    return BoundCheck(lo, mid, hi, _holds(lo, mid, hi, K1, K2, rtol * report.scale), K1, K2)
