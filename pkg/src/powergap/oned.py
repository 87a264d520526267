"""Closed-form one-dimensional theory on Omega = (-1, 1) with D = [a, b].

Both potentials carry the flux gamma u' = K and the normalisation
u(-1) + u(1) = 0. The power gap is normalised as

    dW = (|K|^2 / 2) int_a^b conj(1/gamma1 - 1/gamma0) dx  =  K conj(u1(1) - u0(1)),

which is also the power gap of the unit-height strip model on the unit square
obtained through x -> (x + 1) / 2 with flux K on the vertical sides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, NumericFailure

_QUAD = dict(epsabs=1e-13, epsrel=1e-13, limit=200)


def _quad(f: Callable, lo: float, hi: float) -> complex:
    if hi == lo:
        return 0j
    val, err, *_ = integrate.quad(f, lo, hi, complex_func=True, full_output=1, **_QUAD)
    if not np.isfinite(val) or abs(err) > 1e-9 * max(1.0, abs(val)):
        raise NumericFailure(f"quadrature on [{lo}, {hi}] did not converge (error estimate {abs(err):.2e})")
    return complex(val)


def constant(value: complex) -> Callable[[float], complex]:
    value = complex(value)
    return lambda x: value + 0j * x


def polynomial(coeffs) -> Callable[[float], complex]:
    """gamma(x) = sum_k coeffs[k] x^k with complex coefficients."""
    c = [complex(z) for z in coeffs]
    return lambda x: sum(ck * x ** k for k, ck in enumerate(c)) + 0j


@dataclass(frozen=True)
class OneDProblem:
    gamma0: Callable[[float], complex]
    gamma1: Callable[[float], complex]
    a: float
    b: float
    K: complex = 1.0

    def __post_init__(self):
        if not -1.0 < self.a < self.b < 1.0:
            raise InvalidArgument(f"need -1 < a < b < 1, got a={self.a}, b={self.b}")
        xs = np.linspace(-1.0, 1.0, 201)
        for name, g in (("gamma0", self.gamma0), ("gamma1", self.gamma1)):
            if min(complex(g(x)).real for x in xs) <= 0:
                raise InvalidArgument(f"Re({name}) must stay positive on (-1, 1)")

    def F0(self, x: float) -> complex:
        """int_{-1}^x K / gamma0."""
        return _quad(lambda t: self.K / self.gamma0(t), -1.0, x)

    def F1(self, x: float) -> complex:
        """int_{-1}^x K / gamma1."""
        return _quad(lambda t: self.K / self.gamma1(t), -1.0, x)

    @property
    def M(self) -> complex:
        return -(self.F0(1.0) + self.F0(-1.0)) / 2.0

    @property
    def jump(self) -> complex:
        """J = (F1(b) - F1(a))/2 - (F0(b) - F0(a))/2."""
        return ((self.F1(self.b) - self.F1(self.a)) - (self.F0(self.b) - self.F0(self.a))) / 2.0


def _check_x(x: float) -> None:
    if not -1.0 <= x <= 1.0:
        raise InvalidArgument(f"x = {x} outside [-1, 1]")


def solve_1d_background(p: OneDProblem, x: float) -> complex:
    _check_x(x)
    return p.F0(x) + p.M


def solve_1d_perturbed(p: OneDProblem, x: float) -> complex:
    """Perturbed potential, continuous at a and b, with u1(-1) + u1(1) = 0."""
    _check_x(x)
    M, J = p.M, p.jump
    if x < p.a:
        return p.F0(x) + M - J
    if x <= p.b:
        return p.F1(x) + M + (p.F0(p.a) + p.F0(p.b)) / 2.0 - (p.F1(p.a) + p.F1(p.b)) / 2.0
    return p.F0(x) + M + J


def power_gap_1d(p: OneDProblem) -> complex:
    integral = _quad(lambda t: np.conj(1.0 / p.gamma1(t) - 1.0 / p.gamma0(t)), p.a, p.b)
    return abs(p.K) ** 2 / 2.0 * integral


def re_im_gap_formulas(p: OneDProblem) -> tuple[float, float]:
    """Real and imaginary parts of the gap from the sigma / epsilon integrands.

    Re dW = (|K|^2/2) int_a^b sigma1/|gamma1|^2 - sigma0/|gamma0|^2
    Im dW = (|K|^2/2) int_a^b eps1/|gamma1|^2 - eps0/|gamma0|^2
    """

    def parts(g):
        z = complex(g)
        s, e = z.real, z.imag
        return s / (s * s + e * e), e / (s * s + e * e)

    def re_integrand(t):
        return parts(p.gamma1(t))[0] - parts(p.gamma0(t))[0]

    def im_integrand(t):
        return -parts(p.gamma0(t))[1] + parts(p.gamma1(t))[1]

    k2 = abs(p.K) ** 2 / 2.0
    return k2 * _quad(re_integrand, p.a, p.b).real, k2 * _quad(im_integrand, p.a, p.b).real


# Non-uniqueness example: gamma0 = (2 + i x)^2, gamma1 = 17/4.

NONUNIQUE_GAMMA0 = polynomial([4.0, 4.0j, -1.0])
NONUNIQUE_GAMMA1 = constant(17.0 / 4.0)


def nonuniqueness_problem(a: float = -0.5, b: float = 0.5, K: complex = 1.0) -> OneDProblem:
    return OneDProblem(NONUNIQUE_GAMMA0, NONUNIQUE_GAMMA1, a, b, K)


def nonuniqueness_closed_form(a: float, b: float, K: complex = 1.0) -> tuple[float, float]:
    """Re and Im of the gap for the example pair, in closed form.

    Carries the same |K|^2 / 2 factor as :func:`power_gap_1d`.
    """
    k2 = abs(K) ** 2 / 2.0
    den = (4.0 + b * b) * (4.0 + a * a)
    re = k2 * (b - a) * (4.0 / 17.0 - (4.0 - a * b) / den)
    im = k2 * (b - a) * (-2.0 * (a + b) / den)
    return re, im


def monotonicity_conditions(p: OneDProblem, n: int = 401) -> dict:
    """Sign of the pointwise comparisons that force Re(dW) or Im(dW) to be nonzero.

    "real" compares sigma1/|gamma1|^2 with sigma0/|gamma0|^2 and "imag" compares
    eps1/|gamma1|^2 with eps0/|gamma0|^2. A value of +1 / -1 means the
    comparison holds strictly with that sign on a grid of (-1, 1), and then
    the matching part of dW has that sign for every interval; 0 otherwise.
    """
    xs = np.linspace(-1.0, 1.0, n + 2)[1:-1]
    g0 = np.array([complex(p.gamma0(x)) for x in xs])
    g1 = np.array([complex(p.gamma1(x)) for x in xs])
    re0, re1 = (1.0 / g0).real, (1.0 / g1).real  # sigma / (sigma^2 + eps^2)
    im0, im1 = -(1.0 / g0).imag, -(1.0 / g1).imag  # eps / (sigma^2 + eps^2)

    def sign(d):
        if np.all(d > 0):
            return 1
        if np.all(d < 0):
            return -1
        return 0

    return {"real": sign(re1 - re0), "imag": sign(im1 - im0)}


def interval_sweep(gamma0, gamma1, intervals, K: complex = 1.0) -> list[tuple[float, float, float, float]]:
    """Rows (a, b, Re dW, Im dW) for a list of intervals."""
    rows = []
    for a, b in intervals:
        dw = power_gap_1d(OneDProblem(gamma0, gamma1, float(a), float(b), K))
        rows.append((float(a), float(b), dw.real, dw.imag))
    return rows
