import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from powergap.errors import InvalidArgument
from powergap.oned import (
    NONUNIQUE_GAMMA0,
    NONUNIQUE_GAMMA1,
    OneDProblem,
    constant,
    interval_sweep,
    monotonicity_conditions,
    nonuniqueness_closed_form,
    nonuniqueness_problem,
    polynomial,
    power_gap_1d,
    re_im_gap_formulas,
    solve_1d_background,
    solve_1d_perturbed,
)


def _mp_gap(g0, g1, a, b, K=1.0):
    # independent oracle: mpmath tanh-sinh quadrature of the closed form
    f = lambda t: mpmath.conj(1 / g1(t) - 1 / g0(t))
    return complex(abs(K) ** 2 / 2 * mpmath.quad(f, [a, b]))


def test_background_examples():
    p = OneDProblem(constant(1.0), constant(2.0), -0.2, 0.3)
    for x in (-1.0, -0.4, 0.0, 0.7, 1.0):
        assert solve_1d_background(p, x) == pytest.approx(x, abs=1e-13)
    q = OneDProblem(constant(1 + 1j), constant(2.0), -0.2, 0.3, K=1 + 1j)
    assert solve_1d_background(q, 0.25) == pytest.approx(0.25, abs=1e-13)


def test_background_flux_and_normalisation():
    p = nonuniqueness_problem()
    u = lambda x: solve_1d_background(p, x)
    assert abs(u(1.0) + u(-1.0)) < 1e-12
    step = 1e-5
    for x in (-1.0 + step, 1.0 - step):
        du = (u(x + step) - u(x - step)) / (2 * step)
        assert abs(NONUNIQUE_GAMMA0(x) * du - 1.0) < 1e-8


def test_perturbed_identity_when_equal():
    g = polynomial([1.0, 0.2j])
    p = OneDProblem(g, g, -0.3, 0.4)
    for x in np.linspace(-1, 1, 9):
        assert solve_1d_perturbed(p, x) == pytest.approx(solve_1d_background(p, x), abs=1e-14)


def test_perturbed_continuity_and_normalisation():
    p = OneDProblem(polynomial([1.0, 0.5j, -0.25]), polynomial([2 + 1j, 0.3]), -0.4, 0.35, K=0.7 - 0.2j)
    e = 1e-12
    for c in (p.a, p.b):
        assert abs(solve_1d_perturbed(p, c - e) - solve_1d_perturbed(p, c + e)) < 1e-10
    assert abs(solve_1d_perturbed(p, -1.0) + solve_1d_perturbed(p, 1.0)) < 1e-13


def test_perturbed_flux():
    p = OneDProblem(constant(1.0), polynomial([2.0, 0.5j]), -0.3, 0.4, K=1.5)
    step = 1e-5
    for x in (-0.6, 0.0, 0.7):
        du = (solve_1d_perturbed(p, x + step) - solve_1d_perturbed(p, x - step)) / (2 * step)
        g = p.gamma1(x) if p.a <= x <= p.b else p.gamma0(x)
        assert abs(g * du - p.K) < 1e-8


def test_gap_examples():
    p = OneDProblem(constant(1.0), constant(2.0), 0.0, 0.5)
    assert power_gap_1d(p) == pytest.approx(-0.125, abs=1e-14)
    assert solve_1d_perturbed(p, 1.0) - solve_1d_background(p, 1.0) == pytest.approx(-0.125, abs=1e-14)
    q = OneDProblem(constant(1.0), constant(1 + 1j), -0.5, 0.5)
    assert power_gap_1d(q) == pytest.approx(-0.25 + 0.25j, abs=1e-14)


def test_nonuniqueness_gap_vanishes():
    assert abs(power_gap_1d(nonuniqueness_problem())) <= 1e-12


def test_nonuniqueness_closed_form_on_half_interval():
    re, im = nonuniqueness_closed_form(0.0, 0.5)
    # 4/17 - 4/((4 + 1/4) 4) = 0; the |K|^2/2 factor halves the bare Im value -1/34
    assert re == pytest.approx(0.0, abs=1e-15)
    dw = power_gap_1d(nonuniqueness_problem(0.0, 0.5))
    assert dw.imag == pytest.approx(-1 / 68, abs=1e-12)
    assert im == pytest.approx(-1 / 68, abs=1e-15)
    assert dw.real == pytest.approx(re, abs=1e-12)


def test_gap_matches_independent_quadrature():
    g0 = lambda t: (2 + 1j * t) ** 2
    g1 = lambda t: mpmath.mpf(17) / 4
    for a, b in [(-0.9, -0.1), (0.1, 0.8), (-0.3, 0.6)]:
        ours = power_gap_1d(nonuniqueness_problem(a, b))
        assert abs(ours - _mp_gap(g0, g1, a, b)) < 1e-12


def test_real_conductivities_sign():
    p = OneDProblem(constant(1.0), polynomial([1.5, 0.2]), -0.5, 0.2)
    dw = power_gap_1d(p)
    assert dw.real < 0 and dw.imag == 0
    assert monotonicity_conditions(OneDProblem(constant(2.0), constant(1.0), -0.5, 0.2))["real"] == 1


def test_invalid_interval():
    with pytest.raises(InvalidArgument):
        OneDProblem(constant(1.0), constant(2.0), 0.5, -0.5)
    with pytest.raises(InvalidArgument):
        OneDProblem(constant(-1.0), constant(2.0), -0.5, 0.5)
    p = OneDProblem(constant(1.0), constant(2.0), -0.5, 0.5)
    with pytest.raises(InvalidArgument):
        solve_1d_background(p, 1.5)


def test_sweep_rows():
    rows = interval_sweep(NONUNIQUE_GAMMA0, NONUNIQUE_GAMMA1, [(-0.5, 0.5), (0.0, 0.5)])
    assert rows[0][:2] == (-0.5, 0.5)
    assert abs(rows[0][2]) < 1e-12 and abs(rows[0][3]) < 1e-12
    assert rows[1][3] == pytest.approx(-1 / 68, abs=1e-12)


intervals = st.tuples(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95)).filter(lambda ab: abs(ab[0] - ab[1]) > 1e-3)


@given(intervals)
def test_formulas_agree(ab):
    a, b = sorted(ab)
    p = nonuniqueness_problem(a, b)
    dw = power_gap_1d(p)
    re, im = re_im_gap_formulas(p)
    cre, cim = nonuniqueness_closed_form(a, b)
    assert abs(re - dw.real) < 1e-10 and abs(im - dw.imag) < 1e-10
    assert abs(cre - dw.real) < 1e-10 and abs(cim - dw.imag) < 1e-10


@given(intervals, st.complex_numbers(min_magnitude=0.2, max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_gap_equals_endpoint_jump(ab, K):
    a, b = sorted(ab)
    p = OneDProblem(polynomial([1.0, 0.3j, 0.1]), polynomial([2.0 - 0.5j, -0.4]), a, b, K)
    jump = solve_1d_perturbed(p, 1.0) - solve_1d_background(p, 1.0)
    assert abs(power_gap_1d(p) - K * np.conj(jump)) < 1e-10 * max(1.0, abs(K) ** 2)


@given(st.floats(-0.9, 0.0), st.floats(0.05, 0.4), st.floats(0.05, 0.4))
def test_gap_monotone_in_b(a, d1, d2):
    assume(a + d1 + d2 < 0.99)
    g0, g1 = constant(1.0), polynomial([2.0, 0.5])
    small = power_gap_1d(OneDProblem(g0, g1, a, a + d1))
    large = power_gap_1d(OneDProblem(g0, g1, a, a + d1 + d2))
    assert abs(large) >= abs(small)


@given(intervals, st.floats(0.5, 3.0), st.floats(-2.0, 2.0))
def test_monotonicity_signs_predict_gap(ab, s1, e1):
    a, b = sorted(ab)
    p = OneDProblem(polynomial([1.0, 0.2j]), constant(complex(s1, e1)), a, b)
    cond = monotonicity_conditions(p)
    dw = power_gap_1d(p)
    if cond["real"]:
        assert np.sign(dw.real) == cond["real"]
    if cond["imag"]:
        assert np.sign(dw.imag) == cond["imag"]
