import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powergap.errors import InvalidCoefficient, InvalidInput, InvalidMesh
from powergap.fem import BoundaryCurrent, ComplexField
from powergap.geometry import boundary_chart, generate_mesh, mesh_from_arrays
from powergap.reflect import (
    cell_coefficient,
    double_mesh,
    ellipticity,
    reflect_coefficient,
    reflect_even,
    solve_half_domain,
)


def A_diag(x, y):
    return np.stack([1.0 + 0.5 * x, 2.0 + 0.3 * y], axis=-1)


@pytest.fixture(scope="module")
def half():
    return generate_mesh("unit_square", 24)


@pytest.fixture(scope="module")
def solved(half):
    h = BoundaryCurrent.from_modes(boundary_chart(half), {1: 1.0, 2: 0.5j}, support_arc=(2.0, 3.0))
    v = solve_half_domain(half, A_diag, h)
    return v, reflect_even(v, A_diag)


def test_doubled_mesh_shape(half):
    doubled, mirror = double_mesh(half)
    assert doubled.n_cells == 2 * half.n_cells
    assert doubled.n_vertices == half.n_vertices + (half.n_vertices - 25)
    assert doubled.area == pytest.approx(2.0)
    assert np.all(doubled.signed_areas > 0)
    assert doubled.euler_characteristic == 1
    v = doubled.vertices
    assert np.array_equal(v[mirror], v * np.array([1.0, -1.0]))


def test_even_extension_values(solved):
    _, prob = solved
    vals = prob.doubled_field.nodal_values
    assert np.array_equal(vals[prob.mirror], vals)


def test_weak_residual(solved):
    assert solved[1].residual <= 1e-8


def test_energy_doubling(solved):
    _, prob = solved
    half_e, doubled_e = prob.energies()
    assert doubled_e == pytest.approx(2 * half_e, rel=1e-14)
    wh, wd = prob.energies(weighted=True)
    assert wd == pytest.approx(2 * wh, rel=1e-14)


def test_ellipticity_preserved(solved, half):
    _, prob = solved
    A = prob.A_tilde
    lo, hi = ellipticity(A[: half.n_cells])
    assert ellipticity(A) == (lo, hi)
    assert np.allclose(np.linalg.eigvalsh(A[half.n_cells :]), np.linalg.eigvalsh(A[: half.n_cells]), atol=0)


def test_idempotent(solved):
    _, prob = solved
    again = reflect_even(prob.restrict_upper(), A_diag)
    assert np.array_equal(again.doubled_field.nodal_values, prob.doubled_field.nodal_values)


def test_identity_coefficient(half):
    v = ComplexField.interpolate(half, lambda x, y: x)
    prob = reflect_even(v)
    assert np.array_equal(prob.A_tilde, np.broadcast_to(np.eye(2), prob.A_tilde.shape))
    assert prob.residual <= 1e-10
    dv = prob.doubled_mesh.vertices
    assert np.abs(prob.doubled_field.nodal_values - dv[:, 0]).max() == 0


def test_flux_through_flat_side_rejected(half):
    with pytest.raises(InvalidInput):
        reflect_even(ComplexField.interpolate(half, lambda x, y: y))


def test_non_solution_rejected(half):
    with pytest.raises(InvalidInput):
        reflect_even(ComplexField.interpolate(half, lambda x, y: x * x))


def test_current_on_flat_side_rejected(half):
    h = BoundaryCurrent.from_modes(boundary_chart(half), {1: 1.0}, support_arc=(0.0, 1.0))
    with pytest.raises(InvalidInput):
        solve_half_domain(half, None, h)


def test_no_flat_segment():
    m = generate_mesh("unit_square", 4)
    shifted = mesh_from_arrays(m.vertices + [0.0, 0.5], m.cells)
    with pytest.raises(InvalidMesh):
        reflect_even(ComplexField.interpolate(shifted, lambda x, y: x))
    below = mesh_from_arrays(m.vertices - [0.0, 0.5], m.cells)
    with pytest.raises(InvalidMesh):
        double_mesh(below)


def test_off_diagonal_rejected(half):
    A = np.tile(np.array([[1.0, 0.2], [0.2, 1.0]]), (half.n_cells, 1, 1))
    with pytest.raises(InvalidCoefficient):
        cell_coefficient(half, A)


def test_reflection_rule():
    A = np.array([[[2.0, 0.3], [0.3, 1.0]]])
    R = reflect_coefficient(A)
    assert R[0, 0, 0] == 2.0 and R[0, 1, 1] == 1.0
    assert R[0, 0, 1] == -0.3 and R[0, 1, 0] == -0.3


@given(st.floats(0.5, 3.0), st.floats(-0.4, 0.4), st.floats(0.5, 3.0), st.floats(-0.4, 0.4))
def test_residual_for_any_diagonal_lipschitz(a, ax, b, by):
    m = generate_mesh("unit_square", 8)
    A = lambda x, y: np.stack([a + ax * x, b + by * y], axis=-1)
    h = BoundaryCurrent.from_modes(boundary_chart(m), {1: 1.0, 2: 0.3}, support_arc=(1.5, 3.5))
    prob = reflect_even(solve_half_domain(m, A, h), A)
    assert prob.residual <= 1e-8
    e_half, e_doubled = prob.energies()
    assert e_doubled == pytest.approx(2 * e_half, rel=1e-13)
