import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powergap.errors import InvalidArgument, InvalidMesh
from powergap.geometry import (
    InclusionMask,
    MeshTopology,
    boundary_chart,
    boundary_loops,
    disc,
    full_mask,
    generate_mesh,
    inclusion_mask,
    interior_offset,
    mesh_from_arrays,
    rectangle,
)


def test_square_counts():
    m = generate_mesh("unit_square", 2)
    assert m.n_cells == 8
    assert m.n_vertices == 9


@pytest.mark.parametrize("kind", ["unit_square", "unit_disc"])
@pytest.mark.parametrize("n", [1, 3, 8])
def test_euler_characteristic(kind, n):
    assert generate_mesh(kind, n).euler_characteristic == 1


def test_disc_perimeter():
    m = generate_mesh("unit_disc", 4)
    # polygonal perimeter of rings of 6k vertices: 24 chords of angle 2 pi / 24
    exact = 24 * 2 * math.sin(math.pi / 24)
    assert m.boundary_length == pytest.approx(exact, rel=1e-12)
    assert abs(m.boundary_length / (2 * math.pi) - 1) < 0.02


def test_disc_perimeter_converges():
    lengths = [generate_mesh("unit_disc", n).boundary_length for n in (4, 8, 16)]
    errs = [2 * math.pi - L for L in lengths]
    assert errs[0] > errs[1] > errs[2] > 0


def test_resolution_zero_rejected():
    with pytest.raises(InvalidArgument):
        generate_mesh("unit_square", 0)
    with pytest.raises(InvalidArgument):
        generate_mesh("triangle", 4)


def test_interval_mesh():
    m = generate_mesh("interval", 10)
    assert m.dim == 1
    assert m.n_cells == 10
    assert m.vertices[0, 0] == -1.0 and m.vertices[-1, 0] == 1.0


def test_positive_areas_and_total(square16):
    assert np.all(square16.signed_areas > 0)
    assert square16.area == pytest.approx(1.0, abs=1e-14)


def test_empty_and_full_masks(square16):
    empty = inclusion_mask(square16, lambda x, y: np.zeros_like(x, dtype=bool))
    assert empty.is_empty and empty.area == 0.0
    full = inclusion_mask(square16, lambda x, y: np.ones_like(x, dtype=bool))
    assert len(full) == square16.n_cells
    assert full.area == pytest.approx(1.0, abs=1e-14)


def test_disc_mask_area():
    m = generate_mesh("unit_square", 64)
    D = inclusion_mask(m, disc((0.5, 0.5), 0.2))
    assert abs(D.area / (math.pi * 0.04) - 1) < 0.02
    assert D.area == pytest.approx(m.cell_areas[D.cells].sum(), abs=0)


def test_mask_distance_is_vertex_min(square16):
    D = inclusion_mask(square16, rectangle(0.2, 0.5, 0.3, 0.6))
    verts = square16.vertices[np.unique(square16.cells[D.cells])]
    d = np.min(np.minimum.reduce([verts[:, 0], verts[:, 1], 1 - verts[:, 0], 1 - verts[:, 1]]))
    assert D.dist_to_boundary == pytest.approx(d, abs=1e-15)


def test_interior_offset():
    m = generate_mesh("unit_square", 64)
    assert len(interior_offset(m, 0.0)) == m.n_cells
    assert interior_offset(m, 0.5).is_empty
    assert interior_offset(m, 0.25).area == pytest.approx(0.25, abs=2 / 64)


def test_chart_square(square16):
    ch = boundary_chart(square16)
    assert ch.total_length == pytest.approx(4.0)
    anchor = ch.vertex_order[0]
    assert tuple(square16.vertices[anchor]) == (0.0, 0.0)
    assert ch.arclength[0] == 0.0
    assert np.all(np.diff(ch.arclength) > 0)
    assert np.allclose(ch.point_at(1.0), [1.0, 0.0])
    assert np.allclose(ch.point_at(2.5), [0.5, 1.0])


def test_chart_disc_length():
    assert boundary_chart(generate_mesh("unit_disc", 32)).total_length == pytest.approx(2 * math.pi, rel=1e-3)


def test_disconnected_boundary_rejected():
    v = [[0, 0], [1, 0], [0, 1], [3, 0], [4, 0], [3, 1]]
    with pytest.raises(InvalidMesh):
        mesh_from_arrays(v, [[0, 1, 2], [3, 4, 5]])


def test_negative_orientation_rejected():
    with pytest.raises(InvalidMesh):
        mesh_from_arrays([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])


def test_boundary_loops_open_chain():
    with pytest.raises(InvalidMesh):
        boundary_loops(np.array([[0, 1], [1, 2]]))


def test_json_round_trip(square16):
    text = square16.to_json()
    back = MeshTopology.from_json(text)
    assert back.to_json() == text
    assert np.array_equal(back.cells, square16.cells)


def test_normals_outward(square16):
    mid = square16.vertices[square16.boundary_edges].mean(axis=1)
    assert np.all(np.einsum("ed,ed->e", square16.boundary_normals, mid - 0.5) > 0)


cell_sets = st.lists(st.integers(0, 16 * 16 * 2 - 1), max_size=80)


@given(cell_sets, cell_sets)
def test_mask_area_additive(square16, a, b):
    A = InclusionMask.from_cells(square16, a)
    B = InclusionMask.from_cells(square16, b)
    assert (A | B).area + (A & B).area == pytest.approx(A.area + B.area, abs=1e-14)
    assert (A & B).issubset(A) and A.issubset(A | B)


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_interior_offset_antitone(square16, r1, r2):
    lo, hi = sorted((r1, r2))
    assert interior_offset(square16, hi).issubset(interior_offset(square16, lo))


@given(st.floats(0.1, 0.35), st.floats(0.35, 0.65), st.floats(0.35, 0.65))
def test_disc_mask_refinement_is_order_h(r, cx, cy):
    areas = [inclusion_mask(generate_mesh("unit_square", n), disc((cx, cy), r)).area for n in (32, 64)]
    assert abs(areas[0] - areas[1]) <= 8 * r * (1 / 32)


def test_full_mask(square16):
    assert full_mask(square16).area == pytest.approx(1.0)
