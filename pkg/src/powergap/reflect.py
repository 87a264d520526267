"""Even reflection across a flat Neumann boundary {y = 0}.

A field v on a half-domain {y >= 0} with zero conormal flux on the flat
segment extends to v~(x, y) = v(x, |y|). The coefficient is reflected with
A~ = R A R, R = diag(1, -1), which keeps the diagonal even and makes the
off-diagonal entries odd in y. With this pair v~ is a weak solution on the
doubled domain.

Only diagonal A is accepted. Curved boundaries would need a flattening map
composed with this reflection, which is not provided here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidCoefficient, InvalidInput, InvalidMesh
from .fem import BoundaryCurrent, ComplexField, assemble_current, assemble_system, gradient_energy, solve_neumann
from .geometry import MeshTopology, mesh_from_arrays

FLAT_TOL = 1e-12
_MIRROR = np.diag([1.0, -1.0])


def cell_coefficient(mesh: MeshTopology, A=None) -> np.ndarray:
    """Diagonal coefficient per cell as (n_cells, 2, 2) real matrices.

    ``A`` is None (identity), a scalar, a callable (x, y) -> scalar or
    (..., 2) diagonal entries evaluated at centroids, or an array of one
    scalar, one diagonal pair or one 2x2 matrix per cell.
    """
    n = mesh.n_cells
    if A is None:
        A = 1.0
    if callable(A):
        c = mesh.centroids
        A = np.asarray(A(c[:, 0], c[:, 1]), dtype=float)
        if A.ndim == 0:
            A = np.full(n, float(A))
    A = np.asarray(A)
    if np.iscomplexobj(A):
        if np.any(A.imag):
            raise InvalidCoefficient("reflection needs a real coefficient matrix")
        A = A.real
    A = A.astype(float)
    if A.ndim == 0:
        A = np.full(n, float(A))
    out = np.zeros((n, 2, 2))
    if A.shape == (n,):
        out[:, 0, 0] = out[:, 1, 1] = A
    elif A.shape == (n, 2):
        out[:, 0, 0], out[:, 1, 1] = A[:, 0], A[:, 1]
    elif A.shape == (n, 2, 2):
        scale = np.abs(A).max()
        if np.abs(A[:, 0, 1]).max() > 1e-14 * scale or np.abs(A[:, 1, 0]).max() > 1e-14 * scale:
            raise InvalidCoefficient("only diagonal coefficient matrices are supported")
        out[:] = A
        out[:, 0, 1] = out[:, 1, 0] = 0.0
    else:
        raise InvalidCoefficient(f"cannot interpret coefficient of shape {A.shape}")
    if not np.all(np.isfinite(out)) or out[:, 0, 0].min() <= 0 or out[:, 1, 1].min() <= 0:
        raise InvalidCoefficient("coefficient must be finite and positive definite")
    return out


def reflect_coefficient(A: np.ndarray) -> np.ndarray:
    """R A R: row and column n flip sign off the diagonal."""
    return np.einsum("ij,cjk,kl->cil", _MIRROR, A, _MIRROR)


def ellipticity(A: np.ndarray) -> tuple[float, float]:
    """Smallest and largest eigenvalue over all cells."""
    ev = np.linalg.eigvalsh(A)
    return float(ev.min()), float(ev.max())


@dataclass(frozen=True, eq=False)
class ReflectedProblem:
    upper_field: ComplexField
    doubled_field: ComplexField
    A_tilde: np.ndarray
    doubled_mesh: MeshTopology
    mirror: np.ndarray
    residual: float

    @property
    def half_mesh(self) -> MeshTopology:
        return self.upper_field.mesh

    @property
    def n_upper_cells(self) -> int:
        return self.half_mesh.n_cells

    def restrict_upper(self) -> ComplexField:
        """The doubled field on the half-domain (upper vertices keep their indices)."""
        return ComplexField(self.half_mesh, self.doubled_field.nodal_values[: self.half_mesh.n_vertices].copy())

    def energies(self, weighted: bool = False) -> tuple[float, float]:
        """(half, doubled) gradient energies, optionally weighted by A and A~."""
        wu = self.A_tilde[: self.n_upper_cells] if weighted else None
        wd = self.A_tilde if weighted else None
        u, d = self.upper_field, self.doubled_field
        return gradient_energy(u, u, weight=wu).real, gradient_energy(d, d, weight=wd).real


def _flat_vertices(mesh: MeshTopology) -> np.ndarray:
    y = mesh.vertices[:, 1]
    if y.min() < -FLAT_TOL:
        raise InvalidMesh("half-domain must lie in {y >= 0}")
    be = mesh.boundary_edges
    on_flat = (np.abs(y[be[:, 0]]) <= FLAT_TOL) & (np.abs(y[be[:, 1]]) <= FLAT_TOL)
    if not np.any(on_flat):
        raise InvalidMesh("no boundary segment on {y = 0}")
    flat = np.flatnonzero(np.abs(y) <= FLAT_TOL)
    flat_edge_vertices = np.unique(be[on_flat])
    if not np.array_equal(np.sort(flat), flat_edge_vertices):
        raise InvalidMesh("vertices on {y = 0} must all lie on the flat boundary segment")
    return flat


def double_mesh(mesh: MeshTopology) -> tuple[MeshTopology, np.ndarray]:
    """Mirror a half-domain mesh about y = 0.

    Returns the doubled mesh and the vertex mirror map. Upper vertices and
    cells keep their indices; mirrored cells follow with cell tag 1.
    """
    flat = _flat_vertices(mesh)
    nv = mesh.n_vertices
    is_flat = np.zeros(nv, dtype=bool)
    is_flat[flat] = True
    lower_ids = np.flatnonzero(~is_flat)
    mirror = np.arange(nv)
    mirror[lower_ids] = nv + np.arange(len(lower_ids))
    lower_vertices = mesh.vertices[lower_ids] * np.array([1.0, -1.0])
    vertices = np.vstack([mesh.vertices, lower_vertices])
    mirrored = mirror[mesh.cells][:, [0, 2, 1]]  # reversed orientation
    cells = np.vstack([mesh.cells, mirrored])
    tags = np.concatenate([np.zeros(mesh.n_cells, dtype=np.int64), np.ones(mesh.n_cells, dtype=np.int64)])
    full_mirror = np.concatenate([mirror, lower_ids])  # vertex -> its mirror image
    doubled = mesh_from_arrays(vertices, cells, tags, kind=f"{mesh.kind}_doubled")
    return doubled, full_mirror


def _relative_residual(K: sp.spmatrix, u: np.ndarray, rows: np.ndarray) -> float:
    r = (K @ u)[rows]
    scale = np.linalg.norm((abs(K) @ np.abs(u))[rows])
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(r) / scale)


def reflect_even(v: ComplexField, A=None, tol: float = 1e-8) -> ReflectedProblem:
    """Extend v evenly across {y = 0} and reflect the coefficient.

    Raises InvalidInput when v carries flux through the flat segment or does
    not solve div(A grad v) = 0 weakly at interior vertices of the half-domain.
    """
    mesh = v.mesh
    A_half = cell_coefficient(mesh, A)
    doubled, mirror = double_mesh(mesh)
    nv = mesh.n_vertices
    interior_half = np.setdiff1d(np.arange(nv), mesh.boundary_vertices)
    flat = _flat_vertices(mesh)
    # flat vertices that are interior once the domain is doubled
    flat_inner = np.setdiff1d(flat, doubled.boundary_vertices)

    K_half = assemble_system(mesh, A_half.astype(complex)).matrix
    u = np.asarray(v.nodal_values, dtype=complex)
    if flat_inner.size and _relative_residual(K_half, u, flat_inner) > tol:
        raise InvalidInput("field has nonzero flux through the flat segment")
    if interior_half.size and _relative_residual(K_half, u, interior_half) > tol:
        raise InvalidInput("field is not a weak solution in the half-domain")

    A_tilde = np.concatenate([A_half, reflect_coefficient(A_half)])
    values = np.concatenate([u, u[mirror[nv:]]])
    doubled_field = ComplexField(doubled, values)
    K = assemble_system(doubled, A_tilde.astype(complex)).matrix
    interior = np.setdiff1d(np.arange(doubled.n_vertices), doubled.boundary_vertices)
    res = _relative_residual(K, values, interior)
    return ReflectedProblem(
        upper_field=v,
        doubled_field=doubled_field,
        A_tilde=A_tilde,
        doubled_mesh=doubled,
        mirror=mirror,
        residual=res,
    )


def solve_half_domain(mesh: MeshTopology, A, h: BoundaryCurrent) -> ComplexField:
    """Neumann solve of div(A grad v) = 0 with current h, which must vanish on {y = 0}."""
    y = mesh.vertices[:, 1]
    be = mesh.boundary_edges
    on_flat = (np.abs(y[be[:, 0]]) <= FLAT_TOL) & (np.abs(y[be[:, 1]]) <= FLAT_TOL)
    if np.any(h.values[on_flat]):
        raise InvalidInput("current must vanish on the flat segment")
    system = assemble_system(mesh, cell_coefficient(mesh, A).astype(complex))
    return solve_neumann(system, assemble_current(mesh, h))
