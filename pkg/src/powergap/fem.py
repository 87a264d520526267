"""Complex P1 finite elements for the Neumann problem div(gamma grad u) = 0.

Coefficients are cell-wise constant, so every assembly integral below is exact.
The boundary normalisation  int_{dOmega} u = 0  is imposed with one Lagrange
multiplier rather than by pinning a vertex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    IncompatibleData,
    InvalidArgument,
    InvalidCoefficient,
    InvalidRegime,
    SolverFailure,
)
from .geometry import BoundaryChart, InclusionMask, MeshTopology

REGIMES = ("constant_pair", "real_background", "general")

_BOUND_EPS = 1e-12


def _check_bounds(values: np.ndarray, c0: float, name: str) -> None:
    sigma = values.real
    if np.any(sigma < c0 - _BOUND_EPS):
        k = int(np.argmin(sigma))
        raise InvalidCoefficient(f"{name}: Re(gamma) = {sigma[k]:.6g} < c0 = {c0:.6g} on cell {k}")
    mod = np.abs(values)
    if np.any(mod > 1.0 / c0 + _BOUND_EPS):
        k = int(np.argmax(mod))
        raise InvalidCoefficient(f"{name}: |gamma| = {mod[k]:.6g} > 1/c0 = {1 / c0:.6g} on cell {k}")


def _largest_c0(*arrays: np.ndarray) -> float:
    v = np.concatenate([np.atleast_1d(a) for a in arrays])
    return float(min(1.0, v.real.min(), 1.0 / np.abs(v).max()))


def _eval_cells(mesh: MeshTopology, f) -> np.ndarray:
    if callable(f):
        c = mesh.centroids
        out = np.asarray(f(c[:, 0], c[:, 1]), dtype=complex)
        return np.broadcast_to(out, (mesh.n_cells,)).copy()
    return np.full(mesh.n_cells, complex(f))


@dataclass(frozen=True, eq=False)
class AdmittivityField:
    """Background gamma0 and inclusion gamma1 admittivities, one value per cell.

    gamma1 is defined on the whole domain; only its values on the inclusion
    enter the perturbed problem through :meth:`combined`.
    """

    gamma0: np.ndarray
    gamma1: np.ndarray
    c0: float
    mu0: float = 0.0
    lipschitz_L: float = 0.0
    regime: str = "general"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise InvalidArgument(f"unknown regime {self.regime!r}")
        if not 0.0 < self.c0 <= 1.0:
            raise InvalidCoefficient(f"c0 must lie in (0, 1], got {self.c0}")
        _check_bounds(self.gamma0, self.c0, "gamma0")
        _check_bounds(self.gamma1, self.c0, "gamma1")
        if self.regime == "constant_pair":
            if np.ptp(self.gamma0.real) + np.ptp(self.gamma0.imag) > 0 or np.ptp(self.gamma1.real) + np.ptp(
                self.gamma1.imag
            ) > 0:
                raise InvalidCoefficient("constant_pair regime requires constant gamma0 and gamma1")
        if self.regime == "real_background" and np.any(self.gamma0.imag != 0):
            raise InvalidCoefficient("real_background regime requires Im(gamma0) == 0")

    @classmethod
    def constant_pair(cls, mesh: MeshTopology, gamma0: complex, gamma1: complex, c0: float | None = None):
        g0 = np.full(mesh.n_cells, complex(gamma0))
        g1 = np.full(mesh.n_cells, complex(gamma1))
        if c0 is None:
            c0 = _largest_c0(g0[:1], g1[:1])
        return cls(g0, g1, c0=c0, mu0=abs(complex(gamma1) - complex(gamma0)), regime="constant_pair")

    @classmethod
    def real_background(
        cls,
        mesh: MeshTopology,
        sigma0: Callable | float,
        gamma1: Callable | complex,
        c0: float | None = None,
        mu0: float | None = None,
        lipschitz_L: float | None = None,
    ):
        g0 = _eval_cells(mesh, sigma0)
        if np.any(g0.imag != 0):
            raise InvalidCoefficient("sigma0 must be real-valued")
        g1 = _eval_cells(mesh, gamma1)
        if c0 is None:
            c0 = _largest_c0(g0, g1)
        if mu0 is None:
            mu0 = max(float(np.abs(g1.imag).min()), float((g1.real - g0.real).min()), 0.0)
        if lipschitz_L is None:
            lipschitz_L = _lipschitz_estimate(mesh, sigma0)
        return cls(g0.real.astype(complex), g1, c0=c0, mu0=mu0, lipschitz_L=lipschitz_L, regime="real_background")

    @classmethod
    def general(cls, mesh: MeshTopology, gamma0, gamma1, c0: float | None = None):
        g0 = _eval_cells(mesh, gamma0)
        g1 = _eval_cells(mesh, gamma1)
        if c0 is None:
            c0 = _largest_c0(g0, g1)
        return cls(g0, g1, c0=c0, mu0=float(np.abs(g1 - g0).max()), regime="general")

    @property
    def background(self) -> np.ndarray:
        return self.gamma0

    def combined(self, mask: InclusionMask) -> np.ndarray:
        """gamma = gamma0 off the inclusion, gamma1 on it."""
        out = self.gamma0.copy()
        out[mask.cells] = self.gamma1[mask.cells]
        return out

    def contrast_alternative(self, cells=None) -> Optional[str]:
        """Which contrast alternative holds cell-wise: |eps1| >= mu0 or sigma1 - sigma0 >= mu0."""
        if self.regime != "real_background":
            return None
        sel = slice(None) if cells is None else cells
        eps1 = self.gamma1.imag[sel]
        dsig = (self.gamma1.real - self.gamma0.real)[sel]
        tol = 1e-12
        if self.mu0 > 0 and np.all(np.abs(eps1) >= self.mu0 - tol):
            return "permittivity"
        if self.mu0 > 0 and np.all(dsig >= self.mu0 - tol):
            return "conductivity"
        return None


def _lipschitz_estimate(mesh: MeshTopology, f) -> float:
    if not callable(f):
        return 0.0
    v = mesh.vertices
    vals = np.asarray(f(v[:, 0], v[:, 1]), dtype=complex) * np.ones(len(v))
    e = mesh.edges
    d = np.linalg.norm(v[e[:, 1]] - v[e[:, 0]], axis=1)
    return float(np.max(np.abs(vals[e[:, 1]] - vals[e[:, 0]]) / d))


# ---------------------------------------------------------------------------
# Boundary currents


def _arc_overlap(e0: float, e1: float, s0: float, length: float, total: float):
    """Overlaps of edge [e0, e1] with the arc [s0, s0 + length], in arc coordinates."""
    pieces = []
    for shift in (-total, 0.0, total):
        a = max(e0 + shift, s0)
        b = min(e1 + shift, s0 + length)
        if b > a:
            pieces.append((a - s0, b - s0))
    return pieces


@dataclass(frozen=True, eq=False)
class BoundaryCurrent:
    """Piecewise-constant complex current density, one value per boundary edge.

    ``profile`` optionally keeps the exact density as a function of the angle
    theta = 2 pi s / L so boundary Sobolev norms can sample it directly.
    """

    mesh: MeshTopology
    values: np.ndarray
    support_arc: Optional[tuple[float, float]] = None
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @property
    def total(self) -> complex:
        return complex(np.sum(self.values * self.mesh.boundary_lengths))

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.values)

    def conj(self) -> "BoundaryCurrent":
        prof = None if self.profile is None else (lambda t, p=self.profile: np.conj(p(t)))
        return BoundaryCurrent(self.mesh, np.conj(self.values), self.support_arc, prof)

    def scaled(self, factor: complex) -> "BoundaryCurrent":
        prof = None if self.profile is None else (lambda t, p=self.profile: factor * p(t))
        return BoundaryCurrent(self.mesh, factor * self.values, self.support_arc, prof)

    def check_zero_mean(self, rtol: float = 1e-10) -> None:
        scale = float(np.sum(np.abs(self.values) * self.mesh.boundary_lengths))
        if abs(self.total) > rtol * max(scale, 1e-300) and scale > 0:
            raise IncompatibleData(f"current has nonzero mean {self.total:.3e} (scale {scale:.3e})")

    @classmethod
    def from_edge_values(cls, mesh: MeshTopology, values, support_arc=None) -> "BoundaryCurrent":
        values = np.asarray(values, dtype=complex)
        if values.shape != (len(mesh.boundary_edges),):
            raise InvalidArgument("one value per boundary edge is required")
        h = cls(mesh, values, support_arc)
        h.check_zero_mean()
        return h

    @classmethod
    def from_modes(
        cls,
        chart: BoundaryChart,
        modes: Mapping[int, complex],
        support_arc: Optional[tuple[float, float]] = None,
    ) -> "BoundaryCurrent":
        """h = sum_k c_k exp(2 pi i k t), t the normalised arclength on the support.

        Edge values are exact averages of h over each edge (or its overlap with
        the support), followed by mean subtraction on the support.
        """
        mesh = chart.mesh
        L = chart.total_length
        if support_arc is None:
            s0, length = 0.0, L
        else:
            s0 = float(support_arc[0]) % L
            length = (float(support_arc[1]) - float(support_arc[0])) % L or L
        starts = chart.edge_start
        lengths = mesh.boundary_lengths
        values = np.zeros(len(starts), dtype=complex)
        support = np.zeros(len(starts))
        for e in range(len(starts)):
            for a, b in _arc_overlap(starts[e], starts[e] + lengths[e], s0, length, L):
                support[e] += b - a
                for k, c in modes.items():
                    c = complex(c)
                    if k == 0:
                        values[e] += c * (b - a)
                        continue
                    w = 2.0 * math.pi * k / length
                    values[e] += c * (np.exp(1j * w * b) - np.exp(1j * w * a)) / (1j * w)
        on = support > 0
        mean = values.sum() / support.sum()
        values = np.where(on, values - mean * support, 0.0) / lengths

        def profile(theta, modes=dict(modes), s0=s0, length=length, L=L):
            s = np.mod(np.asarray(theta, dtype=float) * L / (2.0 * math.pi) - s0, L)
            t = s / length
            out = sum(complex(c) * np.exp(2j * math.pi * k * t) for k, c in modes.items() if k != 0)
            out = out + 0j * t
            return np.where(s < length, out, 0.0)

        arc = None if support_arc is None else (float(support_arc[0]), float(support_arc[1]))
        return cls(mesh, values, arc, profile)

    @classmethod
    def from_function(
        cls, chart: BoundaryChart, f: Callable, support_arc: Optional[tuple[float, float]] = None
    ) -> "BoundaryCurrent":
        """Sample ``f(x, y)`` at edge midpoints, restrict to the support and remove the mean."""
        mesh = chart.mesh
        p = mesh.vertices[mesh.boundary_edges].mean(axis=1)
        values = np.asarray(f(p[:, 0], p[:, 1]), dtype=complex) * np.ones(len(p))
        if support_arc is not None:
            L = chart.total_length
            s0 = float(support_arc[0]) % L
            length = (float(support_arc[1]) - float(support_arc[0])) % L or L
            mid = np.mod(chart.edge_midpoint_arclength - s0, L)
            values = np.where(mid < length, values, 0.0)
        on = values != 0
        lengths = mesh.boundary_lengths
        if on.any():
            mean = np.sum(values * lengths) / lengths[on].sum()
            values = np.where(on, values - mean, 0.0)
        arc = None if support_arc is None else (float(support_arc[0]), float(support_arc[1]))
        return cls(mesh, values, arc)

    @classmethod
    def affine_flux(cls, mesh: MeshTopology, gamma0: complex, grad) -> "BoundaryCurrent":
        """h = gamma0 nu . grad, the flux of the affine field x . grad."""
        g = np.asarray(grad, dtype=float)
        values = complex(gamma0) * (mesh.boundary_normals @ g)
        return cls.from_edge_values(mesh, values)


# ---------------------------------------------------------------------------
# Fields and assembly


def p1_gradients(mesh: MeshTopology) -> np.ndarray:
    """Gradients of the three barycentric functions per cell, shape (n_cells, 3, 2)."""
    p = mesh.vertices[mesh.cells]
    x, y = p[..., 0], p[..., 1]
    twice_area = 2.0 * mesh.signed_areas
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([gx, gy], axis=2) / twice_area[:, None, None]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Nodal P1 field with constant per-cell gradients."""

    mesh: MeshTopology
    nodal_values: np.ndarray

    @property
    def gradients(self) -> np.ndarray:
        g = p1_gradients(self.mesh)
        return np.einsum("cjd,cj->cd", g, self.nodal_values[self.mesh.cells])

    @classmethod
    def interpolate(cls, mesh: MeshTopology, f: Callable) -> "ComplexField":
        v = mesh.vertices
        return cls(mesh, np.asarray(f(v[:, 0], v[:, 1]), dtype=complex) * np.ones(len(v)))

    def boundary_mean(self) -> complex:
        return complex(boundary_mass(self.mesh) @ self.nodal_values) / self.mesh.boundary_length

    def conj(self) -> "ComplexField":
        return ComplexField(self.mesh, np.conj(self.nodal_values))

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        _same_mesh(self, other)
        return ComplexField(self.mesh, self.nodal_values - other.nodal_values)

    def __add__(self, other: "ComplexField") -> "ComplexField":
        _same_mesh(self, other)
        return ComplexField(self.mesh, self.nodal_values + other.nodal_values)

    def to_json(self) -> str:
        doc = {str(i): [float(z.real), float(z.imag)] for i, z in enumerate(self.nodal_values)}
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, mesh: MeshTopology, text: str) -> "ComplexField":
        doc = json.loads(text)
        vals = np.zeros(mesh.n_vertices, dtype=complex)
        for k, (re, im) in doc.items():
            vals[int(k)] = complex(re, im)
        return cls(mesh, vals)


def _same_mesh(u: ComplexField, v: ComplexField) -> None:
    if u.mesh is not v.mesh:
        raise InvalidArgument("fields live on different meshes")


@dataclass(frozen=True, eq=False)
class NeumannSystem:
    """Assembled stiffness matrix A_ij = int gamma grad(phi_j) . grad(phi_i)."""

    mesh: MeshTopology
    matrix: sp.csr_matrix
    coefficient: np.ndarray

    def apply_form(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Sesquilinear form a(u, v) = int gamma grad u . conj(grad v)."""
        return complex(np.conj(v) @ (self.matrix @ u))


def _element_matrices(mesh: MeshTopology, gamma: np.ndarray) -> np.ndarray:
    g = p1_gradients(mesh)
    area = mesh.cell_areas
    if gamma.ndim == 1:
        return gamma[:, None, None] * area[:, None, None] * np.einsum("cid,cjd->cij", g, g)
    return area[:, None, None] * np.einsum("cid,cde,cje->cij", g, gamma, g)


def assemble_system(mesh: MeshTopology, gamma, c0: float | None = None) -> NeumannSystem:
    """Stiffness matrix for a cell-wise constant coefficient.

    ``gamma`` is a scalar, an array of one complex value per cell, or an array
    of 2x2 matrices per cell. The result is complex symmetric, not Hermitian.
    """
    if mesh.dim != 2:
        raise InvalidArgument("assembly is implemented for 2D meshes")
    gamma = np.asarray(gamma)
    if gamma.ndim == 0:
        gamma = np.full(mesh.n_cells, complex(gamma))
    if gamma.shape[0] != mesh.n_cells or gamma.ndim not in (1, 3):
        raise InvalidArgument("coefficient must have one entry per cell")
    if not np.all(np.isfinite(gamma)):
        raise InvalidCoefficient("coefficient has non-finite entries")
    if c0 is not None and gamma.ndim == 1:
        _check_bounds(gamma.astype(complex), c0, "gamma")
    ke = _element_matrices(mesh, gamma)
    rows = np.repeat(mesh.cells, 3, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, 3)).ravel()
    n = mesh.n_vertices
    A = sp.coo_matrix((ke.ravel().astype(complex), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return NeumannSystem(mesh, A, gamma)


def boundary_mass(mesh: MeshTopology) -> np.ndarray:
    """m_i = int_{dOmega} phi_i."""
    m = np.zeros(mesh.n_vertices)
    half = 0.5 * mesh.boundary_lengths
    np.add.at(m, mesh.boundary_edges[:, 0], half)
    np.add.at(m, mesh.boundary_edges[:, 1], half)
    return m


def assemble_current(mesh: MeshTopology, h: BoundaryCurrent, chart: BoundaryChart | None = None) -> np.ndarray:
    """Load vector b_i = int_{dOmega} h phi_i (phi_i real)."""
    if h.mesh is not mesh:
        raise InvalidArgument("current belongs to a different mesh")
    h.check_zero_mean()
    b = np.zeros(mesh.n_vertices, dtype=complex)
    half = 0.5 * h.values * mesh.boundary_lengths
    np.add.at(b, mesh.boundary_edges[:, 0], half)
    np.add.at(b, mesh.boundary_edges[:, 1], half)
    return b


def cocg(A, b, x0=None, tol=1e-12, maxiter=None, M=None):
    """Conjugate orthogonal conjugate gradients for complex symmetric A.

    Uses the unconjugated bilinear form r^T z. ``M`` is an optional
    complex-symmetric preconditioner given as a callable.
    Returns (x, relative residual, iterations).
    """
    n = b.shape[0]
    maxiter = maxiter or 10 * n
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    r = b - A @ x
    bnorm = np.linalg.norm(b) or 1.0
    z = M(r) if M is not None else r
    p = z.copy()
    rho = r @ z
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol and it < maxiter:
        q = A @ p
        pq = p @ q
        if pq == 0:
            break
        alpha = rho / pq
        x += alpha * p
        r -= alpha * q
        res = np.linalg.norm(r) / bnorm
        it += 1
        if res <= tol:
            break
        z = M(r) if M is not None else r
        rho_new = r @ z
        if rho == 0:
            break
        p = z + (rho_new / rho) * p
        rho = rho_new
    return x, res, it


def solve_neumann(
    system: NeumannSystem,
    load: np.ndarray,
    method: str = "direct",
    rtol: float = 1e-12,
    maxiter: int | None = None,
) -> ComplexField:
    """Galerkin solution with boundary mean zero.

    ``direct`` factorises the bordered system [[A, m], [m^T, 0]] with a sparse
    LU; ``cocg`` runs Jacobi-preconditioned COCG on the singular but consistent
    system A u = b and then removes the boundary mean.
    """
    mesh = system.mesh
    A = system.matrix
    n = mesh.n_vertices
    load = np.asarray(load, dtype=complex)
    bnorm = np.linalg.norm(load)
    if bnorm == 0:
        return ComplexField(mesh, np.zeros(n, dtype=complex))
    m = boundary_mass(mesh)
    if method == "direct":
        K = sp.bmat([[A, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]], format="csc")
        rhs = np.concatenate([load, [0.0]])
        lu = spla.splu(K)
        x = lu.solve(rhs)
        for _ in range(3):
            r = rhs - K @ x
            if np.linalg.norm(r) <= rtol * bnorm:
                break
            x += lu.solve(r)
        u = x[:n]
    elif method == "cocg":
        d = A.diagonal()
        u, _, _ = cocg(A, load, tol=rtol, maxiter=maxiter, M=lambda r: r / d)
        u = u - (m @ u) / m.sum()
    else:
        raise InvalidArgument(f"unknown solver method {method!r}")
    res = np.linalg.norm(A @ u - load) / bnorm
    if not np.isfinite(res) or res > rtol:
        raise SolverFailure(f"relative residual {res:.3e} exceeds {rtol:.1e}", residual=res)
    return ComplexField(mesh, u)


def solve_pair(mesh, field: AdmittivityField, h: BoundaryCurrent, mask: InclusionMask, method="direct"):
    """Background and perturbed potentials (u0, u1) for one current."""
    load = assemble_current(mesh, h)
    u0 = solve_neumann(assemble_system(mesh, field.background), load, method)
    u1 = solve_neumann(assemble_system(mesh, field.combined(mask)), load, method)
    return u0, u1


def cell_products(u: ComplexField, v: ComplexField) -> np.ndarray:
    """area * grad u . conj(grad v) per cell."""
    _same_mesh(u, v)
    gu = u.gradients
    gv = v.gradients
    return u.mesh.cell_areas * np.einsum("cd,cd->c", gu, np.conj(gv))


def gradient_energy(u: ComplexField, v: ComplexField, mask: InclusionMask | None = None, weight=None) -> complex:
    """sum over mask cells of area * w * grad u . conj(grad v).

    ``weight`` may be None (unit), a scalar, one value per cell, or one 2x2
    matrix per cell (then the integrand is (W grad u) . conj(grad v)).
    """
    _same_mesh(u, v)
    if mask is not None and mask.mesh is not u.mesh:
        raise InvalidArgument("mask belongs to a different mesh")
    cells = slice(None) if mask is None else mask.cells
    w = 1.0 if weight is None else np.asarray(weight)
    if np.ndim(w) == 3:
        gu = np.einsum("cde,ce->cd", w, u.gradients)
        prod = u.mesh.cell_areas * np.einsum("cd,cd->c", gu, np.conj(v.gradients))
        return complex(prod[cells].sum())
    prod = cell_products(u, v)
    if np.ndim(w) == 1:
        return complex((w[cells] * prod[cells]).sum())
    return complex(w * prod[cells].sum())
