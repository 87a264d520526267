"""Quantitative unique-continuation diagnostics.

Everything here measures quantities; none of it asserts the non-explicit
constants of the underlying inequalities. Fields are either FEM solutions
(:class:`ComplexField`) or analytic fields with known gradients.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInput, InvalidArgument
from .fem import BoundaryCurrent, ComplexField, p1_gradients
from .geometry import BoundaryChart, interior_offset

# ---------------------------------------------------------------------------
# Fields


@dataclass(frozen=True)
class AnalyticField:
    """A field given by closed-form value and gradient callables on (x, y) arrays."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    name: str = "analytic"


def harmonic_monomial(k: int, center=(0.0, 0.0)) -> AnalyticField:
    """Re((z - z0)^k), homogeneous harmonic of degree k."""
    cx, cy = center

    def value(x, y):
        return ((x - cx) + 1j * (y - cy)) ** k

    def grad(x, y):
        z = (x - cx) + 1j * (y - cy)
        dz = k * z ** (k - 1) if k > 0 else 0 * z
        return np.real(dz) + 0j, -np.imag(dz) + 0j

    return AnalyticField(lambda x, y: np.real(value(x, y)) + 0j, grad, name=f"monomial{k}")


def affine_field(gx: float, gy: float, c: complex = 0.0) -> AnalyticField:
    return AnalyticField(
        lambda x, y: gx * x + gy * y + c + 0j * x,
        lambda x, y: (np.full_like(x, gx, dtype=complex), np.full_like(y, gy, dtype=complex)),
        name="affine",
    )


def constant_field(c: complex = 1.0) -> AnalyticField:
    return AnalyticField(
        lambda x, y: np.full_like(x, c, dtype=complex),
        lambda x, y: (np.zeros_like(x, dtype=complex), np.zeros_like(y, dtype=complex)),
        name="constant",
    )


Field = Union[ComplexField, AnalyticField]


def _coefficient(A, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """A at points, as (..., 2, 2)."""
    if A is None:
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = 1.0
        return out
    val = np.asarray(A(x, y), dtype=float)
    if val.shape == x.shape or val.ndim == 0:
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = np.broadcast_to(val, x.shape)
        return out
    return val


# ---------------------------------------------------------------------------
# Quadrature


def _circle_points(center, r: float, n: int):
    t = 2.0 * math.pi * np.arange(n) / n
    return center[0] + r * np.cos(t), center[1] + r * np.sin(t)


def _disc_rule(center, r: float, n_angular: int, n_radial: int):
    """Polar Gauss-Legendre x trapezoid rule on B_r: points and weights."""
    xi, wi = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * r * (xi + 1.0)
    wr = 0.5 * r * wi * rho
    t = 2.0 * math.pi * np.arange(n_angular) / n_angular
    R, T = np.meshgrid(rho, t, indexing="ij")
    W = np.repeat(wr[:, None], n_angular, axis=1) * (2.0 * math.pi / n_angular)
    return center[0] + R * np.cos(T), center[1] + R * np.sin(T), W


def _sub_barycentric(m: int) -> np.ndarray:
    pts = []
    for i in range(m):
        for j in range(m - i):
            pts.append(((i + 1 / 3) / m, (j + 1 / 3) / m))
            if i + j < m - 1:
                pts.append(((i + 2 / 3) / m, (j + 2 / 3) / m))
    p = np.asarray(pts)
    return np.column_stack([1.0 - p.sum(axis=1), p[:, 0], p[:, 1]])


class _MeshQuery:
    """Cached geometric queries on one mesh: ball fractions and point location."""

    def __init__(self, mesh, subdivisions: int = 8):
        self.centroids = mesh.centroids
        self.vertices = mesh.vertices
        self.cells = mesh.cells
        self.tree = cKDTree(mesh.centroids)
        p = mesh.vertices[mesh.cells]
        self.radius = np.sqrt(((p - mesh.centroids[:, None, :]) ** 2).sum(axis=2)).max(axis=1)
        self.rmax = float(self.radius.max())
        self.sub = np.einsum("sk,ckd->csd", _sub_barycentric(subdivisions), p)

    def ball_fractions(self, center, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Cells meeting B_r(center) and the fraction of each inside (sub-cell sampling)."""
        cand = np.asarray(self.tree.query_ball_point(center, r + self.rmax), dtype=np.int64)
        if len(cand) == 0:
            return cand, np.zeros(0)
        d = np.linalg.norm(self.centroids[cand] - np.asarray(center), axis=1)
        frac = np.zeros(len(cand))
        inside = d + self.radius[cand] <= r
        frac[inside] = 1.0
        cut = ~inside & (d - self.radius[cand] < r)
        if np.any(cut):
            s = self.sub[cand[cut]]
            ds = np.sqrt(((s - np.asarray(center)) ** 2).sum(axis=2))
            frac[cut] = (ds < r).mean(axis=1)
        keep = frac > 0
        return cand[keep], frac[keep]

    def ball_densities(self, centers: np.ndarray, r: float, density: np.ndarray, chunk: int = 256) -> np.ndarray:
        """sum_c frac_c * density_c over B_r(x) for many centers x at once."""
        out = np.zeros(len(centers))
        for start in range(0, len(centers), chunk):
            block = centers[start:start + chunk]
            lists = self.tree.query_ball_point(block, r + self.rmax)
            owner = np.repeat(np.arange(len(block)), [len(l) for l in lists])
            cand = np.fromiter((c for l in lists for c in l), dtype=np.int64, count=len(owner))
            d = np.linalg.norm(self.centroids[cand] - block[owner], axis=1)
            frac = (d + self.radius[cand] <= r).astype(float)
            cut = (frac == 0) & (d - self.radius[cand] < r)
            if np.any(cut):
                sub = self.sub[cand[cut]]
                ds = np.sqrt(((sub - block[owner[cut]][:, None, :]) ** 2).sum(axis=2))
                frac[cut] = (ds < r).mean(axis=1)
            out[start:start + chunk] = np.bincount(owner, weights=frac * density[cand], minlength=len(block))
        return out

    def locate(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pts = np.column_stack([x, y])
        k = min(12, len(self.cells))
        _, idx = self.tree.query(pts, k=k)
        idx = np.atleast_2d(idx)
        cells = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        for col in range(k):
            todo = cells < 0
            if not todo.any():
                break
            c = idx[todo, col]
            lam = _barycentric(self.vertices[self.cells[c]], pts[todo])
            ok = lam.min(axis=1) >= -1e-10
            where = np.flatnonzero(todo)[ok]
            cells[where] = c[ok]
            bary[where] = lam[ok]
        if np.any(cells < 0):
            raise InvalidArgument("sample points lie outside the mesh")
        return cells, bary


def _barycentric(p, pts):
    v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
    det = (v1[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1])
    l1 = ((pts[:, 0] - v0[:, 0]) * (v2[:, 1] - v0[:, 1]) - (v2[:, 0] - v0[:, 0]) * (pts[:, 1] - v0[:, 1])) / det
    l2 = ((v1[:, 0] - v0[:, 0]) * (pts[:, 1] - v0[:, 1]) - (pts[:, 0] - v0[:, 0]) * (v1[:, 1] - v0[:, 1])) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


_QUERIES: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _query(mesh) -> _MeshQuery:
    q = _QUERIES.get(mesh)
    if q is None:
        q = _QUERIES[mesh] = _MeshQuery(mesh)
    return q


def _evaluate(v: Field, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(v, AnalyticField):
        return np.asarray(v.value(x, y), dtype=complex)
    cells, bary = _query(v.mesh).locate(x.ravel(), y.ravel())
    vals = np.einsum("pk,pk->p", bary, v.nodal_values[v.mesh.cells[cells]])
    return vals.reshape(x.shape)


def ball_energy(v: Field, center, r: float, A=None, n_angular: int = 256, n_radial: int = 48) -> float:
    """int_{B_r(center)} A grad v . conj(grad v)."""
    if isinstance(v, AnalyticField):
        X, Y, W = _disc_rule(center, r, n_angular, n_radial)
        gx, gy = v.grad(X, Y)
        Am = _coefficient(A, X, Y)
        dens = (
            Am[..., 0, 0] * np.abs(gx) ** 2
            + Am[..., 1, 1] * np.abs(gy) ** 2
            + 2.0 * Am[..., 0, 1] * np.real(gx * np.conj(gy))
        )
        return float(np.sum(W * dens))
    cells, frac = _query(v.mesh).ball_fractions(center, r)
    if len(cells) == 0:
        return 0.0
    c = v.mesh.centroids[cells]
    g = v.gradients[cells]
    Am = _coefficient(A, c[:, 0], c[:, 1])
    dens = np.einsum("cd,cde,ce->c", np.conj(g), Am, g).real
    return float(np.sum(frac * v.mesh.cell_areas[cells] * dens))


def total_energy(v: ComplexField, cells=None) -> float:
    g = v.gradients
    e = v.mesh.cell_areas * np.einsum("cd,cd->c", g, np.conj(g)).real
    return float(e.sum() if cells is None else e[cells].sum())


# ---------------------------------------------------------------------------
# Frequency function


@dataclass(frozen=True)
class FrequencyProfile:
    radii: np.ndarray
    H: np.ndarray
    I: np.ndarray
    N: np.ndarray

    def rows(self):
        return [(float(r), float(h), float(i), float(n)) for r, h, i, n in zip(self.radii, self.H, self.I, self.N)]


def frequency_profile(
    v: Field,
    A=None,
    center=(0.0, 0.0),
    radii: Sequence[float] = (),
    n_angular: int = 256,
    n_radial: int = 48,
) -> FrequencyProfile:
    """H(r) = int_{dB_r} (A x.x/|x|^2)|v|^2,  I(r) = int_{B_r} A grad v . conj(grad v),  N = r I / H."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise InvalidArgument("radii must be a positive increasing sequence")
    center = np.asarray(center, dtype=float)
    H = np.empty(len(radii))
    I = np.empty(len(radii))
    t = 2.0 * math.pi * np.arange(n_angular) / n_angular
    nx, ny = np.cos(t), np.sin(t)
    for k, r in enumerate(radii):
        x, y = center[0] + r * nx, center[1] + r * ny
        Am = _coefficient(A, x, y)
        w = Am[:, 0, 0] * nx * nx + 2.0 * Am[:, 0, 1] * nx * ny + Am[:, 1, 1] * ny * ny
        vals = _evaluate(v, x, y)
        H[k] = float(np.sum(w * np.abs(vals) ** 2) * r * 2.0 * math.pi / n_angular)
        I[k] = ball_energy(v, center, r, A, n_angular, n_radial)
    nontrivial = np.any(I > 0)
    if nontrivial and np.any(H <= 0):
        raise DegenerateInput(f"H(r) vanishes at r = {radii[np.argmin(H)]:.4g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        N = np.where(H > 0, radii * I / H, 0.0)
    return FrequencyProfile(radii, H, I, N)


def almgren_monotonicity_constant(profile: FrequencyProfile, R0: float = 1.0) -> float:
    """Smallest C >= 0 making N(r) exp(C r / R0) nondecreasing on the sampled radii."""
    N = profile.N
    r = profile.radii
    if np.any(N <= 0):
        raise DegenerateInput("frequency must be positive to test monotonicity")
    drops = (np.log(N[:-1]) - np.log(N[1:])) * R0 / np.diff(r)
    return float(max(0.0, drops.max())) if len(drops) else 0.0


# ---------------------------------------------------------------------------
# Three spheres, doubling, propagation of smallness


@dataclass(frozen=True)
class UcpCheckResult:
    lhs: float
    rhs: float
    ratio: float
    parameters: dict = field(default_factory=dict)


def three_spheres_check(v: Field, x0, r1: float, r2: float, r3: float) -> UcpCheckResult:
    """Middle-ball energy against E(r1)^theta E(r3)^(1-theta), theta = log(r3/r2)/log(r3/r1), C = 1."""
    if not 0 < r1 < r2 < r3:
        raise InvalidArgument("need 0 < r1 < r2 < r3")
    e1, e2, e3 = (ball_energy(v, x0, r) for r in (r1, r2, r3))
    theta = math.log(r3 / r2) / math.log(r3 / r1)
    rhs = e1 ** theta * e3 ** (1.0 - theta)
    if rhs <= 0:
        raise DegenerateInput("zero energy in the inner or outer ball")
    return UcpCheckResult(e2, rhs, e2 / rhs, {"theta": theta, "C": 1.0})


def doubling_ratio(v: Field, x0, r: float, r0: float | None = None) -> UcpCheckResult:
    """E(2r) / E(r); parameters carry E(r0) / E(r0/2) with r0 defaulting to 2r."""
    e1 = ball_energy(v, x0, r)
    e2 = ball_energy(v, x0, 2.0 * r)
    if e1 <= 0:
        raise DegenerateInput("zero energy in B_r: field is constant near the center")
    r0 = 2.0 * r if r0 is None else r0
    quotient = ball_energy(v, x0, r0) / ball_energy(v, x0, r0 / 2.0)
    return UcpCheckResult(e2, e1, e2 / e1, {"normalized_quotient": quotient, "r0": r0})


@dataclass(frozen=True)
class LpsResult:
    min_ratio: float
    argmin: tuple[float, float]
    centers: np.ndarray
    ratios: np.ndarray

    @property
    def constant(self) -> float:
        """C with E(B_rho(x)) >= E(Omega) / C over the scan."""
        return 1.0 / self.min_ratio

    def rows(self):
        return [(float(c[0]), float(c[1]), float(q)) for c, q in zip(self.centers, self.ratios)]


def lps_scan(v: ComplexField, rho: float, A=None) -> LpsResult:
    """Minimum over centroids x in Omega_{2 rho} of E(B_rho(x)) / E(Omega).

    Ties resolve to the smallest cell index.
    """
    mesh = v.mesh
    region = interior_offset(mesh, 2.0 * rho)
    if region.is_empty:
        raise InvalidArgument(f"Omega_(2 rho) is empty for rho = {rho}")
    total = total_energy(v)
    if total <= 0:
        raise DegenerateInput("zero total energy")
    centers = mesh.centroids[region.cells]
    c = mesh.centroids
    g = v.gradients
    Am = _coefficient(A, c[:, 0], c[:, 1])
    density = mesh.cell_areas * np.einsum("cd,cde,ce->c", np.conj(g), Am, g).real
    ratios = _query(mesh).ball_densities(centers, rho, density) / total
    k = int(np.argmin(ratios))
    return LpsResult(float(ratios[k]), (float(centers[k, 0]), float(centers[k, 1])), centers, ratios)


# ---------------------------------------------------------------------------
# Boundary Sobolev norms and the frequency of a current


def boundary_samples(h: BoundaryCurrent, chart: BoundaryChart, n_samples: int = 512) -> np.ndarray:
    """h at n uniform arclength samples, the boundary rescaled to period 2 pi."""
    if chart is None:
        raise InvalidArgument("a boundary chart is required")
    theta = 2.0 * math.pi * np.arange(n_samples) / n_samples
    if h.profile is not None:
        return np.asarray(h.profile(theta), dtype=complex)
    s = theta * chart.total_length / (2.0 * math.pi)
    return h.values[chart.edge_at(s)]


def sobolev_norm_from_samples(samples: np.ndarray, s: float) -> float:
    """(sum_k (1 + k^2)^s |c_k|^2)^(1/2) with c_k = FFT(samples) / n."""
    n = len(samples)
    c = np.fft.fft(samples) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    return float(math.sqrt(np.sum((1.0 + k * k) ** s * np.abs(c) ** 2)))


def boundary_sobolev_norm(h: BoundaryCurrent, chart: BoundaryChart, s: float, n_samples: int = 512) -> float:
    if n_samples < 512:
        raise InvalidArgument("at least 512 samples are required")
    return sobolev_norm_from_samples(boundary_samples(h, chart, n_samples), s)


def current_frequency(h: BoundaryCurrent, chart: BoundaryChart, n_samples: int = 512) -> float:
    """F(h) = ||h||_{H^-1/2} / ||h||_{H^-1}."""
    samples = boundary_samples(h, chart, n_samples)
    lower = sobolev_norm_from_samples(samples, -1.0)
    if lower == 0:
        raise DegenerateInput("trivial current")
    return sobolev_norm_from_samples(samples, -0.5) / lower


# ---------------------------------------------------------------------------
# Level-set measure constants


@dataclass(frozen=True)
class LevelSetConstants:
    F: float
    p: float
    log10_H: float
    degenerate: bool

    @property
    def H(self) -> float:
        return 10.0 ** self.log10_H if self.log10_H < 300 else math.inf


def level_set_constants(F: float) -> LevelSetConstants:
    """p = 1 + log(4F)/log(17/16),  H = (27F)^(p(p-1)), H reported as log10."""
    if F <= 0:
        raise InvalidArgument("F must be positive")
    p = 1.0 + math.log(4.0 * F) / math.log(17.0 / 16.0)
    degenerate = F <= 0.25
    log10_H = p * (p - 1.0) * math.log10(27.0 * F)
    return LevelSetConstants(F, p, log10_H, degenerate)


def osc_quotient(u: ComplexField, rbar: float, C: float = 1.0) -> float:
    """C * (E(Omega) / E(Omega_{rbar/2}))^C, with the unknown constant C exposed."""
    inner = interior_offset(u.mesh, rbar / 2.0)
    if inner.is_empty:
        raise InvalidArgument("Omega_(rbar/2) is empty")
    e_in = total_energy(u, inner.cells)
    if e_in <= 0:
        raise DegenerateInput("zero energy on the interior offset")
    return C * (total_energy(u) / e_in) ** C


def level_set_mask_bound_log10(energy_E: float, energy_Q: float, constants: LevelSetConstants) -> float:
    """log10 of (H int_E |grad u|^2 / int_Q |grad u|^2)^(1/p), the bound on |E|/|Q|."""
    if energy_E <= 0:
        return -math.inf
    return (constants.log10_H + math.log10(energy_E / energy_Q)) / constants.p


def lps_exponent(C1: float) -> float:
    """p = 1 + log(4 C1^2) / log(17/16) from an LPS constant C1."""
    return 1.0 + math.log(4.0 * C1 * C1) / math.log(17.0 / 16.0)


def gradient_sup_ratio(u: ComplexField, center, R: float) -> float:
    """|Q_R| sup_{Q_R} |grad u|^2 / int_{Q_R} |grad u|^2 over cells with centroid in the cube."""
    c = u.mesh.centroids
    inside = np.all(np.abs(c - np.asarray(center)) < R, axis=1)
    if not inside.any():
        raise InvalidArgument("cube contains no cells")
    g = u.gradients[inside]
    dens = np.einsum("cd,cd->c", g, np.conj(g)).real
    area = u.mesh.cell_areas[inside]
    total = float(np.sum(area * dens))
    if total <= 0:
        raise DegenerateInput("zero energy in the cube")
    return float(area.sum() * dens.max() / total)
