"""Empirical size-estimate sweeps.

A sweep solves the background problem once, then one perturbed problem per
inclusion, gates every case on the energy identities and the regime's
energy bound, and records (|D|/|Omega|, |dW/W0|). ``fit_size_law`` then
exhibits constants C1, C2, p with

    C1 |dW/W0| <= |D|/|Omega| <= C2 |dW/W0|^(1/p)

over the records.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import DegenerateSweep, GateFailure, InvalidArgument
from .fem import (
    AdmittivityField,
    BoundaryCurrent,
    ComplexField,
    assemble_current,
    assemble_system,
    solve_neumann,
)
from .geometry import InclusionMask, MeshTopology, boundary_chart, disc, generate_mesh, inclusion_mask
from .power import (
    bound_check_constant,
    bound_check_variable,
    compute_powers,
    identity_residuals,
)
from .ucp import lps_exponent, lps_scan

FAMILIES = ("concentric", "half_disc", "random_discs")
GAP_FLOOR = 1e-12
P_GRID = np.round(np.arange(1.0, 8.0 + 1e-9, 0.05), 2)
MAX_SPREAD = 1e3
CSV_COLUMNS = ("case_id", "volume_fraction", "gap_fraction", "energy_fraction", "regime", "boundary_contact")


# ---------------------------------------------------------------------------
# Coefficient specs


def parse_complex(value) -> complex:
    """A number, a [re, im] pair or a string such as "2+1j"."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidArgument(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError as exc:
            raise InvalidArgument(f"cannot read {value!r} as a complex number") from exc
    if isinstance(value, bool) or not isinstance(value, (int, float, complex)):
        raise InvalidArgument(f"cannot read {value!r} as a complex number")
    return complex(value)


def affine_coefficient(value):
    """gamma(x, y) = constant + x * gx + y * gy from a number or {constant, x, y}."""
    if not isinstance(value, dict):
        return parse_complex(value)
    unknown = set(value) - {"constant", "x", "y"}
    if unknown:
        raise InvalidArgument(f"unknown coefficient key {sorted(unknown)[0]!r}")
    c = parse_complex(value.get("constant", 0.0))
    gx = parse_complex(value.get("x", 0.0))
    gy = parse_complex(value.get("y", 0.0))
    if gx == 0 and gy == 0:
        return c
    return lambda x, y: c + gx * x + gy * y


def build_field(mesh: MeshTopology, regime: str, gamma0, gamma1) -> AdmittivityField:
    g0 = affine_coefficient(gamma0)
    g1 = affine_coefficient(gamma1)
    if regime == "constant_pair":
        if callable(g0) or callable(g1):
            raise InvalidArgument("constant_pair needs constant gamma0 and gamma1")
        return AdmittivityField.constant_pair(mesh, g0, g1)
    if regime == "real_background":
        return AdmittivityField.real_background(mesh, g0, g1)
    if regime == "general":
        return AdmittivityField.general(mesh, g0, g1)
    raise InvalidArgument(f"unknown regime {regime!r}")


def build_current(mesh: MeshTopology, modes, support=None) -> BoundaryCurrent:
    """Current from a {k: c} mode table on an optional (start, end) arclength arc."""
    table = {int(k): parse_complex(c) for k, c in dict(modes).items()}
    if not any(table.get(k, 0) for k in table if k != 0):
        raise InvalidArgument("current needs at least one nonzero mode k != 0")
    return BoundaryCurrent.from_modes(boundary_chart(mesh), table, None if support is None else tuple(support))


# ---------------------------------------------------------------------------
# Configuration and records


@dataclass
class SweepConfig:
    domain: str = "unit_square"
    resolution: int = 64
    regime: str = "constant_pair"
    gamma0: Any = 1.0
    gamma1: Any = (2.0, 1.0)
    c0: Optional[float] = None
    modes: dict = field(default_factory=lambda: {1: 1.0, 2: 0.5})
    support: Optional[tuple] = None
    family: str = "concentric"
    center: Optional[tuple] = None
    radii: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
    count: int = 10
    seed: int = 0
    identity_tol: float = 1e-9
    bound_rtol: float = 1e-9
    method: str = "direct"
    lps_rho: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.workers < 1:
            raise InvalidArgument("workers must be at least 1")
        if any(r <= 0 for r in self.radii):
            raise InvalidArgument("radii must be positive")

    def default_center(self) -> tuple:
        if self.center is not None:
            return tuple(self.center)
        if self.family == "half_disc":
            return (0.5, 0.0) if self.domain == "unit_square" else (0.0, -1.0)
        return (0.5, 0.5) if self.domain == "unit_square" else (0.0, 0.0)

    def default_support(self):
        if self.support is not None:
            return tuple(self.support)
        if self.family == "half_disc" and self.domain == "unit_square":
            return (2.25, 2.75)  # middle of the top side, away from the inclusion
        return None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma0"] = _jsonable(self.gamma0)
        d["gamma1"] = _jsonable(self.gamma1)
        d["modes"] = {str(k): _jsonable(v) for k, v in self.modes.items()}
        for key in ("support", "center", "radii"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, tuple):
        return list(v)
    return v


@dataclass(frozen=True)
class SweepRecord:
    case_id: str
    volume_fraction: float
    gap_fraction: float
    energy_fraction: float
    regime: str
    boundary_contact: bool
    radius: float = math.nan
    identity_max: float = 0.0
    bound: Optional[tuple] = None

    def row(self) -> list[str]:
        return [
            self.case_id,
            f"{self.volume_fraction:.17g}",
            f"{self.gap_fraction:.17g}",
            f"{self.energy_fraction:.17g}",
            self.regime,
            "true" if self.boundary_contact else "false",
        ]


@dataclass(frozen=True)
class FitResult:
    C1_emp: float
    C2_emp: float
    p_emp: float
    violations: int
    n_used: int
    n_excluded: int
    spread: float
    p_lps: Optional[float] = None
    lps_constant: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class _Case:
    case_id: str
    mask: InclusionMask
    radius: float
    boundary_contact: bool


def _cases(config: SweepConfig, mesh: MeshTopology) -> list[_Case]:
    center = config.default_center()
    out = []
    if config.family in ("concentric", "half_disc"):
        for i, r in enumerate(config.radii):
            mask = inclusion_mask(mesh, disc(center, r))
            contact = config.family == "half_disc"
            out.append(_Case(f"{config.family}-{i:03d}", mask, float(r), contact))
    else:
        rng = np.random.Generator(np.random.Philox(config.seed))
        r_lo, r_hi = min(config.radii), max(config.radii)
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        i = attempts = 0
        while i < config.count:
            attempts += 1
            if attempts > 1000 * max(config.count, 1):
                raise InvalidArgument("could not place random discs inside the domain")
            r = float(rng.uniform(r_lo, r_hi))
            c = rng.uniform(lo, hi)
            if mesh.distance_to_boundary(c[None, :])[0] <= 1.5 * r:
                continue
            if config.domain == "unit_disc" and np.hypot(*c) >= 1.0:
                continue
            mask = inclusion_mask(mesh, disc(tuple(c), r))
            if mask.is_empty:
                continue
            out.append(_Case(f"random_discs-{i:03d}", mask, r, False))
            i += 1
    return out


def _run_case(case: _Case, ctx: dict) -> SweepRecord:
    mesh, field_, h, load, u0, config = (ctx[k] for k in ("mesh", "field", "h", "load", "u0", "config"))
    if case.mask.is_empty:
        raise GateFailure(case.case_id, "inclusion contains no cells at this resolution")
    system = assemble_system(mesh, field_.combined(case.mask))
    u1 = solve_neumann(system, load, config.method)
    report = compute_powers(u0, u1, h, field_, case.mask)
    ledger = identity_residuals(u0, u1, field_, case.mask, h)
    bad = ledger.failures(config.identity_tol)
    if bad:
        worst = max(bad, key=lambda k: ledger.residuals[k])
        raise GateFailure(case.case_id, f"identity {worst} residual {ledger.residuals[worst]:.3e}")
    bound = None
    if field_.regime == "constant_pair":
        bc = bound_check_constant(report, field_, config.c0, config.bound_rtol)
    elif field_.regime == "real_background":
        bc = bound_check_variable(report, field_, config.c0, config.bound_rtol)
    else:
        bc = None
    if bc is not None:
        bound = (bc.lower, bc.mid, bc.upper)
        if not bc.holds:
            raise GateFailure(
                case.case_id, f"energy bound fails: {bc.lower:.6g} <= {bc.mid:.6g} <= {bc.upper:.6g}"
            )
    W0 = abs(report.W0)
    return SweepRecord(
        case_id=case.case_id,
        volume_fraction=case.mask.area / mesh.area,
        gap_fraction=abs(report.deltaW) / W0,
        energy_fraction=report.energy_D / W0,
        regime=field_.regime,
        boundary_contact=case.boundary_contact,
        radius=case.radius,
        identity_max=ledger.max_applicable(),
        bound=bound,
    )


@dataclass(frozen=True, eq=False)
class SweepOutcome:
    records: list
    background: ComplexField
    mesh: MeshTopology


def run_sweep(config: SweepConfig) -> SweepOutcome:
    mesh = generate_mesh(config.domain, config.resolution)
    field_ = build_field(mesh, config.regime, config.gamma0, config.gamma1)
    h = build_current(mesh, config.modes, config.default_support())
    cases = _cases(config, mesh)
    load = assemble_current(mesh, h)
    u0 = solve_neumann(assemble_system(mesh, field_.background), load, config.method)
    if not cases:
        return SweepOutcome([], u0, mesh)
    ctx = dict(mesh=mesh, field=field_, h=h, load=load, u0=u0, config=config)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(lambda c: _run_case(c, ctx), cases))
    else:
        records = [_run_case(c, ctx) for c in cases]
    records.sort(key=lambda r: r.case_id)
    return SweepOutcome(records, u0, mesh)


def run_inclusion_sweep(config: SweepConfig) -> list[SweepRecord]:
    """One gated record per inclusion of the configured family."""
    return run_sweep(config).records


# ---------------------------------------------------------------------------
# Fitting


def fit_size_law(
    records: Sequence[SweepRecord],
    floor: float = GAP_FLOOR,
    max_spread: float = MAX_SPREAD,
    lps_constant: float | None = None,
) -> FitResult:
    vf = np.array([r.volume_fraction for r in records], dtype=float)
    gf = np.array([r.gap_fraction for r in records], dtype=float)
    if not np.all(np.isfinite(gf)):
        raise DegenerateSweep("non-finite gap fraction")
    used = gf >= floor
    if not used.any():
        raise DegenerateSweep("every gap fraction is below the noise floor")
    v, g = vf[used], gf[used]
    C1 = float(np.min(v / g))
    p, spread = float(P_GRID[-1]), math.inf
    for cand in P_GRID:
        q = v / g ** (1.0 / cand)
        s = float(q.max() / q.min())
        if s <= max_spread:
            p, spread = float(cand), s
            break
    else:
        q = v / g ** (1.0 / p)
        spread = float(q.max() / q.min())
    C2 = float(np.max(v / g ** (1.0 / p)))
    eps = 1e-12
    lower_bad = v < C1 * g * (1.0 - eps)
    upper_bad = v > C2 * g ** (1.0 / p) * (1.0 + eps)
    p_lps = lps_exponent(lps_constant) if lps_constant is not None else None
    return FitResult(
        C1_emp=C1,
        C2_emp=C2,
        p_emp=p,
        violations=int(np.count_nonzero(lower_bad | upper_bad)),
        n_used=int(used.sum()),
        n_excluded=int((~used).sum()),
        spread=spread,
        p_lps=p_lps,
        lps_constant=lps_constant,
    )


def sweep_and_fit(config: SweepConfig) -> tuple[list[SweepRecord], Optional[FitResult]]:
    """Run a sweep and fit it; the fit is None for an empty family."""
    outcome = run_sweep(config)
    if not outcome.records:
        return [], None
    C = None
    if config.lps_rho is not None:
        C = lps_scan(outcome.background, config.lps_rho).constant
    return outcome.records, fit_size_law(outcome.records, lps_constant=C)


def energy_quotient(records: Sequence[SweepRecord]) -> float:
    """max over records of energy_fraction / volume_fraction."""
    if not records:
        raise DegenerateSweep("no records")
    return max(r.energy_fraction / r.volume_fraction for r in records)


def records_csv(records: Sequence[SweepRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(r.row()) for r in records]
    return "\n".join(lines) + "\n"
