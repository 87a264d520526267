"""Command-line entry point.

Exit status: 0 on success, 1 when a hard gate fails (the failing case is
named on stderr), 2 for unreadable or invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import GateFailure, PowerGapError
from .fem import AdmittivityField, BoundaryCurrent, assemble_current, assemble_system, solve_neumann
from .geometry import boundary_chart, disc, generate_mesh, inclusion_mask, rectangle, strip

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

UCP_MODES = ("frequency", "threespheres", "doubling", "lps", "foh")
SUBCOMMANDS = ("solve", "identities", "bounds", "oned", "ucp", "sweep", "reflect")

TOLERANCES = {
    "identity": 1e-9,
    "bound": 1e-9,
    "solver": 1e-12,
    "reflect": 1e-8,
    "gap_floor": 1e-12,
}

SCHEMA: dict[str, Any] = {
    "subcommand": None,
    "seed": None,
    "out": None,
    "method": None,
    "domain": {"kind", "resolution"},
    "coefficient": {"regime", "gamma0", "gamma1", "c0"},
    "current": {"modes", "support"},
    "inclusion": {"family", "shape", "center", "radius", "radii", "count", "bounds"},
    "tolerances": set(TOLERANCES),
    "oned": {"gamma0", "gamma1", "a", "b", "K", "intervals", "random_intervals"},
    "ucp": {"degree", "center", "radii", "r1", "r2", "r3", "r", "rho", "n_angular", "n_radial", "n_samples"},
    "sweep": {"workers", "lps_rho"},
    "reflect": {"resolution", "a11", "a22", "modes", "support"},
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "method": "direct",
    "domain": {"kind": "unit_square", "resolution": 32},
    "coefficient": {"regime": "constant_pair", "gamma0": 1.0, "gamma1": [2.0, 1.0]},
    "current": {"modes": {"1": 1.0, "2": 0.5}},
    "inclusion": {"shape": "disc", "radius": 0.2},
    "tolerances": dict(TOLERANCES),
    "oned": {"gamma0": [4.0, [0.0, 4.0], -1.0], "gamma1": [4.25], "a": -0.5, "b": 0.5, "K": 1.0},
    "ucp": {"degree": 2, "center": [0.0, 0.0], "n_angular": 256, "n_radial": 48, "n_samples": 512},
    "sweep": {"workers": 1},
    "reflect": {"resolution": 32, "a11": {"constant": 1.0, "x": 0.5}, "a22": {"constant": 2.0, "y": 0.3}},
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config loading


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if p.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc
    else:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a table")
    validate_keys(doc)
    return doc


def validate_keys(doc: dict) -> None:
    for key, value in doc.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        allowed = SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{key!r} must be a table")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"unknown key '{key}.{sub}'")


def merge(defaults: dict, doc: dict) -> dict:
    out = json.loads(json.dumps(defaults))
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def apply_overrides(cfg: dict, tols: list[str], seed: int | None) -> dict:
    for item in tols or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in TOLERANCES:
            raise ConfigError(f"unknown tolerance {name!r}")
        try:
            cfg["tolerances"][name] = float(value)
        except ValueError as exc:
            raise ConfigError(f"tolerance {name} must be a number, got {value!r}") from exc
    if seed is not None:
        cfg["seed"] = seed
    return cfg


# ---------------------------------------------------------------------------
# Output


def _clean(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dump_json(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def format_csv(header, rows) -> str:
    def cell(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Shared construction


def _mesh(cfg):
    d = cfg["domain"]
    return generate_mesh(d["kind"], int(d["resolution"]))


def _field(cfg, mesh) -> AdmittivityField:
    from .sizelab import build_field

    c = cfg["coefficient"]
    return build_field(mesh, c["regime"], c["gamma0"], c["gamma1"])


def _current(cfg, mesh) -> BoundaryCurrent:
    from .sizelab import build_current

    return build_current(mesh, cfg["current"]["modes"], cfg["current"].get("support"))


def _inclusion(cfg, mesh):
    inc = cfg["inclusion"]
    shape = inc.get("shape", "disc")
    if shape == "disc":
        center = inc.get("center") or ([0.5, 0.5] if mesh.kind == "unit_square" else [0.0, 0.0])
        pred = disc(tuple(center), float(inc["radius"]))
    elif shape == "rectangle":
        pred = rectangle(*map(float, inc["bounds"]))
    elif shape == "strip":
        pred = strip(*map(float, inc["bounds"]))
    else:
        raise ConfigError(f"unknown inclusion shape {shape!r}")
    return inclusion_mask(mesh, pred)


def _solve_single(cfg):
    from .power import compute_powers

    mesh = _mesh(cfg)
    field_ = _field(cfg, mesh)
    h = _current(cfg, mesh)
    D = _inclusion(cfg, mesh)
    if D.is_empty:
        raise ConfigError("inclusion contains no cells at this resolution")
    load = assemble_current(mesh, h)
    rtol = cfg["tolerances"]["solver"]
    u0 = solve_neumann(assemble_system(mesh, field_.background), load, cfg["method"], rtol)
    u1 = solve_neumann(assemble_system(mesh, field_.combined(D)), load, cfg["method"], rtol)
    report = compute_powers(u0, u1, h, field_, D)
    return dict(mesh=mesh, field=field_, h=h, D=D, u0=u0, u1=u1, report=report)


# ---------------------------------------------------------------------------
# Subcommands; each returns (json_doc, csv_text or None)


def cmd_solve(cfg, args):
    s = _solve_single(cfg)
    rec = s["report"].to_record()
    rec["volume_fraction"] = s["D"].area / s["mesh"].area
    rec["n_vertices"] = s["mesh"].n_vertices
    return rec, None


def cmd_identities(cfg, args):
    from .power import identity_residuals

    s = _solve_single(cfg)
    ledger = identity_residuals(s["u0"], s["u1"], s["field"], s["D"], s["h"])
    tol = cfg["tolerances"]["identity"]
    bad = ledger.failures(tol)
    if bad:
        worst = max(bad, key=lambda k: ledger.residuals[k])
        raise GateFailure("single", f"identity {worst} residual {ledger.residuals[worst]:.3e} > {tol:g}")
    return {"powers": s["report"].to_record(), "residuals": ledger.to_record(), "max": ledger.max_applicable()}, None


def cmd_bounds(cfg, args):
    from .power import bound_check_constant, bound_check_variable

    s = _solve_single(cfg)
    field_, report = s["field"], s["report"]
    c0 = cfg["coefficient"].get("c0")
    rtol = cfg["tolerances"]["bound"]
    if field_.regime == "constant_pair":
        bc = bound_check_constant(report, field_, c0, rtol)
    else:
        bc = bound_check_variable(report, field_, c0, rtol)
    if not bc.holds:
        raise GateFailure("single", f"energy bound fails: {bc.lower:.6g} <= {bc.mid:.6g} <= {bc.upper:.6g}")
    doc = {"lower": bc.lower, "energy_D": bc.mid, "upper": bc.upper, "K1": bc.K1, "K2": bc.K2, "holds": bc.holds}
    return {"powers": report.to_record(), "bound": doc}, None


def cmd_oned(cfg, args):
    from .oned import OneDProblem, polynomial, power_gap_1d, re_im_gap_formulas
    from .sizelab import parse_complex

    o = cfg["oned"]
    g0 = polynomial([parse_complex(c) for c in o["gamma0"]])
    g1 = polynomial([parse_complex(c) for c in o["gamma1"]])
    K = parse_complex(o["K"])
    intervals = [tuple(map(float, ab)) for ab in o.get("intervals") or [(o["a"], o["b"])]]
    n_rand = int(o.get("random_intervals") or 0)
    if n_rand:
        rng = np.random.Generator(np.random.Philox(int(cfg["seed"])))
        for _ in range(n_rand):
            a, b = np.sort(rng.uniform(-0.99, 0.99, size=2))
            intervals.append((float(a), float(b)))
    rows = []
    worst = 0.0
    for a, b in intervals:
        p = OneDProblem(g0, g1, a, b, K)
        dw = power_gap_1d(p)
        re, im = re_im_gap_formulas(p)
        worst = max(worst, abs(re - dw.real), abs(im - dw.imag))
        rows.append((a, b, dw.real, dw.imag, abs(dw), re, im))
    header = ("a", "b", "re", "im", "abs", "re_formula", "im_formula")
    doc = {"n_intervals": len(rows), "max_abs_gap": max(r[4] for r in rows), "formula_mismatch": worst}
    return doc, format_csv(header, rows)


def cmd_ucp(cfg, args):
    from . import ucp

    u = cfg["ucp"]
    mode = args.mode
    center = tuple(map(float, u["center"]))
    if mode in ("frequency", "threespheres", "doubling"):
        k = int(u["degree"])
        v = ucp.harmonic_monomial(k, center)
    if mode == "frequency":
        radii = u.get("radii") or np.linspace(0.1, 0.9, 9).tolist()
        prof = ucp.frequency_profile(v, None, center, radii, int(u["n_angular"]), int(u["n_radial"]))
        doc = {
            "degree": k,
            "max_deviation": float(np.max(np.abs(prof.N - k))),
            "monotonicity_constant": ucp.almgren_monotonicity_constant(prof),
        }
        return doc, format_csv(("r", "H", "I", "N"), prof.rows())
    if mode == "threespheres":
        r1, r2, r3 = (float(u.get(n, d)) for n, d in (("r1", 1.0), ("r2", 2.0), ("r3", 4.0)))
        res = ucp.three_spheres_check(v, center, r1, r2, r3)
        return {"lhs": res.lhs, "rhs": res.rhs, "ratio": res.ratio, **res.parameters}, None
    if mode == "doubling":
        res = ucp.doubling_ratio(v, center, float(u.get("r", 0.5)))
        return {"E_2r": res.lhs, "E_r": res.rhs, "ratio": res.ratio, "expected": 4.0 ** k, **res.parameters}, None
    mesh = _mesh(cfg)
    h = _current(cfg, mesh)
    if mode == "lps":
        field_ = _field(cfg, mesh)
        load = assemble_current(mesh, h)
        u0 = solve_neumann(assemble_system(mesh, field_.background), load, cfg["method"], cfg["tolerances"]["solver"])
        rho = float(u.get("rho", 0.1))
        res = ucp.lps_scan(u0, rho)
        doc = {
            "rho": rho,
            "min_ratio": res.min_ratio,
            "argmin": list(res.argmin),
            "constant": res.constant,
            "ball_fraction": math.pi * rho * rho / mesh.area,
            "p_lps": ucp.lps_exponent(res.constant),
        }
        return doc, format_csv(("x", "y", "ratio"), res.rows())
    if mode == "foh":
        chart = boundary_chart(mesh)
        n = int(u["n_samples"])
        F = ucp.current_frequency(h, chart, n)
        lc = ucp.level_set_constants(F)
        doc = {
            "F": F,
            "norm_minus_half": ucp.boundary_sobolev_norm(h, chart, -0.5, n),
            "norm_minus_one": ucp.boundary_sobolev_norm(h, chart, -1.0, n),
            "p": lc.p,
            "log10_H": lc.log10_H,
            "degenerate": lc.degenerate,
        }
        return doc, None
    raise ConfigError(f"unknown ucp mode {mode!r}")


def cmd_sweep(cfg, args):
    from .sizelab import SweepConfig, energy_quotient, fit_size_law, records_csv, run_sweep
    from .ucp import lps_scan

    inc = cfg["inclusion"]
    kw = {}
    for key in ("center", "radii", "count"):
        if inc.get(key) is not None:
            kw[key] = tuple(inc[key]) if isinstance(inc[key], list) else inc[key]
    sc = SweepConfig(
        domain=cfg["domain"]["kind"],
        resolution=int(cfg["domain"]["resolution"]),
        regime=cfg["coefficient"]["regime"],
        gamma0=cfg["coefficient"]["gamma0"],
        gamma1=cfg["coefficient"]["gamma1"],
        c0=cfg["coefficient"].get("c0"),
        modes={int(k): v for k, v in cfg["current"]["modes"].items()},
        support=None if cfg["current"].get("support") is None else tuple(cfg["current"]["support"]),
        family=inc.get("family", "concentric"),
        seed=int(cfg["seed"]),
        identity_tol=cfg["tolerances"]["identity"],
        bound_rtol=cfg["tolerances"]["bound"],
        method=cfg["method"],
        lps_rho=cfg["sweep"].get("lps_rho"),
        workers=int(cfg["sweep"]["workers"]),
        **kw,
    )
    outcome = run_sweep(sc)
    records = outcome.records
    doc: dict[str, Any] = {"n_records": len(records), "fit": None}
    if records:
        C = lps_scan(outcome.background, sc.lps_rho).constant if sc.lps_rho else None
        fit = fit_size_law(records, floor=cfg["tolerances"]["gap_floor"], lps_constant=C)
        doc["fit"] = fit.to_dict()
        doc["energy_quotient"] = energy_quotient(records)
    return doc, records_csv(records)


def cmd_reflect(cfg, args):
    from .reflect import ellipticity, reflect_even, solve_half_domain
    from .sizelab import affine_coefficient, build_current

    r = cfg["reflect"]
    mesh = generate_mesh("unit_square", int(r["resolution"]))
    a11 = affine_coefficient(r["a11"])
    a22 = affine_coefficient(r["a22"])

    def A(x, y):
        f = [np.real(a(x, y)) if callable(a) else np.full_like(x, np.real(a)) for a in (a11, a22)]
        return np.stack(f, axis=-1)

    h = build_current(mesh, r.get("modes") or cfg["current"]["modes"], r.get("support") or (2.0, 3.0))
    v = solve_half_domain(mesh, A, h)
    prob = reflect_even(v, A, tol=cfg["tolerances"]["reflect"])
    tol = cfg["tolerances"]["reflect"]
    if prob.residual > tol:
        raise GateFailure("reflect", f"weak residual {prob.residual:.3e} > {tol:g}")
    half, doubled = prob.energies()
    wh, wd = prob.energies(weighted=True)
    doc = {
        "residual": prob.residual,
        "energy_half": half,
        "energy_doubled": doubled,
        "energy_defect": abs(doubled - 2.0 * half) / max(doubled, 1e-300),
        "weighted_energy_half": wh,
        "weighted_energy_doubled": wd,
        "ellipticity_A": list(ellipticity(prob.A_tilde[: mesh.n_cells])),
        "ellipticity_A_tilde": list(ellipticity(prob.A_tilde)),
    }
    return doc, None


COMMANDS = {
    "solve": cmd_solve,
    "identities": cmd_identities,
    "bounds": cmd_bounds,
    "oned": cmd_oned,
    "ucp": cmd_ucp,
    "sweep": cmd_sweep,
    "reflect": cmd_reflect,
}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML or JSON experiment config")
    common.add_argument("--out", metavar="PREFIX", help="write PREFIX.json (and PREFIX.csv)")
    common.add_argument("--tol", metavar="NAME=VALUE", action="append", default=[], help="override a tolerance")
    common.add_argument("--seed", type=int, help="seed for randomized families")

    parser = argparse.ArgumentParser(prog="powergap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"powergap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "ucp":
            p.add_argument("mode", choices=UCP_MODES)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = load_config(args.config)
        declared = doc.get("subcommand")
        if declared is not None and declared != args.command:
            raise ConfigError(f"config is for subcommand {declared!r}, not {args.command!r}")
        cfg = apply_overrides(merge(DEFAULTS, doc), args.tol, args.seed)
        cfg["subcommand"] = args.command
        result, csv_text = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return 1
    except PowerGapError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1

    if args.command == "ucp":
        cfg["ucp_mode"] = args.mode
    report = {"version": __version__, "command": args.command, "config": cfg, "result": result}
    text = dump_json(report)
    prefix = args.out or cfg.get("out")
    if prefix:
        if csv_text is not None:
            atomic_write(Path(f"{prefix}.csv"), csv_text)
        atomic_write(Path(f"{prefix}.json"), text)
    else:
        sys.stdout.write(text)
        if csv_text is not None:
            sys.stdout.write(csv_text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
