"""Command-line entry point.

``wienerchaos run <config.json> [--seed N] [--out DIR] [--workers K]`` runs one
experiment described by a versioned JSON config and writes ``report.json``
and ``curves.csv`` into the output directory.  ``wienerchaos list-builtins``
prints the inventory of named spectral pairs, kernel families and ladders.

Exit status: 0 on success, 2 when the config fails validation (nothing is
written), 3 when some numerical step reports non-convergence (files are
written, with the offending values flagged).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import breuer_major as bm
from . import chaos2, sheet
from . import toeplitz as tp
from .empirical import edgeworth_check, empirical_study, ratio_curve
from .numerics import RandomSource
from .stein import verify_stein_hermite_pairing

CONFIG_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_UNCONVERGED = 0, 2, 3
DEFAULT_Z = [-2.0, -1.0, 0.0, 1.0, 2.0]


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- report plumbing

def num(value, source: str, error: float | None = None, converged: bool | None = None) -> dict:
    """A report number with its provenance; flagged values also carry the achieved error."""
    out: dict[str, Any] = {"value": _plain(value), "source": source}
    if error is not None:
        out["error"] = _plain(error)
    if converged is not None:
        out["converged"] = bool(converged)
    return out


def _plain(v):
    if v is None:
        return None
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else repr(v)


@dataclass
class Outcome:
    report: dict
    header: list[str]
    rows: list[list] = field(default_factory=list)
    unconverged: list[str] = field(default_factory=list)


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return "%.17g" % (float(v) + 0.0)  # + 0.0 folds -0 into 0


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_format_cell(c) for c in r])
    return buf.getvalue()


# --------------------------------------------------------------------------- validation helpers

def _take(params: dict, schema: dict[str, tuple[Callable, Any]]) -> dict:
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    out = {}
    for key, (check, default) in schema.items():
        if key in params:
            try:
                out[key] = check(params[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        else:
            out[key] = default
    return out


_REQUIRED = object()


def _int(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ValueError(f"{v} outside [{lo}, {hi}]")
        return v
    return check


def _real(lo=None, hi=None, open_lo=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {v!r}")
        v = float(v)
        if lo is not None and (v < lo or (open_lo and v == lo)):
            raise ValueError(f"{v} below the allowed range")
        if hi is not None and v > hi:
            raise ValueError(f"{v} above the allowed range")
        return v
    return check


def _list(item, min_len=1, max_len=200):
    def check(v):
        if not isinstance(v, list) or not min_len <= len(v) <= max_len:
            raise ValueError(f"expected a list of {min_len}..{max_len} entries")
        return [item(x) for x in v]
    return check


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true or false, got {v!r}")
    return v


def _str(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _obj(v):
    if not isinstance(v, dict):
        raise ValueError("expected an object")
    return v


# --------------------------------------------------------------------------- experiments

def _plan_stein(p: dict, ctx) -> Callable[[], Outcome]:
    p = _take(p, {
        "orders": (_list(_int(1, 10)), [1, 2, 3, 4, 5, 6]),
        "z_grid": (_list(_real(-30, 30), max_len=1000), [round(-3 + 0.1 * k, 10) for k in range(61)]),
        "tol": (_real(1e-15, 1e-2), 1e-12),
    })

    def run() -> Outcome:
        rows, worst, per_q, bad = [], 0.0, {}, []
        for q in p["orders"]:
            for z in p["z_grid"]:
                c = verify_stein_hermite_pairing(q, z, p["tol"])
                rows.append([q, z, c.closed_form, c.quadrature, c.residual, c.error_estimate, c.converged])
                worst = max(worst, c.residual)
                per_q[q] = max(per_q.get(q, 0.0), c.residual)
                if not c.converged:
                    bad.append(f"pairing q={q} z={z}")
        report = {
            "max_residual": num(worst, "measured"),
            "max_residual_by_order": {str(q): num(v, "measured") for q, v in per_q.items()},
        }
        return Outcome(report, ["q", "z", "closed_form", "quadrature", "residual", "error_estimate",
                                "converged"], rows, bad)

    return run


def _approx_fields(r: chaos2.NormalApproxReport) -> dict:
    return {
        "kappa2": num(r.kappa2, "second-chaos cumulant power sum"),
        "kappa3": num(r.kappa3, "second-chaos cumulant power sum"),
        "kappa4": num(r.kappa4, "second-chaos cumulant power sum"),
        "kappa8": num(r.kappa8, "second-chaos cumulant power sum"),
        "phi": num(r.phi, "stein bound"),
        "kolmogorov_bound": num(r.kolmogorov_bound, "stein bound"),
        "alpha": num(r.alpha, "third cumulant over stein bound"),
        "rho": num(r.rho, "limit correlation"),
        "eighth_ratio": num(r.eighth_ratio, "eighth cumulant over stein bound"),
        "edgeworth_coefficient": num(r.edgeworth_coefficient, "edgeworth correction"),
    }


def _mc_fields(sample_sorted, phi, rho, kappa3, z_grid, delta, label, rows):
    st = empirical_study(sample_sorted, phi, z_grid, rho, delta)
    ew = edgeworth_check(st.sample, kappa3, z_grid, presorted=True)
    for pt in st.ratios:
        rows.append([label, pt.z, pt.ratio, pt.se, pt.predicted])
    return {
        "n": num(st.n, "config"),
        "d_kol": num(st.d_kol, "measured"),
        "dkw_radius": num(st.dkw, "DKW radius"),
        "edgeworth_max_plain": num(ew.max_plain, "measured"),
        "edgeworth_max_corrected": num(ew.max_corrected, "measured"),
        "edgeworth_se": num(ew.se, "measured"),
        "edgeworth_improved": ew.improved,
        "edgeworth_underpowered": ew.underpowered,
    }


def _plan_chaos2(p: dict, ctx) -> Callable[[], Outcome]:
    p = _take(p, {
        "eigenvalues": (_list(_real(), max_len=5000), None),
        "family": (_str, None),
        "eps": (_real(0, 0.9, open_lo=True), None),
        "m": (_int(2, 3000), 200),
        "standardize": (_bool, False),
        "n": (_int(0, 10**8), 0),
        "z_grid": (_list(_real(-10, 10)), DEFAULT_Z),
        "delta": (_real(0, 1, open_lo=True), 0.01),
    })
    if (p["eigenvalues"] is None) == (p["family"] is None):
        raise ConfigError("give exactly one of 'eigenvalues' or 'family'")
    if p["family"] is not None:
        if p["family"] != "sheet-kernel":
            raise ConfigError(f"unknown kernel family {p['family']!r}")
        if p["eps"] is None:
            raise ConfigError("family 'sheet-kernel' needs 'eps'")
        sheet.SheetModel(1, p["eps"], p["m"])

    def run() -> Outcome:
        if p["eigenvalues"] is not None:
            s = chaos2.Chaos2Spectrum(np.asarray(p["eigenvalues"], dtype=float))
        else:
            s = sheet.spectrum_1d(p["eps"], p["m"])
        if p["standardize"]:
            s = chaos2.standardize(s)
        r = chaos2.normal_approx_report(s)
        report = {"spectrum_size": num(len(s), "config"), **_approx_fields(r)}
        rows: list[list] = []
        if p["n"] > 0:
            x = np.sort(chaos2.sample(s, ctx.src.spawn(0), p["n"], ctx.workers))
            report["monte_carlo"] = _mc_fields(x, r.phi, r.rho, r.kappa3, p["z_grid"], p["delta"],
                                               "sample", rows)
        return Outcome(report, ["label", "z", "ratio", "se", "predicted"], rows)

    return run


def _plan_toeplitz(p: dict, ctx) -> Callable[[], Outcome]:
    p = _take(p, {
        "pair": (_str, None),
        "tabulated": (_obj, None),
        "T_ladder": (_list(_real(0, 1e5, open_lo=True), max_len=20), [100.0]),
        "m": (_int(2, tp.MAX_GRID), 1000),
        "jmax": (_int(2, tp.MAX_JMAX), 4),
        "embedding_check": (_bool, False),
        "n": (_int(0, 10**8), 0),
        "z_grid": (_list(_real(-10, 10)), DEFAULT_Z),
        "delta": (_real(0, 1, open_lo=True), 0.01),
    })
    if (p["pair"] is None) == (p["tabulated"] is None):
        raise ConfigError("give exactly one of 'pair' or 'tabulated'")
    if p["pair"] is not None:
        if p["pair"] not in tp.builtin_pairs():
            raise ConfigError(f"unknown spectral pair {p['pair']!r}")
        pair_factory = lambda: tp.get_pair(p["pair"])
    else:
        t = _take(p["tabulated"], {"f": (_str, _REQUIRED), "g": (_str, _REQUIRED),
                                   "tail_exponent": (_real(1, 50, open_lo=True), _REQUIRED)})
        base = ctx.config_dir
        try:
            f = tp.load_tabulated(base / t["f"], t["tail_exponent"])
            g = tp.load_tabulated(base / t["g"], t["tail_exponent"])
            pair = tp.SpectralPair("tabulated", f, g)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"tabulated pair: {exc}") from None
        pair_factory = lambda: pair

    def run() -> Outcome:
        pair = pair_factory()
        rows: list[list] = []
        bad: list[str] = []
        asym = tp.asymptotic_constants(pair, max(p["jmax"], 3))
        for j, ok in asym.converged.items():
            if not ok:
                bad.append(f"product integral j={j}")
        report: dict[str, Any] = {
            "pair": pair.name,
            "sigma2_inf": num(asym.sigma2_inf, "toeplitz asymptotic"),
            "limit_constant": num(asym.limit_constant, "toeplitz limit constant as published"),
            "limit_constant_edgeworth": num(asym.limit_constant_edgeworth, "toeplitz limit constant from edgeworth"),
            "asymptotic_standardized": {
                str(j): num(v, "toeplitz asymptotic", asym.integral_errors[j], asym.converged[j])
                for j, v in asym.standardized.items()},
            "horizons": [],
        }
        for i, T in enumerate(p["T_ladder"]):
            rep = tp.toeplitz_cumulants(pair, T, p["m"], p["jmax"], with_asymptotics=False)
            h: dict[str, Any] = {
                "T": num(T, "config"),
                "sigma2_T": num(rep.sigma2_T, "toeplitz trace"),
                "cumulants": {str(j): num(v, "toeplitz trace") for j, v in rep.cumulants.items()},
                "scaled_standardized": {str(j): num(rep.scaled_standardized(j), "toeplitz trace")
                                        for j in rep.standardized},
            }
            if p["embedding_check"]:
                s = tp.chaos2_embedding(pair, T, p["m"])
                gap = max((abs(chaos2.cumulant(s, j) - rep.cumulants[j]) / abs(rep.cumulants[j])
                           for j in range(2, p["jmax"] + 1) if abs(rep.cumulants[j]) > 1e-12),
                          default=0.0)
                h["embedding_route_gap"] = num(gap, "chaos2 embedding versus toeplitz trace")
            if p["n"] > 0:
                rr = tp.toeplitz_rate_report(pair, T, p["m"], ctx.src.spawn(i), p["n"], p["z_grid"],
                                             ctx.workers, p["delta"])
                h["monte_carlo"] = {
                    "n": num(rr.n, "config"), "phi": num(rr.phi, "stein bound"),
                    "kappa3": num(rr.kappa3, "second-chaos cumulant power sum"),
                    "d_kol": num(rr.d_kol, "measured"), "dkw_radius": num(rr.dkw, "DKW radius"),
                    "ratio_to_phi": num(rr.ratio_to_phi, "measured"),
                    "root_T_distance": num(rr.root_T_distance, "measured"),
                    "root_T_gap_at_zero": num(rr.root_T_gap_at_zero, "measured", rr.root_T_gap_se),
                    "underpowered": rr.underpowered,
                }
                for pt in rr.ratios:
                    rows.append([T, pt.z, pt.ratio, pt.se, pt.predicted])
            report["horizons"].append(h)
        return Outcome(report, ["T", "z", "ratio", "se", "predicted"], rows, bad)

    return run


def _plan_sheet(p: dict, ctx) -> Callable[[], Outcome]:
    p = _take(p, {
        "d": (_int(1, sheet.MAX_D), 1),
        "eps_ladder": (_list(_real(0, 0.9, open_lo=True), max_len=20), list(sheet.EPS_LADDER)),
        "m": (_int(2, 3000), 200),
        "jmax": (_int(2, 8), 6),
        "kronecker": (_bool, None),
        "standardized": (_bool, False),
        "n": (_int(0, 10**8), 0),
        "z_grid": (_list(_real(-10, 10)), DEFAULT_Z),
        "delta": (_real(0, 1, open_lo=True), 0.01),
    })
    models = [sheet.SheetModel(p["d"], e, p["m"]) for e in p["eps_ladder"]]
    kron = p["kronecker"] if p["kronecker"] is not None else p["d"] == 2
    if (kron or p["n"] > 0) and p["d"] >= 2 and p["m"] ** p["d"] > sheet.MAX_KRONECKER:
        raise ConfigError(f"product spectrum m^d = {p['m'] ** p['d']} exceeds {sheet.MAX_KRONECKER}")
    if p["n"] > 0 and p["d"] > 2:
        raise ConfigError("sampling is available for d <= 2 only")

    def run() -> Outcome:
        rows: list[list] = []
        points = []
        for i, model in enumerate(models):
            s1 = sheet.spectrum_1d(model.eps, model.m)
            c = sheet.sheet_cumulants(model, p["jmax"], kron, s1=s1)
            pt: dict[str, Any] = {
                "eps": num(model.eps, "config"),
                "log_inv_eps": num(model.log_inv_eps, "config"),
                "limit_variance": num(2.0 ** (1 - model.d), "sheet lift"),
                "cumulants_1d": {str(j): num(v, "second-chaos cumulant power sum") for j, v in c.one_d.items()},
                "cumulants": {str(j): num(v, "sheet lift") for j, v in c.lifted.items()},
            }
            if c.kronecker is not None:
                pt["cumulants_kronecker"] = {str(j): num(v, "kronecker spectrum") for j, v in c.kronecker.items()}
                pt["route_gap"] = num(c.max_route_gap(), "sheet lift versus kronecker spectrum")
            if p["n"] > 0:
                keep: list = []
                rr = sheet.sheet_rate_report(model, ctx.src.spawn(i), p["n"], ctx.workers, p["delta"],
                                             standardized=p["standardized"], sample_out=keep)
                rho = -rr.kappa3 / (2 * rr.phi) if rr.phi > 0 else None
                ratios = ratio_curve(keep[0], rr.phi, p["z_grid"], rho, presorted=True)
                ew = edgeworth_check(keep[0], rr.kappa3, p["z_grid"], presorted=True)
                pt["monte_carlo"] = {
                    "n": num(rr.n, "config"), "standardized": rr.standardized,
                    "phi": num(rr.phi, "stein bound"), "rho": num(rho, "limit correlation"),
                    "d_kol": num(rr.d_kol, "measured"), "dkw_radius": num(rr.dkw, "DKW radius"),
                    "ratio_to_phi": num(rr.ratio_to_phi, "measured"),
                    "scaled_distance": num(rr.scaled_distance, "measured"),
                    "upper_bound_holds": rr.upper_bound_holds, "underpowered": rr.underpowered,
                    "edgeworth_max_plain": num(ew.max_plain, "measured"),
                    "edgeworth_max_corrected": num(ew.max_corrected, "measured"),
                    "edgeworth_improved": ew.improved, "edgeworth_underpowered": ew.underpowered,
                }
                for r in ratios:
                    rows.append([model.eps, r.z, r.ratio, r.se, r.predicted])
            points.append(pt)
        return Outcome({"d": p["d"], "m": p["m"], "points": points},
                       ["eps", "z", "ratio", "se", "predicted"], rows)

    return run


def _plan_breuer_major(p: dict, ctx) -> Callable[[], Outcome]:
    p = _take(p, {
        "H": (_real(0, 0.5, open_lo=True), _REQUIRED),
        "q": (_int(2, 10), 2),
        "T_ladder": (_list(_real(0, 1e6, open_lo=True), max_len=20), [100.0, 200.0, 500.0]),
        "delta": (_real(0, 10, open_lo=True), 0.25),
        "n": (_int(0, 10**8), 0),
        "z_grid": (_list(_real(-10, 10)), DEFAULT_Z),
        "covariance": (_bool, True),
        "stability": (_bool, False),
        "mesh_levels": (_int(0, 4), 0),
    })
    models = [bm.FbmModel(p["H"], p["q"], T, p["delta"]) for T in p["T_ladder"]]
    if p["n"] > 0:
        for m in models:
            bm._check_field(m)

    def run() -> Outcome:
        bad: list[str] = []
        c = bm.limit_constants(models[0])
        if not c.converged:
            bad.append("limit constants")
        src = "fbm limit constants"
        report: dict[str, Any] = {
            "H": num(p["H"], "config"), "q": num(p["q"], "config"),
            "truncation_radius": num(c.radius, "fbm tail threshold"),
            "sigma2_inf": num(c.sigma2_inf, "fbm variance"),
            "sigma_hat2": num(c.sigma_hat2, src, max(c.errors.values(), default=0.0), c.converged),
            "sigma_hat_s2": {str(s): num(v, src) for s, v in c.sigma_hat_s2.items()},
            "gamma_hat": num(c.gamma_hat, src, c.errors.get("triple"), c.converged),
            "curve_coefficient": num(c.curve_coefficient, src),
            "alpha_limit": num(c.alpha_limit, src),
        }
        if p["stability"]:
            st = bm.truncation_stability(models[0])
            report["truncation_doubling"] = {
                "sigma_hat2_change": num(st.relative_change("sigma_hat2"), "measured"),
                "gamma_hat_change": num(st.relative_change("gamma_hat"), "measured"),
                "stable_4_digits": st.stable(4),
            }
        horizons = []
        for m in models:
            v = bm.variance_constants(m)
            if not v.converged:
                bad.append(f"variance T={m.T}")
            horizons.append({"T": num(m.T, "config"),
                             "sigma2_T": num(v.sigma2_T, "fbm variance", v.errors[0], v.converged),
                             "mesh_variance_ratio": num(bm.discrete_sigma2(m) / v.sigma2_T, "fbm mesh variance")})
        report["horizons"] = horizons
        if p["mesh_levels"]:
            report["mesh_halving"] = [
                {"delta": num(l.delta, "config"), "variance_ratio": num(l.variance_ratio, "fbm mesh variance"),
                 "kappa3": num(l.kappa3, "second-chaos cumulant power sum"),
                 "phi": num(l.phi, "stein bound")}
                for l in bm.mesh_halving(models[-1], p["mesh_levels"])]
        rows: list[list] = []
        if p["n"] > 0:
            ver = bm.verify_limit(models, ctx.src, p["n"], p["z_grid"], ctx.workers, c, p["covariance"])
            for h, out in zip(ver.horizons, horizons):
                out["monte_carlo"] = {
                    "n": num(h.n, "config"), "mean": num(h.mean, "measured"),
                    "variance": num(h.variance, "measured"),
                    "root_T_distance": num(h.root_T_distance, "measured"),
                }
                if h.covariance is not None:
                    out["monte_carlo"]["derivative_covariance"] = num(h.covariance, "measured", h.covariance_se)
                    out["monte_carlo"]["derivative_variance"] = num(h.derivative_variance, "measured")
                for pt in h.points:
                    rows.append([pt.T, pt.z, pt.measured, pt.se, pt.predicted, pt.underpowered])
            report["distance_ratio"] = num(ver.distance_ratio(), "measured")
        return Outcome(report, ["T", "z", "measured", "se", "predicted", "underpowered"], rows, bad)

    return run


PLANNERS = {
    "stein-check": _plan_stein,
    "chaos2-report": _plan_chaos2,
    "toeplitz": _plan_toeplitz,
    "sheet": _plan_sheet,
    "breuer-major": _plan_breuer_major,
}


@dataclass
class Context:
    src: RandomSource
    workers: int
    config_dir: Path


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(cfg) - {"version", "kind", "seed", "output_dir", "params"})
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    if cfg.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}")
    if cfg.get("kind") not in PLANNERS:
        raise ConfigError(f"kind must be one of {sorted(PLANNERS)}")
    if "seed" in cfg:
        _int(0, 2**63 - 1)(cfg["seed"])
    if "params" in cfg and not isinstance(cfg["params"], dict):
        raise ConfigError("params must be an object")
    return cfg


def run(config_path: str | Path, seed: int | None = None, out: str | Path | None = None,
        workers: int = 1) -> int:
    config_path = Path(config_path)
    try:
        cfg = load_config(config_path)
        if workers < 1:
            raise ConfigError("workers must be at least 1")
        if seed is not None and not 0 <= seed < 2**63:
            raise ConfigError("seed out of range")
        seed = seed if seed is not None else cfg.get("seed", 0)
        out_dir = Path(out) if out is not None else Path(cfg.get("output_dir", "."))
        ctx = Context(RandomSource(seed), workers, config_path.parent)
        job = PLANNERS[cfg["kind"]](cfg.get("params", {}), ctx)
    except (ConfigError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    outcome = job()
    report = {"version": CONFIG_VERSION, "kind": cfg["kind"], "seed": seed,
              "unconverged": outcome.unconverged, **outcome.report}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    (out_dir / "curves.csv").write_text(render_csv(outcome.header, outcome.rows))
    if outcome.unconverged:
        print("unconverged: " + "; ".join(outcome.unconverged), file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def list_builtins() -> dict:
    return {
        "experiment_kinds": sorted(PLANNERS),
        "spectral_pairs": sorted(tp.builtin_pairs()),
        "kernel_families": {
            "sheet-kernel": {
                "eps_ladder": list(sheet.EPS_LADDER),
                "m_ladder": list(sheet.M_LADDER),
                "dimensions": list(range(1, sheet.MAX_D + 1)),
                "sampling_dimensions": [1, 2],
            },
        },
        "fbm": {"default_T_ladder": [100.0, 200.0, 500.0], "default_delta": 0.25,
                "max_field": bm.MAX_FIELD},
        "config_version": CONFIG_VERSION,
    }


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="wienerchaos")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--workers", type=int, default=1)
    sub.add_parser("list-builtins", help="print named pairs, kernel families and ladders")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.cmd == "list-builtins":
        print(json.dumps(list_builtins(), indent=2))
        return EXIT_OK
    return run(args.config, args.seed, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
