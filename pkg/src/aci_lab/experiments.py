"""Experiment runners: parameter sweeps that emit plot-ready CSV files, each
with a JSON manifest recording the resolved config, seed and column
provenance.

Numbers are written with 12 significant digits so reruns diff byte-for-byte.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .benchmark import boundary_from_top_sum, expected_top_b_sums, single_letter_top_fraction
from .bounds import (
    C_MAX,
    Budgets,
    InfoParams,
    achievability_constant,
    achievable_gain_weak,
    converse_gain,
    enrichment_bound,
    expected_min_binomial,
    jakob_breakpoint,
    jakob_curve,
    required_budget,
)
from .config import ExperimentConfig
from .models import (
    ScreeningModel,
    auc,
    epsilon_for_auc,
    g_dist_from_config,
    prevalence,
    screening_information,
    screening_information_weak,
)
from .seeding import derive_seed
from .simulator import Policy, VerificationChannel, run_sweep
from .tails import (
    tail_mean_empirical,
    tail_mean_empirical_se,
    tail_mean_exact,
    tail_mean_gaussian_asymptotic,
    tail_mean_gaussian_exact,
    tail_mean_pareto_asymptotic,
    tail_mean_pareto_exact,
)

log = logging.getLogger(__name__)

EMPIRICAL = "empirical"
CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"
CONFIG = "config"

FIGURE3_COLUMNS = [
    ("B", CONFIG),
    ("empirical_gain", EMPIRICAL),
    ("empirical_se", EMPIRICAL),
    ("benchmark_gain", EMPIRICAL),
    ("benchmark_se", EMPIRICAL),
    ("weak_law_gain", QUADRATURE),
    ("converse_gain", QUADRATURE),
    ("converse_capped", QUADRATURE),
    ("converse_oracle_capped", QUADRATURE),
    ("oracle_gain", QUADRATURE),
]

# The closed forms need nu > 3, so nu <= 3 requests are nudged just above.
PARETO_NU_FLOOR = 3.01


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{float(value):.12g}"
    return str(value)


@dataclass
class RunOutput:
    files: List[Path] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def write_table(
    cfg: ExperimentConfig,
    name: str,
    columns: Sequence[tuple],
    rows: Sequence[Sequence[Any]],
    out: RunOutput,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``<name>.csv`` (and optionally ``.json``) plus its manifest."""
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [c[0] for c in columns]
    path = out_dir / f"{name}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    out.files.append(path)
    if "json" in cfg.formats:
        jpath = out_dir / f"{name}.json"
        records = [dict(zip(header, (fmt(v) for v in row))) for row in rows]
        jpath.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
        out.files.append(jpath)
    manifest = {
        "file": path.name,
        "kind": cfg.kind,
        "config_hash": cfg.config_hash(),
        "config": cfg.reproducible_dict(),
        "seed": cfg.seed,
        "library_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "columns": {c[0]: c[1] for c in columns},
    }
    if extra:
        manifest.update(extra)
    mpath = out_dir / f"{name}.manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    out.files.append(mpath)
    return path


def _model_section(cfg: ExperimentConfig):
    m = cfg.section("model")
    return float(m["p"]), m.get("epsilon"), list(m.get("target_auc") or []), g_dist_from_config(m["g_dist"])


def screening_strengths(cfg: ExperimentConfig) -> List[Dict[str, Any]]:
    """Labelled screening models from ``epsilon`` and each ``target_auc``."""
    p, eps, targets, dist = _model_section(cfg)
    out = []
    if eps is not None:
        model = ScreeningModel(p, float(eps), dist)
        out.append({"label": f"eps{fmt(float(eps))}", "model": model, "target_auc": None})
    for a in targets:
        e = epsilon_for_auc(p, float(a), dist)
        out.append({"label": f"auc{fmt(float(a))}", "model": ScreeningModel(p, e, dist), "target_auc": float(a)})
    if not out:
        raise ValueError("config must set model.epsilon or model.target_auc")
    return out


def info_params(model: ScreeningModel, channel: VerificationChannel) -> InfoParams:
    return InfoParams(
        p=prevalence(model),
        J=screening_information(model),
        I_ver=channel.I_ver,
        H_theta=channel.H_theta,
    )


def _m_g(model: ScreeningModel, alpha: float) -> float:
    return tail_mean_exact(model.g_dist, alpha) if alpha < 1 else 0.0


def run_figure3(cfg: ExperimentConfig) -> RunOutput:
    """Finite-length validation: empirical top-B gain against every reference curve."""
    out = RunOutput()
    K, grid = cfg.K, cfg.B_grid
    channel = VerificationChannel(float(cfg.section("channel")["rho"]))
    bench_reps = int(cfg.section("benchmark")["replications"])
    summary = []
    for i, s in enumerate(screening_strengths(cfg)):
        model = s["model"]
        params = info_params(model, channel)
        sims = run_sweep(
            model, Policy.TOP_B, K, grid, channel, cfg.replications,
            derive_seed(cfg.seed, i, 0), cfg.threads,
        )
        bench = expected_top_b_sums(model, K, grid, bench_reps, derive_seed(cfg.seed, i, 1), cfg.threads)
        rows = []
        for B, sim, (top, top_se) in zip(grid, sims, bench):
            budgets = Budgets(K, B)
            bd = boundary_from_top_sum(K, B, top, top_se, channel)
            conv = converse_gain(params, budgets)
            oracle = channel.I_ver * expected_min_binomial(K, params.p, B)
            capped = min(conv, channel.I_ver * B)
            row = [
                B,
                sim.mean_gain_bits,
                sim.se_gain_bits,
                bd.gain_bits,
                bd.gain_se,
                achievable_gain_weak(params, budgets, _m_g(model, budgets.alpha())),
                conv,
                capped,
                min(conv, oracle),
                oracle,
            ]
            if sim.mean_gain_bits > capped + 3 * sim.se_gain_bits:
                out.violations.append(f"{s['label']} B={B}: empirical gain exceeds capped converse")
            rows.append(row)
        write_table(
            cfg, f"figure3_{s['label']}", FIGURE3_COLUMNS, rows, out,
            extra={
                "strength": {
                    "label": s["label"],
                    "target_auc": s["target_auc"],
                    "epsilon": model.epsilon,
                    "auc": auc(model),
                    "p": model.p,
                    "prevalence": params.p,
                    "J_bits": params.J,
                    "I_ver_bits": params.I_ver,
                },
                "benchmark_replications": bench_reps,
                "replications": cfg.replications,
            },
        )
        summary.append([s["label"], model.epsilon, auc(model), params.p, params.J, params.I_ver])
    write_table(
        cfg, "figure3_strengths",
        [("label", CONFIG), ("epsilon", QUADRATURE), ("auc", QUADRATURE),
         ("prevalence", QUADRATURE), ("J_bits", QUADRATURE), ("I_ver_bits", CLOSED_FORM)],
        summary, out,
    )
    return out


def run_bounds_curve(cfg: ExperimentConfig) -> RunOutput:
    """Normalized JaKoB curves (gain / I_ver) with Random and Oracle references."""
    out = RunOutput()
    sec = cfg.section("bounds")
    p, K = float(cfg.section("model")["p"]), cfg.K
    c = float(sec["c"])
    B = np.arange(1, int(sec["B_max"]) + 1)
    jk = [float(x) for x in sec["jk"]]
    curves = [jakob_curve(InfoParams(p, v / K, 1.0), K, B, c) for v in jk]
    columns = [("B", CONFIG), ("random", CLOSED_FORM), ("oracle", CLOSED_FORM)]
    columns += [(f"jakob_JK{fmt(v)}", CLOSED_FORM) for v in jk]
    rows = [[int(b), p * b, int(b)] + [cv[k] for cv in curves] for k, b in enumerate(B)]
    write_table(cfg, "bounds_curve", columns, rows, out, extra={"c": c, "p": p})
    brk = [[fmt(v), jakob_breakpoint(InfoParams(p, v / K, 1.0), K, c)] for v in jk]
    write_table(cfg, "bounds_breakpoints", [("JK", CONFIG), ("B_star", CLOSED_FORM)], brk, out)
    return out


def run_tails_curve(cfg: ExperimentConfig) -> RunOutput:
    """Tail leverage ``m_G(B/K)`` versus the oversampling ratio ``K/B``."""
    out = RunOutput()
    sec = cfg.section("tails")
    ratios = np.logspace(
        math.log10(float(sec["k_over_b_min"])), math.log10(float(sec["k_over_b_max"])), int(sec["points"])
    )
    notes = []
    nus = []
    for nu in sec["nu"]:
        nu = float(nu)
        if nu <= 3:
            notes.append(f"nu={fmt(nu)} replaced by {PARETO_NU_FLOOR}: closed forms need nu > 3")
            nu = PARETO_NU_FLOOR
        nus.append(nu)
    columns = [("K_over_B", CONFIG), ("gaussian_exact", CLOSED_FORM), ("gaussian_asymptotic", CLOSED_FORM)]
    for nu in nus:
        columns += [(f"pareto_exact_nu{fmt(nu)}", CLOSED_FORM), (f"pareto_asymptotic_nu{fmt(nu)}", CLOSED_FORM)]
    rows = []
    for r in ratios:
        a = 1.0 / r
        row = [r, tail_mean_gaussian_exact(a), tail_mean_gaussian_asymptotic(a)]
        for nu in nus:
            row += [tail_mean_pareto_exact(nu, a), tail_mean_pareto_asymptotic(nu, a)]
        rows.append(row)
    write_table(cfg, "tails_curve", columns, rows, out, extra={"notes": notes})
    return out


def run_benchmark_curve(cfg: ExperimentConfig) -> RunOutput:
    """Exact benchmark boundary over the budget grid, with its single-letter limit."""
    out = RunOutput()
    K, grid = cfg.K, cfg.B_grid
    channel = VerificationChannel(float(cfg.section("channel")["rho"]))
    columns = [
        ("B", CONFIG), ("alpha", CONFIG), ("expected_top_sum", EMPIRICAL), ("expected_top_sum_se", EMPIRICAL),
        ("risk_bits", EMPIRICAL), ("risk_se", EMPIRICAL), ("gain_bits", EMPIRICAL), ("gain_se", EMPIRICAL),
        ("single_letter_gain", QUADRATURE), ("random_gain", QUADRATURE),
    ]
    for i, s in enumerate(screening_strengths(cfg)):
        model = s["model"]
        pbar = prevalence(model)
        bench = expected_top_b_sums(model, K, grid, cfg.replications, derive_seed(cfg.seed, i, 1), cfg.threads)
        rows = []
        for B, (top, se) in zip(grid, bench):
            bd = boundary_from_top_sum(K, B, top, se, channel)
            sl = channel.I_ver * K * single_letter_top_fraction(model, B / K)
            rows.append([B, B / K, top, se, bd.risk_bits, bd.risk_se, bd.gain_bits, bd.gain_se, sl,
                         channel.I_ver * B * pbar])
        write_table(cfg, f"benchmark_{s['label']}", columns, rows, out,
                    extra={"epsilon": model.epsilon, "prevalence": pbar})
    return out


def run_simulate(cfg: ExperimentConfig) -> RunOutput:
    """Policy comparison: hits, identity gain, log-loss gain and the converse limits."""
    out = RunOutput()
    K, grid = cfg.K, cfg.B_grid
    channel = VerificationChannel(float(cfg.section("channel")["rho"]))
    policies = [Policy.parse(x) for x in cfg.section("simulate")["policies"]]
    columns = [
        ("policy", CONFIG), ("B", CONFIG), ("mean_hits", EMPIRICAL), ("se_hits", EMPIRICAL),
        ("mean_gain_bits", EMPIRICAL), ("se_gain_bits", EMPIRICAL), ("logloss_gain_bits", EMPIRICAL),
        ("logloss_se", EMPIRICAL), ("selected_hit_rate", EMPIRICAL), ("selected_hit_rate_se", EMPIRICAL),
        ("converse_gain", QUADRATURE), ("enrichment_bound", QUADRATURE),
    ]
    for i, s in enumerate(screening_strengths(cfg)):
        model = s["model"]
        params = info_params(model, channel)
        rows = []
        for pol in policies:
            sims = run_sweep(model, pol, K, grid, channel, cfg.replications,
                             derive_seed(cfg.seed, i, 0), cfg.threads, logloss=True)
            for sim in sims:
                budgets = Budgets(K, sim.B)
                conv = converse_gain(params, budgets)
                enr = enrichment_bound(params.p, params.J, budgets.alpha())
                gain = channel.I_ver * sim.mean_hits
                se_gain = channel.I_ver * sim.se_hits
                if gain > conv + 3 * se_gain:
                    out.violations.append(f"{s['label']} {pol.value} B={sim.B}: converse exceeded")
                rows.append([pol.value, sim.B, sim.mean_hits, sim.se_hits, gain, se_gain,
                             sim.mean_gain_bits, sim.se_gain_bits, sim.mean_selected_hit_rate,
                             sim.se_selected_hit_rate, conv, enr])
        write_table(cfg, f"simulate_{s['label']}", columns, rows, out,
                    extra={"epsilon": model.epsilon, "prevalence": params.p, "J_bits": params.J})
    return out


# --------------------------------------------------------------------------
# Invariant suite
# --------------------------------------------------------------------------


def _check(name, measured, reference, tolerance, passed, se=None, replications=None, detail=""):
    return {
        "name": name,
        "measured": float(measured),
        "reference": float(reference),
        "tolerance": float(tolerance),
        "se": None if se is None else float(se),
        "replications": replications,
        "passed": bool(passed),
        "detail": detail,
    }


def invariant_checks(seed: int, replications: int, scale: float, threads: int = 1) -> List[dict]:
    """Cross-module invariants at reduced scale.

    ``scale`` multiplies every SE-based and relative tolerance; ``scale = 0``
    is a negative control that must fail.
    """
    checks = []
    channel = VerificationChannel(0.1)
    K = 5000
    grid_alpha = (0.01, 0.1)
    B_grid = [int(a * K) for a in grid_alpha]
    idx = 0
    worst = {"converse": -math.inf, "enrichment": -math.inf, "random": 0.0, "identity": 0.0,
             "dominance": -math.inf, "gain_identity": 0.0}
    for p in (0.01, 0.05):
        for eps in (0.1, 0.5):
            model = ScreeningModel(p, eps)
            params = info_params(model, channel)
            s_top = run_sweep(model, Policy.TOP_B, K, B_grid, channel, replications,
                              derive_seed(seed, idx, 0), threads, logloss=True)
            s_rnd = run_sweep(model, Policy.RANDOM_B, K, B_grid, channel, replications,
                              derive_seed(seed, idx, 0), threads)
            s_orc = run_sweep(model, Policy.ORACLE_B, K, B_grid, channel, replications,
                              derive_seed(seed, idx, 0), threads)
            bench = expected_top_b_sums(model, K, B_grid, replications, derive_seed(seed, idx, 1), threads)
            idx += 1
            for top, rnd, orc, (eb, eb_se) in zip(s_top, s_rnd, s_orc, bench):
                budgets = Budgets(K, top.B)
                se_g = channel.I_ver * top.se_hits
                g = channel.I_ver * top.mean_hits
                worst["converse"] = max(worst["converse"], (g - converse_gain(params, budgets)) / se_g)
                bound = enrichment_bound(params.p, params.J, budgets.alpha())
                worst["enrichment"] = max(
                    worst["enrichment"], (top.mean_selected_hit_rate - bound) / top.se_selected_hit_rate)
                worst["random"] = max(
                    worst["random"], abs(rnd.mean_selected_hit_rate - params.p) / rnd.se_selected_hit_rate)
                worst["identity"] = max(
                    worst["identity"], abs(top.mean_hits - eb) / math.hypot(top.se_hits, eb_se))
                worst["dominance"] = max(
                    worst["dominance"],
                    (rnd.mean_hits - top.mean_hits) / math.hypot(rnd.se_hits, top.se_hits),
                    (top.mean_hits - orc.mean_hits) / math.hypot(orc.se_hits, top.se_hits),
                )
                diff = top.gains - channel.I_ver * top.hits
                se_d = diff.std(ddof=1) / math.sqrt(len(diff))
                worst["gain_identity"] = max(worst["gain_identity"], abs(diff.mean()) / se_d)
    reps = replications
    checks.append(_check("converse_not_violated", worst["converse"], 0.0, 3 * scale,
                         worst["converse"] <= 3 * scale, 1.0, reps, "max (gain - converse)/SE"))
    checks.append(_check("enrichment_bound", worst["enrichment"], 0.0, 3 * scale,
                         worst["enrichment"] <= 3 * scale, 1.0, reps, "max (hit rate - bound)/SE"))
    checks.append(_check("random_hit_rate", worst["random"], 0.0, 4 * scale,
                         worst["random"] <= 4 * scale, 1.0, reps, "max |hit rate - p|/SE"))
    checks.append(_check("hit_rate_identity", worst["identity"], 0.0, 3 * scale,
                         worst["identity"] <= 3 * scale, 1.0, reps, "max |hits - E top sum|/SE"))
    checks.append(_check("policy_dominance", worst["dominance"], 0.0, 2 * scale,
                         worst["dominance"] <= 2 * scale, 1.0, reps, "max ordering breach / SE"))
    checks.append(_check("gain_identity", worst["gain_identity"], 0.0, 3 * scale,
                         worst["gain_identity"] <= 3 * scale, 1.0, reps, "max |logloss - I_ver hits|/SE"))

    params = InfoParams(p=0.01, J=7e-5, I_ver=channel.I_ver)
    rt = 0.0
    for delta in np.logspace(-2, 1.5, 11):
        B = required_budget(params, 10_000, float(delta))
        g = converse_gain(params, Budgets.continuous(10_000, B))
        rt = max(rt, abs(g - delta) / delta)
    checks.append(_check("budget_round_trip", rt, 0.0, 1e-9 * scale, rt <= 1e-9 * scale,
                         detail="max relative error"))

    cg = max(achievability_constant(p, a, tail_mean_gaussian_exact(a))
             for p in (0.005, 0.01, 0.05, 0.5) for a in (1e-4, 1e-3, 0.01, 0.1, 0.5))
    checks.append(_check("c_G_below_converse_constant", cg, C_MAX, 0.0, cg <= C_MAX,
                         detail="max c_G over (p, alpha) grid"))

    m = ScreeningModel(0.01, 0.02)
    gap = abs(screening_information(m) / screening_information_weak(m) - 1.0)
    checks.append(_check("weak_information_gap", gap, 0.0, 0.01 * scale, gap <= 0.01 * scale,
                         detail="relative gap at epsilon=0.02, p=0.01"))

    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 999)))
    x = rng.standard_normal(1_000_000)
    emp, se = tail_mean_empirical(x, 100_000), tail_mean_empirical_se(x, 100_000)
    ex = tail_mean_gaussian_exact(0.1)
    checks.append(_check("gaussian_tail_mean", emp, ex, 4 * scale * se, abs(emp - ex) <= 4 * scale * se,
                         se, None, "top 10% of 1e6 normal draws"))
    return checks


def run_invariant_suite(cfg: ExperimentConfig) -> RunOutput:
    out = RunOutput()
    scale = float(cfg.section("check")["tolerance_scale"])
    checks = invariant_checks(cfg.seed, cfg.replications, scale, cfg.threads)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report = {"seed": cfg.seed, "tolerance_scale": scale, "replications": cfg.replications,
              "config_hash": cfg.config_hash(), "library_version": __version__,
              "passed": all(c["passed"] for c in checks), "checks": checks}
    path = cfg.out_dir / "check_report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    out.files.append(path)
    cols = [("name", CONFIG), ("measured", EMPIRICAL), ("reference", CONFIG), ("tolerance", CONFIG),
            ("se", EMPIRICAL), ("replications", CONFIG), ("passed", EMPIRICAL)]
    rows = [[c["name"], c["measured"], c["reference"], c["tolerance"],
             "" if c["se"] is None else c["se"], "" if c["replications"] is None else c["replications"],
             c["passed"]] for c in checks]
    write_table(cfg, "check_report", cols, rows, out)
    out.violations.extend(c["name"] for c in checks if not c["passed"])
    return out


RUNNERS: Dict[str, Callable[[ExperimentConfig], RunOutput]] = {
    "figure3": run_figure3,
    "bounds": run_bounds_curve,
    "tails": run_tails_curve,
    "benchmark": run_benchmark_curve,
    "simulate": run_simulate,
    "check": run_invariant_suite,
}


def run(cfg: ExperimentConfig) -> RunOutput:
    return RUNNERS[cfg.kind](cfg)
