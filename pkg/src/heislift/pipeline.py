"""The batch pipeline: decomposition, complex, field, analysis suites, reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analyze, heis
from .config import RunConfig, load_boundary_csv, validate_inputs, ConfigError
from .extend import BoundaryData, ExtensionField, build_field
from .targets import Heisenberg
from .triangulate import SimplicialComplex, build_complex, quality_report, validate_complex
from .whitney import CompactSet, Decomposition, decompose, verify_whitney


def dumps(obj, compact: bool = False) -> str:
    """Canonical JSON text: sorted keys, no timestamps, trailing newline."""
    if compact:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


@dataclass
class Built:
    Z: CompactSet
    data: BoundaryData
    dec: Decomposition
    cx: SimplicialComplex
    field: ExtensionField


def build(cfg: RunConfig) -> Built:
    problems = validate_inputs(cfg)
    if problems:
        raise ConfigError(problems)
    sites, values = load_boundary_csv(cfg.data_path, cfg.m, cfg.target)
    Z = CompactSet(sites)
    data = BoundaryData(Z, values, cfg.target)
    dec = decompose(Z, cfg.omega_lo, cfg.omega_hi, cfg.max_generation)
    cx = build_complex(dec)
    F = build_field(dec, cx, data, cfg.n, cfg.eps_sing, cfg.collar)
    return Built(Z, data, dec, cx, F)


def skeleton_report(F: ExtensionField) -> dict:
    """Vertex witnesses, edge endpoints and per-edge Lipschitz constants, recomputed."""
    cx, sk, Z = F.cx, F.skeleton, F.data.Z
    brute = np.full(len(cx.vertices), np.inf)
    for z in Z.points:
        brute = np.minimum(brute, np.sqrt(np.sum((cx.vertices - z) ** 2, axis=1)))
    report = {
        "L_measured": F.L,
        "C_tilde_measured": F.C_tilde,
        "constants": sk.constants(),
        "vertex_edge_ratio_max": sk.table.edge_ratio_max,
        "witness_exact": bool(np.array_equal(brute, sk.table.dist)),
    }
    E = cx.simplices[1]
    top = sk.lipschitz.get(sk.n, np.zeros(0))
    report["lipschitz_le_C_L"] = bool(np.all(top <= F.C_tilde * F.L * (1 + 1e-12)))
    if isinstance(F.target, Heisenberg):
        start = np.concatenate([sk.path_verts[:, 0], sk.path_t[:, :1]], axis=1)
        end = np.concatenate([sk.path_verts[:, -1], sk.path_t[:, -1:]], axis=1)
        err = max(
            float(np.max(np.abs(start - sk.table.values[E[:, 0]]))),
            float(np.max(np.abs(end - sk.table.values[E[:, 1]]))),
        )
        elen = np.linalg.norm(cx.vertices[E[:, 1]] - cx.vertices[E[:, 0]], axis=1)
        dk = heis.koranyi_dist(sk.table.values[E[:, 0]], sk.table.values[E[:, 1]])
        ok = sk.lipschitz[1] <= heis.GAMMA_H * dk / elen * (1 + 1e-9) + 1e-12
        report["endpoint_error"] = err
        report["edge_bound_violations"] = int(np.sum(~ok))
    report["passed"] = bool(
        report["witness_exact"]
        and report["lipschitz_le_C_L"]
        and report.get("endpoint_error", 0.0) <= 1e-9
        and report.get("edge_bound_violations", 0) == 0
    )
    return report


def run_analysis(cfg: RunConfig, b: Built, jobs: int = 1) -> tuple[dict, dict]:
    """Run the enabled suites; returns ``(checks, reports)`` keyed by name."""
    plan = cfg.analysis
    F = b.field
    checks: dict = {}
    reports: dict = {}

    wh = verify_whitney(b.dec, b.Z)
    q = quality_report(b.cx, b.Z, corner_samples=200, seed=plan.seed)
    reports["whitney"] = wh
    reports["quality"] = q
    if "whitney" in plan.checks:
        checks["whitney"] = {
            "passed": bool(wh["passed"] and q["size_lower_violations"] == 0 and q["size_upper_violations"] == 0),
            "ratio_min": wh["ratio_min"],
            "ratio_max": wh["ratio_max"],
            "size_violations": q["size_lower_violations"] + q["size_upper_violations"],
        }
    if "complex" in plan.checks:
        viol = validate_complex(b.cx)
        checks["complex"] = {
            "passed": not viol and q["beta_le_B_le_diam"],
            "violations": len(viol),
            "similarity_classes": q["similarity_classes"],
            "D2_measured": q["D2_measured"],
        }
    sk = skeleton_report(F)
    reports["skeleton"] = sk
    if "skeleton" in plan.checks:
        checks["skeleton"] = {"passed": sk["passed"], "C_tilde_measured": sk["C_tilde_measured"]}
    if "trace" in plan.checks:
        tr = analyze.trace_check(F, plan.trace_N, plan.seed)
        reports["trace"] = tr.to_json()
        checks["trace"] = {"passed": tr.violations == 0, "max_ratio": tr.max_ratio, "bound": tr.bound}

    if "sobolev" in plan.checks or "blowup" in plan.checks:
        sampler = analyze.SlopeSampler(F, plan.seed, jobs=jobs)
        sweep = analyze.p_sweep(F, plan.p_list, plan.N, plan.seed, sampler=sampler)
        reports["p_sweep"] = sweep.to_json()
        reports["p_sweep_csv"] = sweep.to_csv()
        reports["slope_stability"] = analyze.slope_stability(F, 2000, plan.seed)
        below = [p for p in plan.p_list if p < cfg.n + 1]
        above = [p for p in plan.p_list if p >= cfg.n + 1]
        if "sobolev" in plan.checks:
            rows = []
            for p in below:
                r1 = analyze.lp_norm(F, p, plan.N, plan.seed, sampler=sampler)
                r4 = analyze.lp_norm(F, p, 4 * plan.N, plan.seed, sampler=sampler)
                change = abs(r4.mc_estimate - r1.mc_estimate)
                rows.append({
                    "p": p,
                    "estimate_N": r1.mc_estimate,
                    "estimate_4N": r4.mc_estimate,
                    "standard_error_N": r1.standard_error,
                    "change_in_se": change / r1.standard_error if r1.standard_error > 0 else 0.0,
                    "bound_ratio": r4.bound_ratio,
                    "passed": change <= 3 * r1.standard_error,
                })
            reports["sobolev"] = {"rows": rows, "estimator": analyze.ESTIMATOR}
            checks["sobolev"] = {"passed": all(r["passed"] for r in rows), "p": below}
        if "blowup" in plan.checks:
            if not above:
                checks["blowup"] = {"passed": True, "applicable": False}
            else:
                est = [r.mc_estimate for r in sweep.refinement]
                ref_p = 1.5 if 1.5 in below else (below[-1] if below else None)
                ref = analyze.lp_norm(F, ref_p, plan.N, plan.seed, sampler=sampler).mc_estimate if ref_p else 0.0
                increasing = all(b_ > a_ for a_, b_ in zip(est, est[1:]))
                checks["blowup"] = {
                    "passed": bool(increasing and est[-1] > 3 * ref),
                    "applicable": True,
                    "refinement": est,
                    "reference_p": ref_p,
                    "reference_estimate": ref,
                    "strictly_increasing": increasing,
                }

    if "contact" in plan.checks or "contact_absolute" in plan.checks:
        segs = analyze.random_segments(F, plan.lines, plan.seed)
        cr = analyze.contact_residual(F, segs, 1e-3 * b.dec.omega_diam)
        reports["contact"] = cr.to_json()
        if "contact" in plan.checks:
            checks["contact"] = {"passed": cr.median_half <= 0.75 * cr.median_h, "ratio_half": cr.ratio_half}
        if "contact_absolute" in plan.checks:
            limit = plan.contact_tolerance * F.L
            checks["contact_absolute"] = {"passed": cr.median_h <= limit, "median": cr.median_h, "limit": limit}
    if "domination" in plan.checks:
        dom = analyze.slope_domination_check(F, plan.phis, plan.domination_N, plan.seed)
        reports["domination"] = dom.to_json()
        checks["domination"] = {"passed": dom.violations == 0, "violation_rate": dom.violation_rate}
    return checks, reports


def write_bundle(out: Path, cfg: RunConfig, b: Built, checks: dict, reports: dict, config_echo: dict) -> dict:
    out = Path(out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    (out / "cubes.json").write_text(dumps(b.dec.to_json(), compact=True))
    (out / "complex.json").write_text(dumps(b.cx.to_json(), compact=True))
    (out / "field.json").write_text(dumps(_clean(b.field.to_json()), compact=True))
    (out / "quality.json").write_text(dumps(_clean(reports["quality"])))
    for name, rep in reports.items():
        if name == "quality":
            continue
        if name == "p_sweep_csv":
            (out / "reports" / "p_sweep.csv").write_text(rep)
        else:
            (out / "reports" / f"{name}.json").write_text(dumps(_clean(rep)))
    summary = {
        "passed": all(c["passed"] for c in checks.values()),
        "checks": checks,
        "warnings": list(cfg.warnings),
        "config": config_echo,
        "counts": {"sites": len(b.Z), "cubes": len(b.dec), "simplices": b.cx.counts()},
    }
    (out / "summary.json").write_text(dumps(_clean(summary)))
    return summary
