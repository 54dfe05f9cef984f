"""Monte-Carlo diagnostics of an :class:`~heislift.extend.ExtensionField`.

Every slope here is the finite-difference proxy ``g_hat``: the largest target
distance quotient over the probe directions.  It bounds the true pointwise
slope from below, and all reports say so.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import heis
from .errors import NoValidDirection
from .extend import COLLAR, REGULAR, SINGULAR, ExtensionField
from .targets import Heisenberg

CHUNK = 8192
H_REL = 1e-3
Q_DIRECTIONS = 8
ESTIMATOR = "g_hat: finite-difference lower bound of the pointwise slope"


def _unit_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _probe_dirs(m: int, rand: np.ndarray) -> np.ndarray:
    """``(n, 2m + 2q, m)`` directions: the signed axes, then the signed random ones."""
    eye = np.eye(m)
    axes = np.concatenate([eye, -eye])
    n = len(rand)
    return np.concatenate([np.broadcast_to(axes, (n, 2 * m, m)), rand, -rand], axis=1)


@dataclass
class SlopeBatch:
    x: np.ndarray
    g: np.ndarray
    flags: np.ndarray
    h: np.ndarray
    values: np.ndarray
    probe_values: np.ndarray | None = None
    probe_ok: np.ndarray | None = None
    no_direction: np.ndarray | None = None


def slopes(F: ExtensionField, x, rand_dirs, h_rel: float = H_REL, keep_probes: bool = False) -> SlopeBatch:
    """Vectorised ``g_hat`` at the rows of ``x``.

    Regular points use ``h = h_rel * diam(sigma)``.  Probes that leave omega or
    land in the collar or the singular set are skipped, since ``F`` changes
    regime there.  Collar and singular points get ``L (C + 4)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N, m = x.shape
    Y = F.target
    val0, fl0, info = F.evaluate_many(x, with_info=True)
    g = np.full(N, F.collar_slope)
    h = np.full(N, np.nan)
    reg = np.flatnonzero(fl0 == REGULAR)
    no_dir = np.zeros(N, dtype=bool)
    probe_vals = probe_ok = None
    if keep_probes:
        P = 2 * m + 2 * np.asarray(rand_dirs).shape[1]
        probe_vals = np.full((N, P, Y.point_dim), np.nan)
        probe_ok = np.zeros((N, P), dtype=bool)
    if len(reg) == 0:
        return SlopeBatch(x, g, fl0, h, val0, probe_vals, probe_ok, no_dir)

    hr = h_rel * info["diam"][reg]
    D = _probe_dirs(m, np.asarray(rand_dirs, dtype=float)[reg])
    P = D.shape[1]
    pts = (x[reg, None, :] + hr[:, None, None] * D).reshape(-1, m)
    inside = F.dec.in_omega(pts)
    far = np.repeat(info["dist"][reg] - hr >= F.collar, P)
    hint = np.repeat(info["sid"][reg], P)
    vals = np.full((len(pts), Y.point_dim), np.nan)
    flags = np.full(len(pts), COLLAR, dtype=np.int8)
    idx = np.flatnonzero(inside)
    vals[idx], flags[idx] = F.evaluate_many(pts[idx], hint=hint[idx], far=far[idx])
    ok = (flags == REGULAR).reshape(-1, P)
    vals = vals.reshape(-1, P, Y.point_dim)
    q = np.zeros((len(reg), P))
    base = np.repeat(val0[reg], P, axis=0)
    qv = Y.dist(np.where(ok.reshape(-1)[:, None], vals.reshape(-1, Y.point_dim), base), base)
    q = qv.reshape(-1, P) / hr[:, None]
    q = np.where(ok, q, -np.inf)
    gr = q.max(axis=1)
    none = ~np.isfinite(gr)
    g[reg] = np.where(none, F.collar_slope, gr)
    h[reg] = hr
    no_dir[reg] = none
    if keep_probes:
        probe_vals[reg] = vals
        probe_ok[reg] = ok
    return SlopeBatch(x, g, fl0, h, val0, probe_vals, probe_ok, no_dir)


@dataclass
class SlopeSample:
    x: list
    h: float
    g_hat: float
    flag: int


def slope_at(F: ExtensionField, x, h: float | None = None, q: int = Q_DIRECTIONS, seed: int = 0) -> SlopeSample:
    """``g_hat`` at a single point; ``h`` overrides the relative default."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng([seed, 5])
    rand = _unit_rows(rng.normal(size=(1, q, F.m)))
    if h is None:
        b = slopes(F, x[None], rand)
    else:
        _, _, info = F.evaluate_many(x[None], with_info=True)
        diam = info["diam"][0]
        h_rel = h / diam if np.isfinite(diam) else H_REL
        b = slopes(F, x[None], rand, h_rel=h_rel)
    if b.no_direction[0]:
        raise NoValidDirection(f"every probe from {x.tolist()} left the regular region")
    return SlopeSample(x.tolist(), float(b.h[0]), float(b.g[0]), int(b.flags[0]))


class SlopeSampler:
    """Uniform samples over omega with their ``g_hat``, generated in fixed chunks.

    Chunk ``k`` draws from ``default_rng([seed, 0, k])``, so the first ``N``
    samples are the same whatever the total requested or the thread count.
    """

    def __init__(self, F: ExtensionField, seed: int, q: int = Q_DIRECTIONS, h_rel: float = H_REL, jobs: int = 1):
        self.F = F
        self.seed = int(seed)
        self.q = q
        self.h_rel = h_rel
        self.jobs = max(1, int(jobs))
        self._chunks: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _draw(self, k: int):
        rng = np.random.default_rng([self.seed, 0, k])
        lo, hi = self.F.dec.omega_lo, self.F.dec.omega_hi
        x = lo + (hi - lo) * rng.random((CHUNK, self.F.m))
        rand = _unit_rows(rng.normal(size=(CHUNK, self.q, self.F.m)))
        return x, rand

    def _compute(self, k: int):
        x, rand = self._draw(k)
        b = slopes(self.F, x, rand, self.h_rel)
        return b.g, b.flags

    def take(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """``(g_hat, flags)`` of the first ``N`` samples."""
        need = [k for k in range(-(-N // CHUNK)) if k not in self._chunks]
        if need:
            if self.jobs > 1:
                with ThreadPoolExecutor(self.jobs) as pool:
                    results = list(pool.map(self._compute, need))
            else:
                results = [self._compute(k) for k in need]
            self._chunks.update(zip(need, results))
        ks = range(-(-N // CHUNK))
        g = np.concatenate([self._chunks[k][0] for k in ks])[:N]
        fl = np.concatenate([self._chunks[k][1] for k in ks])[:N]
        return g, fl


def slope_stability(F: ExtensionField, N: int, seed: int, tolerance: float = 0.2) -> dict:
    """Fraction of regular samples whose ``g_hat`` moves by less than ``tolerance`` when h halves."""
    rng = np.random.default_rng([seed, 6])
    x = F.dec.omega_lo + (F.dec.omega_hi - F.dec.omega_lo) * rng.random((N, F.m))
    rand = _unit_rows(rng.normal(size=(N, Q_DIRECTIONS, F.m)))
    a = slopes(F, x, rand, H_REL)
    b = slopes(F, x, rand, H_REL / 2)
    sel = (a.flags == REGULAR) & ~a.no_direction & ~b.no_direction & (a.g > 0)
    change = np.abs(b.g[sel] - a.g[sel]) / a.g[sel]
    return {
        "N": N,
        "seed": seed,
        "regular_nonzero": int(sel.sum()),
        "stable_fraction": float(np.mean(change < tolerance)) if sel.any() else 1.0,
        "tolerance": tolerance,
    }


@dataclass
class SobolevReport:
    p: float
    N: int
    seed: int
    mc_estimate: float
    standard_error: float
    bound_ratio: float
    L_measured: float
    omega_diam: float
    collar_fraction: float
    singular_fraction: float
    estimator: str = ESTIMATOR

    def to_json(self) -> dict:
        return asdict(self)


def _report(F: ExtensionField, g: np.ndarray, flags: np.ndarray, p: float, seed: int) -> SobolevReport:
    N = len(g)
    vol = F.dec.omega_volume
    gp = g**p
    mean = float(np.mean(gp))
    integral = vol * mean
    est = integral ** (1.0 / p)
    se_int = vol * float(np.std(gp, ddof=1)) / math.sqrt(N) if N > 1 else float("inf")
    # delta method for I -> I^(1/p)
    se = (est / (p * integral)) * se_int if integral > 0 else 0.0
    diam = F.dec.omega_diam
    denom = F.L * diam ** (F.m / p)
    return SobolevReport(
        p=float(p),
        N=N,
        seed=seed,
        mc_estimate=est,
        standard_error=se,
        bound_ratio=est / denom if denom > 0 else 0.0,
        L_measured=F.L,
        omega_diam=diam,
        collar_fraction=float(np.mean(flags == COLLAR)),
        singular_fraction=float(np.mean(flags == SINGULAR)),
    )


def lp_norm(F: ExtensionField, p: float, N: int, seed: int, jobs: int = 1, sampler: SlopeSampler | None = None) -> SobolevReport:
    """Monte-Carlo estimate of the L^p norm of ``g_hat`` over omega."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if N < 1:
        raise ValueError("N must be positive")
    sampler = sampler or SlopeSampler(F, seed, jobs=jobs)
    g, fl = sampler.take(N)
    return _report(F, g, fl, p, seed)


@dataclass
class PSweep:
    reports: list
    refinement: list
    refinement_p: float

    def to_json(self) -> dict:
        return {
            "reports": [r.to_json() for r in self.reports],
            "refinement": {"p": self.refinement_p, "reports": [r.to_json() for r in self.refinement]},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "estimate"])
        for r in self.reports:
            w.writerow([repr(r.p), repr(r.mc_estimate)])
        return buf.getvalue()


def p_sweep(
    F: ExtensionField,
    p_list,
    N: int,
    seed: int,
    jobs: int = 1,
    refine: tuple = (1, 4, 16),
    sampler: SlopeSampler | None = None,
) -> PSweep:
    """Reports per ``p`` plus estimates at ``N, 4N, 16N`` samples for the largest ``p``."""
    p_list = [float(p) for p in p_list]
    if p_list != sorted(p_list):
        raise ValueError("p_list must be sorted ascending")
    sampler = sampler or SlopeSampler(F, seed, jobs=jobs)
    reports = [lp_norm(F, p, N, seed, sampler=sampler) for p in p_list]
    ref = [lp_norm(F, p_list[-1], k * N, seed, sampler=sampler) for k in refine] if p_list else []
    return PSweep(reports, ref, p_list[-1] if p_list else float("nan"))


def random_segments(F: ExtensionField, count: int, seed: int) -> np.ndarray:
    """``(count, 2, m)`` segments between uniform points of omega."""
    rng = np.random.default_rng([seed, 1])
    lo, hi = F.dec.omega_lo, F.dec.omega_hi
    return lo + (hi - lo) * rng.random((count, 2, F.m))


def _segment_residual(F: ExtensionField, a, b, h: float) -> tuple[float, int]:
    length = float(np.linalg.norm(b - a))
    steps = max(1, math.ceil(length / h))
    _, vals, flags = F.eval_on_segment(a, b, steps)
    ok = (flags[:-1] == REGULAR) & (flags[1:] == REGULAR)
    n = (vals.shape[1] - 1) // 2
    p, q = vals[:-1], vals[1:]
    # straight-segment lift increment == midpoint rule for the contact form
    res = np.abs((q[:, -1] - p[:, -1]) - heis.lift_increment(p[:, :2 * n], q[:, :2 * n]))
    return float(np.sum(res[ok]) / length), int(np.sum(~ok))


@dataclass
class ContactReport:
    h: float
    lines: int
    median_h: float
    max_h: float
    median_half: float
    max_half: float
    ratio_half: float
    skipped_steps: int
    L_measured: float
    per_line_h: list = field(default_factory=list)
    per_line_half: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def contact_residual(F: ExtensionField, lines, h: float) -> ContactReport:
    """Integrated contact-form residual per unit length along segments at ``h`` and ``h/2``."""
    if not isinstance(F.target, Heisenberg):
        raise TypeError("contact residuals need a Heisenberg target")
    lines = np.asarray(lines, dtype=float)
    r1, r2, skipped = [], [], 0
    for a, b in lines:
        if np.array_equal(a, b):
            continue
        v1, s1 = _segment_residual(F, a, b, h)
        v2, s2 = _segment_residual(F, a, b, h / 2)
        r1.append(v1)
        r2.append(v2)
        skipped += s1 + s2
    med1 = float(np.median(r1)) if r1 else 0.0
    med2 = float(np.median(r2)) if r2 else 0.0
    return ContactReport(
        h=h,
        lines=len(r1),
        median_h=med1,
        max_h=float(max(r1, default=0.0)),
        median_half=med2,
        max_half=float(max(r2, default=0.0)),
        ratio_half=med2 / med1 if med1 > 0 else 0.0,
        skipped_steps=skipped,
        L_measured=F.L,
        per_line_h=r1,
        per_line_half=r2,
    )


@dataclass
class TraceReport:
    N: int
    seed: int
    max_ratio: float
    bound: float
    violations: int
    collar: float

    def to_json(self) -> dict:
        return asdict(self)


def trace_points(F: ExtensionField, N: int, seed: int) -> np.ndarray:
    """Points of omega at distance in ``[collar, 10 collar]`` from Z."""
    rng = np.random.default_rng([seed, 2])
    Z = F.data.Z.points
    r0 = F.collar if F.collar > 0 else 1e-3 * F.dec.omega_diam
    out = np.empty((0, F.m))
    while len(out) < N:
        k = 2 * (N - len(out)) + 16
        i = rng.integers(0, len(Z), size=k)
        u = _unit_rows(rng.normal(size=(k, F.m)))
        r = rng.uniform(r0, 10 * r0, size=k)
        x = Z[i] + r[:, None] * u
        x = x[F.dec.in_omega(x)]
        # another site may be nearer than the one sampled around
        d, _ = F.data.Z.nearest(x)
        out = np.concatenate([out, x[d >= r0]])
    return out[:N]


def trace_check(F: ExtensionField, N: int, seed: int) -> TraceReport:
    x = trace_points(F, N, seed)
    vals, _ = F.evaluate_many(x)
    d, site = F.data.Z.nearest(x)
    ratio = F.target.dist(vals, F.data.values[site]) / d
    bound = F.collar_slope
    return TraceReport(N, seed, float(ratio.max()), bound, int(np.sum(ratio > bound)), F.collar)


@dataclass
class DominationReport:
    N: int
    seed: int
    phis: int
    tolerance: float
    checked: int
    violations: int
    violation_rate: float
    max_ratio: float

    def to_json(self) -> dict:
        return asdict(self)


def slope_domination_check(F: ExtensionField, n_phi: int, N: int, seed: int, tolerance: float = 0.05) -> DominationReport:
    """Axis difference quotients of ``d_K(F(.), p_i)`` against ``g_hat`` at regular points."""
    if not isinstance(F.target, Heisenberg):
        raise TypeError("slope domination needs a Heisenberg target")
    rng = np.random.default_rng([seed, 3])
    vals = F.data.values
    lo, hi = vals.min(axis=0), vals.max(axis=0)
    pad = 0.5 * (hi - lo) + 1.0
    phis = rng.uniform(lo - pad, hi + pad, size=(n_phi, vals.shape[1]))
    m = F.m
    gs, hs, v0s, pvs, oks = [], [], [], [], []
    total = 0
    k = 0
    while total < N:
        sub = np.random.default_rng([seed, 4, k])
        x = F.dec.omega_lo + (F.dec.omega_hi - F.dec.omega_lo) * sub.random((CHUNK, m))
        rand = _unit_rows(sub.normal(size=(CHUNK, Q_DIRECTIONS, m)))
        b = slopes(F, x, rand, keep_probes=True)
        sel = np.flatnonzero((b.flags == REGULAR) & ~b.no_direction)[: N - total]
        gs.append(b.g[sel])
        hs.append(b.h[sel])
        v0s.append(b.values[sel])
        pvs.append(b.probe_values[sel, : 2 * m])
        oks.append(b.probe_ok[sel, : 2 * m])
        total += len(sel)
        k += 1
    g, h, v0 = np.concatenate(gs), np.concatenate(hs), np.concatenate(v0s)
    pv, ok = np.concatenate(pvs), np.concatenate(oks)
    pv = np.where(ok[..., None], pv, v0[:, None, :])
    bad = checked = 0
    worst = 0.0
    for phi in phis:
        dphi = np.abs(heis.koranyi_dist(pv, phi) - heis.koranyi_dist(v0, phi)[:, None]) / h[:, None]
        bad += int(np.sum(ok & (dphi > (1.0 + tolerance) * g[:, None])))
        checked += int(np.sum(ok))
        pos = ok & (g[:, None] > 0)
        if np.any(pos):
            worst = max(worst, float(np.max(dphi[pos] / np.broadcast_to(g[:, None], dphi.shape)[pos])))
    return DominationReport(N, seed, n_phi, tolerance, checked, bad, bad / checked if checked else 0.0, worst)
