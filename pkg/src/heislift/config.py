"""Run configuration: JSON schema, validation and boundary-data loading.

A config is one JSON object::

    {
      "m": 2, "n": 1,
      "omega": {"lo": [-1, -1], "hi": [1, 1]},
      "target": {"kind": "heisenberg"},          # or {"kind": "euclidean", "dim": d}
      "data": "boundary.csv",                     # relative to the config file
      "max_generation": 8,
      "eps_sing": 1e-6,
      "collar": null,                             # null: 2 sqrt(m) x finest cube side
      "analysis": {
        "checks": ["whitney", "complex", "skeleton", "trace", "sobolev",
                   "blowup", "contact", "domination"],
        "p_list": [1.0, 1.5, 1.9], "N": 20000, "seed": 0,
        "trace_N": 10000, "lines": 100, "phis": 10, "domination_N": 10000
      },
      "output": "out"
    }

Each CSV row holds ``m`` site coordinates followed by the target point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UnsupportedFill
from .targets import Euclidean, Heisenberg, TargetSpace

ALL_CHECKS = (
    "whitney",
    "complex",
    "skeleton",
    "trace",
    "sobolev",
    "blowup",
    "contact",
    "contact_absolute",
    "domination",
)
HEISENBERG_ONLY = ("contact", "contact_absolute", "domination")
DEFAULT_CHECKS = tuple(c for c in ALL_CHECKS if c != "contact_absolute")


class ConfigError(ValueError):
    """The config or its input files do not parse or validate."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class AnalysisPlan:
    checks: tuple = DEFAULT_CHECKS
    p_list: tuple = (1.0, 1.5, 1.9)
    N: int = 20000
    seed: int = 0
    trace_N: int = 10000
    lines: int = 100
    phis: int = 10
    domination_N: int = 10000
    contact_tolerance: float = 1e-3


@dataclass
class RunConfig:
    m: int
    n: int
    omega_lo: np.ndarray
    omega_hi: np.ndarray
    target: TargetSpace
    data_path: Path
    max_generation: int = 8
    eps_sing: float = 1e-6
    collar: float | None = None
    analysis: AnalysisPlan = field(default_factory=AnalysisPlan)
    output: Path = Path("out")
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        a = self.analysis
        return {
            "m": self.m,
            "n": self.n,
            "omega": {"lo": self.omega_lo.tolist(), "hi": self.omega_hi.tolist()},
            "target": self.target.to_json(),
            "data": self.data_path.name,
            "max_generation": self.max_generation,
            "eps_sing": self.eps_sing,
            "collar": self.collar,
            "analysis": {
                "checks": list(a.checks),
                "p_list": list(a.p_list),
                "N": a.N,
                "seed": a.seed,
                "trace_N": a.trace_N,
                "lines": a.lines,
                "phis": a.phis,
                "domination_N": a.domination_N,
                "contact_tolerance": a.contact_tolerance,
            },
        }


def _int(obj, key, errors, default=None, minimum=None):
    v = obj.get(key, default)
    if v is None or isinstance(v, bool) or not isinstance(v, int):
        errors.append(f"{key}: expected an integer, got {v!r}")
        return default
    if minimum is not None and v < minimum:
        errors.append(f"{key}: must be >= {minimum}, got {v}")
    return v


def _num(obj, key, errors, default=None):
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        errors.append(f"{key}: expected a finite number, got {v!r}")
        return default
    return float(v)


def parse_config(obj: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a decoded config; raises :class:`ConfigError` or :class:`UnsupportedFill`."""
    if not isinstance(obj, dict):
        raise ConfigError(["config must be a JSON object"])
    errors: list[str] = []
    warnings: list[str] = []
    m = _int(obj, "m", errors, minimum=1)
    n = _int(obj, "n", errors, minimum=1)
    omega = obj.get("omega", {})
    lo = np.asarray(omega.get("lo", []), dtype=float) if isinstance(omega, dict) else np.zeros(0)
    hi = np.asarray(omega.get("hi", []), dtype=float) if isinstance(omega, dict) else np.zeros(0)
    if m is not None and (lo.shape != (m,) or hi.shape != (m,)):
        errors.append(f"omega: lo and hi need {m} coordinates each")
    elif m is not None and not np.all(lo < hi):
        errors.append("omega: lo must be below hi in every coordinate")

    tobj = obj.get("target", {})
    kind = tobj.get("kind") if isinstance(tobj, dict) else None
    target: TargetSpace | None = None
    if kind == "heisenberg":
        dim = tobj.get("dim", n)
        if n is not None and dim != n:
            errors.append(f"target: Heisenberg dimension {dim!r} must equal n = {n}")
        elif n is not None:
            target = Heisenberg(n)
    elif kind == "euclidean":
        dim = tobj.get("dim")
        if isinstance(dim, int) and not isinstance(dim, bool) and dim >= 1:
            target = Euclidean(dim)
        else:
            errors.append(f"target: Euclidean dimension must be a positive integer, got {dim!r}")
    else:
        errors.append(f"target: unknown kind {kind!r}")

    data = obj.get("data")
    if not isinstance(data, str):
        errors.append("data: expected a CSV path")
    max_gen = _int(obj, "max_generation", errors, default=8, minimum=1)
    if max_gen is not None and max_gen > 40:
        errors.append("max_generation: at most 40")
    eps_sing = _num(obj, "eps_sing", errors, default=1e-6)
    if eps_sing is not None and not 0 < eps_sing < 1:
        errors.append("eps_sing: must lie in (0, 1)")
    collar = obj.get("collar")
    if collar is not None:
        collar = _num(obj, "collar", errors)
        if collar is not None and collar < 0:
            errors.append("collar: must be non-negative")

    aobj = obj.get("analysis", {})
    if not isinstance(aobj, dict):
        errors.append("analysis: expected an object")
        aobj = {}
    plan = AnalysisPlan()
    checks = aobj.get("checks", list(DEFAULT_CHECKS))
    if not isinstance(checks, list) or any(c not in ALL_CHECKS for c in checks):
        errors.append(f"analysis.checks: choose from {', '.join(ALL_CHECKS)}")
    else:
        plan.checks = tuple(c for c in ALL_CHECKS if c in checks)
    p_list = aobj.get("p_list", list(plan.p_list))
    if not isinstance(p_list, list) or not p_list or any(
        isinstance(p, bool) or not isinstance(p, (int, float)) for p in p_list
    ):
        errors.append("analysis.p_list: expected a non-empty list of numbers")
    else:
        plan.p_list = tuple(float(p) for p in p_list)
        if any(p < 1 for p in plan.p_list):
            errors.append("analysis.p_list: every p must be >= 1")
        if list(plan.p_list) != sorted(plan.p_list):
            errors.append("analysis.p_list: must be sorted ascending")
        if n is not None:
            for p in plan.p_list:
                if p >= n + 1:
                    warnings.append(f"p = {p:g} >= n + 1: the slope is not expected to be p-integrable")
    plan.N = _int(aobj, "N", errors, default=plan.N, minimum=10_000)
    plan.seed = _int(aobj, "seed", errors, default=plan.seed, minimum=0)
    plan.trace_N = _int(aobj, "trace_N", errors, default=plan.trace_N, minimum=1000)
    plan.lines = _int(aobj, "lines", errors, default=plan.lines, minimum=1)
    plan.phis = _int(aobj, "phis", errors, default=plan.phis, minimum=1)
    plan.domination_N = _int(aobj, "domination_N", errors, default=plan.domination_N, minimum=1)
    plan.contact_tolerance = _num(aobj, "contact_tolerance", errors, default=plan.contact_tolerance)

    output = obj.get("output", "out")
    if not isinstance(output, str):
        errors.append("output: expected a directory path")
        output = "out"
    if errors:
        raise ConfigError(errors)
    assert target is not None and m is not None and n is not None

    # Capability boundary: the Heisenberg oracle only fills 0-spheres.
    if target.max_fill_dim(m) < min(n, m) - 1:
        raise UnsupportedFill(target.kind, target.max_fill_dim(m) + 1)
    if not isinstance(target, Heisenberg):
        skipped = [c for c in plan.checks if c in HEISENBERG_ONLY]
        if skipped:
            warnings.append(f"checks {', '.join(skipped)} need a Heisenberg target and are skipped")
            plan.checks = tuple(c for c in plan.checks if c not in HEISENBERG_ONLY)

    return RunConfig(
        m=m,
        n=n,
        omega_lo=lo,
        omega_hi=hi,
        target=target,
        data_path=(base / data),
        max_generation=max_gen,
        eps_sing=eps_sing,
        collar=collar,
        analysis=plan,
        output=Path(output) if Path(output).is_absolute() else base / output,
        warnings=warnings,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return parse_config(obj, path.parent)


def load_boundary_csv(path, m: int, target: TargetSpace) -> tuple[np.ndarray, np.ndarray]:
    """Read ``(sites, values)``; blank lines and ``#`` comments are skipped."""
    width = m + target.point_dim
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if len(row) != width:
                    raise ConfigError([f"{path}:{lineno}: expected {width} columns, got {len(row)}"])
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ConfigError([f"{path}:{lineno}: {exc}"]) from exc
    except OSError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    if not rows:
        raise ConfigError([f"{path}: no boundary data"])
    arr = np.asarray(rows)
    if not np.all(np.isfinite(arr)):
        raise ConfigError([f"{path}: non-finite value"])
    return arr[:, :m], arr[:, m:]


def validate_inputs(cfg: RunConfig) -> list[str]:
    """Violations of the boundary data against the config (sites in omega, distinct)."""
    sites, _ = load_boundary_csv(cfg.data_path, cfg.m, cfg.target)
    out = []
    strictly = np.all((sites > cfg.omega_lo) & (sites < cfg.omega_hi), axis=1)
    for i in np.flatnonzero(~strictly):
        out.append(f"site {i} at {sites[i].tolist()} is not inside omega")
    _, first = np.unique(sites, axis=0, return_index=True)
    if len(first) != len(sites):
        out.append(f"{len(sites) - len(first)} duplicate site(s)")
    return out
