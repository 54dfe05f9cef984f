"""Point-cloud compact sets and dyadic Whitney decompositions of their complement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

_CHUNK = 4096


class CompactSet:
    """A finite point cloud ``Z`` with exact nearest-site queries.

    Ties between equidistant sites are broken by the lowest site index.
    """

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("a compact set needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("site coordinates must be finite")
        pts.setflags(write=False)
        self.points = pts
        self.tree = cKDTree(pts)

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def nearest(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(distance, site index)`` for each row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k = min(len(self.points), 8)
        _, cand = self.tree.query(x, k=k)
        cand = np.asarray(cand).reshape(len(x), k)
        # Exact distances on the candidates; stable argmin gives the lowest index.
        order = np.argsort(cand, axis=1, kind="stable")
        cand = np.take_along_axis(cand, order, axis=1)
        d2 = np.sum((self.points[cand] - x[:, None, :]) ** 2, axis=2)
        j = np.argmin(d2, axis=1)
        rows = np.arange(len(x))
        return np.sqrt(d2[rows, j]), cand[rows, j]

    def distance(self, x) -> np.ndarray:
        return self.nearest(x)[0]

    def box_distance(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Exact ``min_i dist(z_i, box)`` for boxes ``[lo, hi]`` given row-wise."""
        lo = np.atleast_2d(lo)
        hi = np.atleast_2d(hi)
        out = np.empty(len(lo))
        for s in range(0, len(lo), _CHUNK):
            l = lo[s:s + _CHUNK, None, :]
            h = hi[s:s + _CHUNK, None, :]
            gap = np.maximum(np.maximum(l - self.points[None], self.points[None] - h), 0.0)
            out[s:s + _CHUNK] = np.sqrt(np.min(np.sum(gap * gap, axis=2), axis=1))
        return out


@dataclass(frozen=True, order=True)
class WhitneyCube:
    """A dyadic cube of the root grid: ``generation`` and integer ``lattice``."""

    generation: int
    lattice: tuple[int, ...]


@dataclass
class Decomposition:
    """Accepted Whitney cubes inside a dyadic root cube.

    ``gen`` and ``lattice`` hold the accepted cubes in canonical
    ``(generation, lattice)`` order; ``unresolved`` the cubes that still
    failed the acceptance test at ``max_generation``.
    """

    root_lo: np.ndarray
    root_side: float
    omega_lo: np.ndarray
    omega_hi: np.ndarray
    max_generation: int
    gen: np.ndarray
    lattice: np.ndarray
    unresolved_gen: np.ndarray
    unresolved_lattice: np.ndarray
    _lookup: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return len(self.root_lo)

    def __len__(self) -> int:
        return len(self.gen)

    @property
    def cubes(self) -> list[WhitneyCube]:
        return [WhitneyCube(int(g), tuple(int(v) for v in l)) for g, l in zip(self.gen, self.lattice)]

    @property
    def unresolved(self) -> list[WhitneyCube]:
        return [
            WhitneyCube(int(g), tuple(int(v) for v in l))
            for g, l in zip(self.unresolved_gen, self.unresolved_lattice)
        ]

    def side(self, gen) -> np.ndarray:
        return self.root_side / np.exp2(gen)

    def bounds(self, gen=None, lattice=None) -> tuple[np.ndarray, np.ndarray]:
        gen = self.gen if gen is None else np.asarray(gen)
        lattice = self.lattice if lattice is None else np.asarray(lattice)
        s = self.side(gen)[:, None]
        lo = self.root_lo + lattice * s
        return lo, lo + s

    def diam(self, gen=None) -> np.ndarray:
        gen = self.gen if gen is None else np.asarray(gen)
        return self.side(gen) * math.sqrt(self.m)

    @property
    def omega_diam(self) -> float:
        return float(np.linalg.norm(self.omega_hi - self.omega_lo))

    @property
    def omega_volume(self) -> float:
        return float(np.prod(self.omega_hi - self.omega_lo))

    def in_omega(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.omega_lo) & (x <= self.omega_hi), axis=1)

    def _key_tables(self) -> dict:
        if not self._lookup:
            for g in np.unique(self.gen):
                sel = np.flatnonzero(self.gen == g)
                keys = _encode(self.lattice[sel], int(g))
                order = np.argsort(keys)
                self._lookup[int(g)] = (keys[order], sel[order])
        return self._lookup

    def find_cube(self, x) -> np.ndarray:
        """Index of the accepted cube containing each point (half-open), or -1."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), -1, dtype=np.int64)
        rel = (x - self.root_lo) / self.root_side
        inside = np.all((rel >= 0.0) & (rel < 1.0), axis=1)
        for g, (keys, ids) in self._key_tables().items():
            todo = np.flatnonzero(inside & (out < 0))
            if len(todo) == 0:
                break
            lat = np.floor(rel[todo] * (1 << g)).astype(np.int64)
            k = _encode(lat, g)
            pos = np.clip(np.searchsorted(keys, k), 0, len(keys) - 1)
            hit = keys[pos] == k
            out[todo[hit]] = ids[pos[hit]]
        return out

    def find_cube_closed(self, x) -> np.ndarray:
        """Like :meth:`find_cube` but also catches points on upper cube faces."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self.find_cube(x)
        miss = np.flatnonzero(out < 0)
        if len(miss):
            eps = self.root_side * 2.0 ** -40
            for shift in product((0.0, -eps), repeat=self.m):
                if not np.any(shift):
                    continue
                sub = miss[out[miss] < 0]
                if len(sub) == 0:
                    break
                out[sub] = self.find_cube(x[sub] + np.asarray(shift))
        return out

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "root_lo": self.root_lo.tolist(),
            "root_side": self.root_side,
            "omega": [self.omega_lo.tolist(), self.omega_hi.tolist()],
            "max_generation": self.max_generation,
            "cubes": [
                {"generation": int(g), "lattice": l.tolist(), "side": float(self.side(g))}
                for g, l in zip(self.gen, self.lattice)
            ],
            "unresolved": [
                {"generation": int(g), "lattice": l.tolist()}
                for g, l in zip(self.unresolved_gen, self.unresolved_lattice)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Decomposition":
        m = int(obj["m"])
        cubes = obj["cubes"]
        unres = obj["unresolved"]
        return cls(
            root_lo=np.asarray(obj["root_lo"], dtype=float),
            root_side=float(obj["root_side"]),
            omega_lo=np.asarray(obj["omega"][0], dtype=float),
            omega_hi=np.asarray(obj["omega"][1], dtype=float),
            max_generation=int(obj["max_generation"]),
            gen=np.array([c["generation"] for c in cubes], dtype=np.int64),
            lattice=np.array([c["lattice"] for c in cubes], dtype=np.int64).reshape(-1, m),
            unresolved_gen=np.array([c["generation"] for c in unres], dtype=np.int64),
            unresolved_lattice=np.array([c["lattice"] for c in unres], dtype=np.int64).reshape(-1, m),
        )


def _encode(lattice: np.ndarray, g: int) -> np.ndarray:
    """Row-major integer key of lattice coordinates at generation ``g``."""
    key = np.zeros(len(lattice), dtype=np.int64)
    for i in range(lattice.shape[1]):
        key = (key << g) | lattice[:, i].astype(np.int64)
    return key


def root_cube(omega_lo, omega_hi) -> tuple[np.ndarray, float]:
    """Power-of-two cube centred on omega, leaving at least 1/8 of its side free on each side."""
    lo = np.asarray(omega_lo, dtype=float)
    hi = np.asarray(omega_hi, dtype=float)
    extent = float(np.max(hi - lo))
    side = 2.0 ** math.ceil(math.log2(extent * 4.0 / 3.0))
    center = 0.5 * (lo + hi)
    return center - 0.5 * side, side


def decompose(Z: CompactSet, omega_lo, omega_hi, max_generation: int) -> Decomposition:
    """Dyadic Whitney cubes of the complement of ``Z`` meeting the box omega.

    A cube is accepted as soon as ``diam(Q) <= d(Q, Z)``; its parent then
    failed the test, which gives ``d(Q, Z) <= 4 diam(Q)``.  Only cubes whose
    interior meets omega are subdivided or kept.
    """
    omega_lo = np.asarray(omega_lo, dtype=float)
    omega_hi = np.asarray(omega_hi, dtype=float)
    m = Z.m
    if omega_lo.shape != (m,) or omega_hi.shape != (m,):
        raise ValueError("omega must be a box in the same dimension as Z")
    if np.any(omega_hi <= omega_lo):
        raise ValueError("omega must have positive extent")
    if max_generation < 0:
        raise ValueError("max_generation must be non-negative")
    pts = Z.points
    outside = np.any((pts <= omega_lo) | (pts >= omega_hi), axis=1)
    if np.any(outside):
        raise ValueError(f"site {int(np.argmax(outside))} is not in the interior of omega")

    root_lo, root_side = root_cube(omega_lo, omega_hi)
    children = np.array(list(product((0, 1), repeat=m)), dtype=np.int64)

    acc_gen, acc_lat, un_gen, un_lat = [], [], [], []
    active = np.zeros((1, m), dtype=np.int64)
    for g in range(max_generation + 1):
        side = root_side / 2.0**g
        lo = root_lo + active * side
        hi = lo + side
        d = Z.box_distance(lo, hi)
        ok = side * side * m <= d * d
        acc_gen.append(np.full(int(ok.sum()), g))
        acc_lat.append(active[ok])
        fail = active[~ok]
        if g == max_generation:
            un_gen.append(np.full(len(fail), g))
            un_lat.append(fail)
            break
        kids = (2 * fail[:, None, :] + children[None]).reshape(-1, m)
        klo = root_lo + kids * (side / 2)
        khi = klo + side / 2
        meets = np.all((khi > omega_lo) & (klo < omega_hi), axis=1)
        active = kids[meets]
        if len(active) == 0:
            break

    gen = np.concatenate(acc_gen).astype(np.int64) if acc_gen else np.zeros(0, np.int64)
    lat = np.concatenate(acc_lat).reshape(-1, m) if acc_lat else np.zeros((0, m), np.int64)
    ugen = np.concatenate(un_gen).astype(np.int64) if un_gen else np.zeros(0, np.int64)
    ulat = np.concatenate(un_lat).reshape(-1, m) if un_lat else np.zeros((0, m), np.int64)
    gen, lat = _canonical(gen, lat)
    ugen, ulat = _canonical(ugen, ulat)
    return Decomposition(root_lo, root_side, omega_lo, omega_hi, max_generation, gen, lat, ugen, ulat)


def _canonical(gen: np.ndarray, lat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(gen) == 0:
        return gen, lat
    order = np.lexsort(tuple(lat[:, i] for i in range(lat.shape[1] - 1, -1, -1)) + (gen,))
    return gen[order], lat[order]


def touching_pairs(dec: Decomposition) -> np.ndarray:
    """All pairs ``(i, j)`` of distinct accepted cubes that intersect.

    Any cube touching ``Q`` that is at least as large as ``Q`` contains one of
    the same-size neighbour cells of ``Q``; finer touching cubes are found from
    their own side.
    """
    m = dec.m
    tables = dec._key_tables()
    offsets = np.array([o for o in product((-1, 0, 1), repeat=m) if any(o)], dtype=np.int64)
    pairs = []
    for g in np.unique(dec.gen):
        g = int(g)
        sel = np.flatnonzero(dec.gen == g)
        for off in offsets:
            nb = dec.lattice[sel] + off
            valid = np.all((nb >= 0) & (nb < (1 << g)), axis=1)
            src, nb = sel[valid], nb[valid]
            for h in range(g, -1, -1):
                if h not in tables:
                    continue
                keys, ids = tables[h]
                anc = nb >> (g - h)
                k = _encode(anc, h)
                pos = np.clip(np.searchsorted(keys, k), 0, len(keys) - 1)
                hit = keys[pos] == k
                if np.any(hit):
                    pairs.append(np.stack([src[hit], ids[pos[hit]]], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    p = np.concatenate(pairs)
    p = np.sort(p, axis=1)
    return np.unique(p, axis=0)


def verify_whitney(dec: Decomposition, Z: CompactSet) -> dict:
    """Measured Whitney constants of a decomposition.

    ``ratio_min``/``ratio_max`` are the extremes of ``d(Q,Z)/diam(Q)``; the
    neighbour count includes every distinct cube meeting ``Q``.
    """
    m = dec.m
    if len(dec) == 0:
        return {
            "cubes": 0, "unresolved": len(dec.unresolved_gen), "ratio_min": None,
            "ratio_max": None, "max_neighbors": 0, "neighbor_bound": 12**m,
            "max_generation_jump": 0, "passed": True,
        }
    lo, hi = dec.bounds()
    d = Z.box_distance(lo, hi)
    diam = dec.diam()
    ratio = d / diam
    pairs = touching_pairs(dec)
    deg = np.bincount(pairs.ravel(), minlength=len(dec)) if len(pairs) else np.zeros(len(dec), int)
    jump = int(np.max(np.abs(dec.gen[pairs[:, 0]] - dec.gen[pairs[:, 1]]))) if len(pairs) else 0
    slack = 1e-12
    report = {
        "cubes": int(len(dec)),
        "unresolved": int(len(dec.unresolved_gen)),
        "ratio_min": float(ratio.min()),
        "ratio_max": float(ratio.max()),
        "max_neighbors": int(deg.max()),
        "neighbor_bound": int(12**m),
        "max_generation_jump": jump,
        "generations": [int(dec.gen.min()), int(dec.gen.max())],
    }
    report["passed"] = bool(
        report["ratio_min"] >= 1.0 - slack
        and report["ratio_max"] <= 4.0 + slack
        and report["max_neighbors"] <= 12**m
        and jump <= 1
    )
    return report
