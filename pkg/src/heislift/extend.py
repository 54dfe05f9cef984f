"""Extension of boundary data over the Whitney triangulation.

Vertices take the value at a nearest site, the n-skeleton is filled cell by
cell through the target oracle, and every m-simplex is pushed onto its
n-skeleton by iterated radial projections from face barycentres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import heis
from .errors import NotCovered, SingularProximity, UnsupportedFill
from .targets import (
    AffineCell,
    CellMap,
    EdgePathCell,
    Euclidean,
    Heisenberg,
    TargetSpace,
    affine_lipschitz_batch,
)
from .triangulate import SimplicialComplex, _row_keys
from .whitney import CompactSet, Decomposition

REGULAR, COLLAR, SINGULAR = 0, 1, 2


@dataclass
class BoundaryData:
    """Sites of ``Z`` with their target values."""

    Z: CompactSet
    values: np.ndarray
    target: TargetSpace
    L_measured: float = field(init=False)

    def __post_init__(self) -> None:
        vals = self.target.check_points(np.atleast_2d(np.asarray(self.values, dtype=float)))
        if len(vals) != len(self.Z):
            raise ValueError("one value per site is required")
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary values must be finite")
        vals.setflags(write=False)
        self.values = vals
        self.L_measured = lipschitz_constant(self.Z.points, vals, self.target)

    def dilated(self, lam: float) -> "BoundaryData":
        return BoundaryData(self.Z, self.target.dilate(self.values, lam), self.target)


def lipschitz_constant(points: np.ndarray, values: np.ndarray, Y: TargetSpace) -> float:
    """max over site pairs of dist(f(z_i), f(z_j)) / |z_i - z_j|."""
    N = len(points)
    if N < 2:
        return 0.0
    best = 0.0
    for i in range(N - 1):
        dz = np.linalg.norm(points[i + 1:] - points[i], axis=1)
        dy = Y.dist(values[i + 1:], values[i])
        best = max(best, float(np.max(dy / dz)))
    return best


@dataclass
class VertexTable:
    site: np.ndarray
    dist: np.ndarray
    values: np.ndarray
    edge_ratio_max: float


def assign_vertices(cx: SimplicialComplex, data: BoundaryData) -> VertexTable:
    """Nearest site (lowest index on ties) and its value for every vertex."""
    if len(data.Z) == 0:
        raise ValueError("empty site set")
    d, site = data.Z.nearest(cx.vertices)
    vals = data.values[site]
    E = cx.simplices[1]
    ratio = 0.0
    if len(E):
        elen = np.linalg.norm(cx.vertices[E[:, 0]] - cx.vertices[E[:, 1]], axis=1)
        ratio = float(np.max(data.target.dist(vals[E[:, 0]], vals[E[:, 1]]) / elen))
    return VertexTable(site, d, vals, ratio)


@dataclass
class SkeletonMap:
    """The extension on the n-skeleton.

    For Heisenberg targets (n = 1) every edge carries a horizontal path stored
    in padded arrays (``path_verts`` is ``(E, 6, 2n)``).  For Euclidean targets
    the cell maps are affine in the vertex values.  ``lipschitz[k]`` holds the
    recorded constant of every k-simplex map.
    """

    cx: SimplicialComplex
    table: VertexTable
    target: TargetSpace
    n: int
    L: float
    lipschitz: dict
    path_verts: np.ndarray | None = None
    path_t: np.ndarray | None = None
    path_cum: np.ndarray | None = None
    _keys: dict = field(default_factory=dict, repr=False)

    @property
    def C_tilde(self) -> float:
        top = self.lipschitz.get(self.n)
        if top is None or len(top) == 0 or self.L == 0:
            return 0.0
        return float(np.max(top) / self.L)

    def constants(self) -> dict:
        out = {}
        for k, lip in sorted(self.lipschitz.items()):
            out[f"C_{k}"] = float(np.max(lip) / self.L) if self.L > 0 and len(lip) else 0.0
        return out

    def face_index(self, k: int, rows: np.ndarray) -> np.ndarray:
        """Index into ``cx.simplices[k]`` of sorted vertex rows (``-1`` if absent)."""
        if k not in self._keys:
            S = self.cx.simplices[k]
            keys = _row_keys(S, len(self.cx.vertices))
            if keys is None:
                self._keys[k] = ("dict", {tuple(r): i for i, r in enumerate(S.tolist())})
            else:
                order = np.argsort(keys)
                self._keys[k] = ("sorted", keys[order], order)
        entry = self._keys[k]
        if entry[0] == "dict":
            return np.array([entry[1].get(tuple(r), -1) for r in rows.tolist()], dtype=np.int64)
        keys = _row_keys(rows, len(self.cx.vertices))
        pos = np.clip(np.searchsorted(entry[1], keys), 0, len(entry[1]) - 1)
        return np.where(entry[1][pos] == keys, entry[2][pos], -1)

    def cell_map(self, k: int, idx: int) -> CellMap:
        rows = self.cx.simplices[k][idx]
        verts = self.cx.vertices[rows]
        lip = float(self.lipschitz[k][idx]) if k in self.lipschitz else 0.0
        if isinstance(self.target, Heisenberg):
            if k != 1:
                raise UnsupportedFill(self.target.kind, k - 1)
            return EdgePathCell(verts, self.edge_path(idx), lip)
        return AffineCell(verts, self.table.values[rows], lip)

    def edge_path(self, e: int) -> heis.HorizontalPath:
        v = self.path_verts[e]
        keep = [0] + [i for i in range(1, len(v)) if np.any(v[i] != v[i - 1])]
        return heis.HorizontalPath(v[keep], float(self.path_t[e, 0]))

    def evaluate_faces(self, face_idx: np.ndarray, bary: np.ndarray) -> np.ndarray:
        """Values of the n-cell maps at barycentric coordinates (vectorised)."""
        if isinstance(self.target, Heisenberg):
            return _eval_paths(self.path_verts, self.path_t, self.path_cum, face_idx, bary[:, 1])
        V = self.table.values[self.cx.simplices[self.n][face_idx]]
        return V[:, 0] + np.einsum("ni,nid->nd", bary[:, 1:], V[:, 1:] - V[:, :1])


def _eval_paths(verts, lifted, cum, e, s):
    total = cum[e, -1]
    tau = np.clip(s, 0.0, 1.0) * total
    idx = np.sum(cum[e, 1:-1] <= tau[:, None], axis=1)
    a = verts[e, idx]
    b = verts[e, idx + 1]
    seg = cum[e, idx + 1] - cum[e, idx]
    frac = np.where(seg > 0, (tau - cum[e, idx]) / np.where(seg > 0, seg, 1.0), 0.0)
    planar = a + frac[:, None] * (b - a)
    t = lifted[e, idx] + heis.lift_increment(a, planar)
    return np.concatenate([planar, t[:, None]], axis=1)


def extend_skeleton(cx: SimplicialComplex, table: VertexTable, Y: TargetSpace, n: int, L: float) -> SkeletonMap:
    """Fill the k-skeleta for k = 1..n (capped at m) through the target oracle."""
    top = min(n, cx.m)
    if top - 1 > Y.max_fill_dim(cx.m):
        raise UnsupportedFill(Y.kind, Y.max_fill_dim(cx.m) + 1)
    lip = {}
    sk = SkeletonMap(cx, table, Y, top, L, lip)
    if isinstance(Y, Heisenberg):
        E = cx.simplices[1]
        verts, t0 = heis.connect_batch(table.values[E[:, 0]], table.values[E[:, 1]])
        lifted = heis.batch_lift(verts, t0)
        seg = np.linalg.norm(np.diff(verts, axis=1), axis=2)
        cum = np.concatenate([np.zeros((len(E), 1)), np.cumsum(seg, axis=1)], axis=1)
        elen = np.linalg.norm(cx.vertices[E[:, 1]] - cx.vertices[E[:, 0]], axis=1)
        lip[1] = cum[:, -1] / elen
        sk.path_verts, sk.path_t, sk.path_cum = verts, lifted, cum
    else:
        for k in range(1, top + 1):
            S = cx.simplices[k]
            lip[k] = affine_lipschitz_batch(cx.vertices[S], table.values[S])
    return sk


def _slots_drop(arr: np.ndarray, drop: np.ndarray) -> np.ndarray:
    N, w = arr.shape[:2]
    keep = np.ones((N, w), dtype=bool)
    keep[np.arange(N), drop] = False
    return arr[keep].reshape((N, w - 1) + arr.shape[2:])


def radial_project_many(cx: SimplicialComplex, sid: np.ndarray, bary: np.ndarray, n: int, eps_sing: float):
    """Iterated radial projection of points of m-simplices onto their n-skeleton.

    Returns ``(rows, lam, singular, slope, stage_dist)``: vertex rows of the
    n-face reached, barycentric coordinates in that face, a mask of points
    that came within ``eps_sing * diam`` of a stage centre, the product of the
    per-stage factors ``diam / |x - c|`` and the smallest relative distance
    ``|x - c| / diam`` met along the way.
    """
    m = cx.m
    rows = cx.simplices[m][sid]
    lam = np.clip(bary, 0.0, None)
    lam = lam / lam.sum(axis=1, keepdims=True)
    N = len(sid)
    singular = np.zeros(N, dtype=bool)
    slope = np.ones(N)
    stage_dist = np.full(N, np.inf)
    if n >= m:
        return rows, lam, singular, slope, stage_dist
    P = cx.vertices[rows]
    diam = np.zeros(N)
    for i, j in combinations(range(m + 1), 2):
        diam = np.maximum(diam, np.linalg.norm(P[:, i] - P[:, j], axis=1))
    for j in range(m, n, -1):
        w = j + 1
        x = np.einsum("ni,nid->nd", lam, P)
        c = P.mean(axis=1)
        dist = np.linalg.norm(x - c, axis=1) / diam
        singular |= dist < eps_sing
        stage_dist = np.minimum(stage_dist, dist)
        slope *= 1.0 / np.maximum(dist, eps_sing)
        drop = np.argmin(lam, axis=1)
        lmin = lam[np.arange(N), drop]
        t = 1.0 - w * lmin
        t = np.where(t > 0, t, 1.0)
        lz = 1.0 / w + (lam - 1.0 / w) / t[:, None]
        lz[np.arange(N), drop] = 0.0
        lz = np.clip(lz, 0.0, None)
        lz /= lz.sum(axis=1, keepdims=True)
        lam = _slots_drop(lz, drop)
        rows = _slots_drop(rows, drop)
        P = _slots_drop(P, drop)
    return rows, lam, singular, slope, stage_dist


def radial_project(cx: SimplicialComplex, sid: int, x, n: int, eps_sing: float = 1e-6):
    """Scalar radial projection of ``x`` in m-simplex ``sid``.

    Returns ``(point, face_vertex_rows, face_barycentric, slope_factor)``;
    raises :class:`SingularProximity` near a stage centre.
    """
    x = np.asarray(x, dtype=float)
    S = cx.simplices[cx.m][sid]
    P = cx.vertices[S]
    E = (P[1:] - P[0]).T
    lam_rest = np.linalg.solve(E, x - P[0])
    bary = np.concatenate([[1.0 - lam_rest.sum()], lam_rest])
    if bary.min() < -1e-9:
        raise ValueError("point is not in the given simplex")
    rows, lam, sing, slope, dist = radial_project_many(cx, np.array([sid]), bary[None], n, eps_sing)
    if sing[0]:
        raise SingularProximity(cx.m, float(dist[0]))
    point = lam[0] @ cx.vertices[rows[0]]
    return point, rows[0], lam[0], float(slope[0])


@dataclass
class ExtensionField:
    """The evaluable extension ``F`` on the box omega."""

    dec: Decomposition
    cx: SimplicialComplex
    data: BoundaryData
    skeleton: SkeletonMap
    eps_sing: float = 1e-6
    collar: float = 0.0

    @property
    def target(self) -> TargetSpace:
        return self.data.target

    @property
    def m(self) -> int:
        return self.cx.m

    @property
    def n(self) -> int:
        return self.skeleton.n

    @property
    def L(self) -> float:
        return self.data.L_measured

    @property
    def C_tilde(self) -> float:
        return self.skeleton.C_tilde

    @property
    def constant_value(self) -> np.ndarray:
        return self.skeleton.table.values[0]

    @property
    def collar_slope(self) -> float:
        """Slope assigned on Z, the collar and the singular set: L (C + 4)."""
        return self.L * (self.C_tilde + 4.0)

    def evaluate_many(self, x, with_info: bool = False, hint=None, far=None):
        """Evaluate at the rows of ``x``; returns values and per-point flags.

        With ``with_info`` a third item maps ``sid``, ``diam`` and ``slope``
        (containing simplex, its diameter, projection slope factor; ``-1``,
        ``nan``, ``inf`` off the regular region) and ``dist`` (distance to Z,
        ``nan`` where it was not computed).
        ``hint`` (a simplex per row) and ``far`` (rows known to be at least
        the collar radius away from Z) only speed things up.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.m:
            raise ValueError(f"points must have {self.m} coordinates")
        if not np.all(self.dec.in_omega(x)):
            raise ValueError("point outside omega")
        N = len(x)
        out = np.empty((N, self.target.point_dim))
        flags = np.full(N, REGULAR, dtype=np.int8)
        collar = np.zeros(N, dtype=bool)
        near = np.arange(N) if far is None else np.flatnonzero(~np.asarray(far, dtype=bool))
        site = np.zeros(N, dtype=np.int64)
        dist = np.full(N, np.nan)
        if len(near):
            dist[near], site[near] = self.data.Z.nearest(x[near])
            collar[near] = dist[near] < self.collar
        reg = np.flatnonzero(~collar)
        sid, bary = self.cx.locate_many(x[reg], hint=None if hint is None else np.asarray(hint)[reg])
        uncovered = sid < 0
        if np.any(uncovered):
            lost = reg[uncovered]
            site[lost] = self.data.Z.nearest(x[lost])[1]
            collar[lost] = True
        reg, sid, bary = reg[~uncovered], sid[~uncovered], bary[~uncovered]
        out[collar] = self.data.values[site[collar]]
        flags[collar] = COLLAR
        rows, lam, sing, slope, _ = radial_project_many(self.cx, sid, bary, self.n, self.eps_sing)
        face = self.skeleton.face_index(self.n, rows) if len(rows) else np.zeros(0, np.int64)
        vals = self.skeleton.evaluate_faces(face, lam) if len(rows) else np.zeros((0, out.shape[1]))
        vals[sing] = self.constant_value
        out[reg] = vals
        flags[reg[sing]] = SINGULAR
        if not with_info:
            return out, flags
        info_sid = np.full(N, -1, dtype=np.int64)
        diam = np.full(N, np.nan)
        slope_all = np.full(N, np.inf)
        info_sid[reg] = sid
        diam[reg] = self._diam_cache()[sid]
        slope_all[reg] = slope
        return out, flags, {"sid": info_sid, "diam": diam, "slope": slope_all, "dist": dist}

    def prepare(self) -> "ExtensionField":
        """Build every lazy lookup table so that evaluation is read-only."""
        self.cx._locate_tables()
        self.dec._key_tables()
        self._diam_cache()
        self.skeleton.face_index(self.n, self.cx.simplices[self.n][:1])
        return self

    def _diam_cache(self) -> np.ndarray:
        c = self.cx._cache
        if "diam" not in c:
            c["diam"] = self.cx.diameters()
        return c["diam"]

    def evaluate(self, x) -> np.ndarray:
        vals, _ = self.evaluate_many(np.asarray(x, dtype=float)[None])
        return vals[0]

    def eval_on_segment(self, a, b, steps: int):
        """Samples of ``F`` at ``steps + 1`` equispaced points of ``[a, b]``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.array_equal(a, b) or steps <= 0:
            pts = a[None]
        else:
            s = np.linspace(0.0, 1.0, steps + 1)
            pts = a + s[:, None] * (b - a)
        vals, flags = self.evaluate_many(pts)
        return pts, vals, flags

    def dilated(self, lam: float) -> "ExtensionField":
        """The field built from dilated boundary data on the same complex."""
        return build_field(self.dec, self.cx, self.data.dilated(lam), self.n, self.eps_sing, self.collar)

    def to_json(self) -> dict:
        sk = self.skeleton
        obj = {
            "target": self.target.to_json(),
            "m": self.m,
            "n": self.n,
            "eps_sing": self.eps_sing,
            "collar": self.collar,
            "constant_value": self.constant_value.tolist(),
            "L_measured": self.L,
            "C_tilde_measured": self.C_tilde,
            "sites": self.data.Z.points.tolist(),
            "values": self.data.values.tolist(),
            "decomposition": self.dec.to_json(),
            "complex": self.cx.to_json(),
            "vertex_table": {"site": sk.table.site.tolist(), "dist": sk.table.dist.tolist()},
        }
        if sk.path_verts is not None:
            obj["edge_paths"] = [
                {"t0": float(t[0]), "vertices": v.tolist(), "lifted_t": t.tolist()}
                for v, t in zip(sk.path_verts, sk.path_t)
            ]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "ExtensionField":
        Y = TargetSpace.from_json(obj["target"])
        dec = Decomposition.from_json(obj["decomposition"])
        cx = SimplicialComplex.from_json(obj["complex"], dec)
        data = BoundaryData(CompactSet(obj["sites"]), np.asarray(obj["values"], dtype=float), Y)
        site = np.asarray(obj["vertex_table"]["site"], dtype=np.int64)
        dist = np.asarray(obj["vertex_table"]["dist"], dtype=float)
        table = VertexTable(site, dist, data.values[site], float("nan"))
        n = int(obj["n"])
        sk = extend_skeleton(cx, table, Y, n, data.L_measured)
        if "edge_paths" in obj:
            verts = np.array([p["vertices"] for p in obj["edge_paths"]], dtype=float)
            lifted = np.array([p["lifted_t"] for p in obj["edge_paths"]], dtype=float)
            if not np.allclose(heis.batch_lift(verts, lifted[:, 0]), lifted, rtol=0.0, atol=1e-9):
                raise ValueError("stored edge paths are not horizontal")
            if not (np.array_equal(verts, sk.path_verts) and np.array_equal(lifted, sk.path_t)):
                raise ValueError("stored edge paths disagree with the vertex table")
        return cls(dec, cx, data, sk, float(obj["eps_sing"]), float(obj["collar"])).prepare()


def default_collar(dec: Decomposition) -> float:
    """Radius that contains every point of an unresolved cube: 2 sqrt(m) times the finest side."""
    return 2.0 * math.sqrt(dec.m) * float(dec.side(dec.max_generation))


def build_field(
    dec: Decomposition,
    cx: SimplicialComplex,
    data: BoundaryData,
    n: int,
    eps_sing: float = 1e-6,
    collar: float | None = None,
) -> ExtensionField:
    table = assign_vertices(cx, data)
    sk = extend_skeleton(cx, table, data.target, n, data.L_measured)
    if collar is None:
        collar = default_collar(dec)
    return ExtensionField(dec, cx, data, sk, eps_sing, collar).prepare()
