"""Simplicial subdivision of Whitney cubes, quality measures and point location.

Every axis-aligned face of every accepted cube gets one canonical
triangulation, keyed by its exact integer geometry:

* a face that contains a smaller registered face of the same dimension
  (i.e. a neighbouring cube one generation finer lies against it) is the
  union of the triangulations of its dyadic children;
* otherwise it is the cone, over its centre, of the triangulation of its
  boundary faces.

Edges are the 1-dimensional case of the same rule (split at the midpoint or
into their halves), so shared faces are triangulated once and the result is
conforming across cubes of adjacent generations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .errors import ConstructionError, NotCovered
from .whitney import Decomposition


def _row_keys(rows: np.ndarray, nvert: int) -> np.ndarray | None:
    bits = max(1, int(nvert).bit_length())
    if bits * rows.shape[1] > 62:
        return None
    key = np.zeros(len(rows), dtype=np.int64)
    for j in range(rows.shape[1]):
        key = (key << bits) | rows[:, j].astype(np.int64)
    return key


def _unique_rows(rows: np.ndarray, nvert: int) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted rows and the inverse map."""
    keys = _row_keys(rows, nvert)
    if keys is None:
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        return uniq, inv.ravel()
    _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    return rows[first], inv.ravel()


class _FaceTriangulator:
    def __init__(self, dec: Decomposition):
        self.dec = dec
        self.m = dec.m
        self.top = int(dec.max_generation) + 1
        self.vertex_ids: dict[tuple[int, ...], int] = {}
        self.memo: dict = {}
        self.refined_memo: dict = {}
        self.registered: set = set()
        for g, lat in zip(dec.gen.tolist(), dec.lattice.tolist()):
            s = 1 << (self.top - g)
            lo = [v * s for v in lat]
            for face in self._cube_faces(lo, s):
                self.registered.add(face)

    def _cube_faces(self, lo, s):
        m = self.m
        for k in range(1, m):
            for axes in combinations(range(m), k):
                fixed = [a for a in range(m) if a not in axes]
                for offs in product((0, s), repeat=len(fixed)):
                    flo = list(lo)
                    for a, o in zip(fixed, offs):
                        flo[a] += o
                    yield (axes, tuple(flo), s)

    def vid(self, coords: tuple[int, ...]) -> int:
        v = self.vertex_ids.get(coords)
        if v is None:
            v = len(self.vertex_ids)
            self.vertex_ids[coords] = v
        return v

    def children(self, face):
        axes, lo, s = face
        h = s // 2
        for offs in product((0, h), repeat=len(axes)):
            clo = list(lo)
            for a, o in zip(axes, offs):
                clo[a] += o
            yield (axes, tuple(clo), h)

    def refined(self, face) -> bool:
        axes, lo, s = face
        if s < 4:
            return False
        r = self.refined_memo.get(face)
        if r is None:
            r = any(c in self.registered or self.refined(c) for c in self.children(face))
            self.refined_memo[face] = r
        return r

    def boundary(self, face):
        axes, lo, s = face
        for a in axes:
            rest = tuple(b for b in axes if b != a)
            for o in (0, s):
                blo = list(lo)
                blo[a] += o
                yield (rest, tuple(blo), s)

    def simplices(self, face) -> list[tuple[int, ...]]:
        got = self.memo.get(face)
        if got is not None:
            return got
        axes, lo, s = face
        if not axes:
            out = [(self.vid(lo),)]
        elif self.refined(face):
            out = [t for c in self.children(face) for t in self.simplices(c)]
        else:
            center = list(lo)
            for a in axes:
                center[a] += s // 2
            c = self.vid(tuple(center))
            out = [(c,) + t for b in self.boundary(face) for t in self.simplices(b)]
        self.memo[face] = out
        return out


@dataclass
class SimplicialComplex:
    """Simplicial complex on the union of accepted Whitney cubes.

    ``simplices[k]`` holds sorted vertex-index rows of all k-simplices;
    ``facets[k]`` maps each k-simplex to its (k-1)-faces (facet ``i`` is the
    one opposite vertex ``i``); ``parent_cube`` is per m-simplex.
    """

    vertices: np.ndarray
    simplices: list[np.ndarray]
    facets: list[np.ndarray]
    parent_cube: np.ndarray
    dec: Decomposition
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return self.vertices.shape[1]

    @property
    def top(self) -> np.ndarray:
        return self.simplices[self.m]

    def skeleton(self, k: int) -> np.ndarray:
        return self.simplices[k]

    def counts(self) -> list[int]:
        return [len(s) for s in self.simplices]

    def simplex_coords(self, k: int | None = None) -> np.ndarray:
        k = self.m if k is None else k
        return self.vertices[self.simplices[k]]

    def diameters(self, k: int | None = None) -> np.ndarray:
        P = self.simplex_coords(k)
        d = np.zeros(len(P))
        for i, j in combinations(range(P.shape[1]), 2):
            d = np.maximum(d, np.linalg.norm(P[:, i] - P[:, j], axis=1))
        return d

    def volumes(self) -> np.ndarray:
        P = self.simplex_coords()
        E = P[:, 1:] - P[:, :1]
        return np.abs(np.linalg.det(E)) / math.factorial(self.m)

    def _locate_tables(self):
        if "loc" not in self._cache:
            P = self.simplex_coords()
            E = np.swapaxes(P[:, 1:] - P[:, :1], 1, 2)
            Tinv = np.linalg.inv(E)
            order = np.argsort(self.parent_cube, kind="stable")
            counts = np.bincount(self.parent_cube, minlength=len(self.dec))
            K = int(counts.max()) if len(counts) else 0
            table = np.full((len(self.dec), K), -1, dtype=np.int64)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
            for slot in range(K):
                has = counts > slot
                table[has, slot] = order[starts[has] + slot]
            self._cache["loc"] = (P[:, 0].copy(), Tinv, table)
        return self._cache["loc"]

    def locate_many(self, x, tol: float = 1e-12, hint=None) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised point location: ``(simplex id or -1, barycentric coords)``.

        ``hint`` optionally gives a simplex per row to try first (``-1`` for
        none).  A hinted point deeper than ``1e-9`` (barycentric) inside its
        hint is accepted directly; no other simplex can contain it.  Anything else goes through the full search, so results do not depend
        on the hint.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v0, Tinv, table = self._locate_tables()
        m = self.m
        sid = np.full(len(x), -1, dtype=np.int64)
        bary = np.full((len(x), m + 1), np.nan)
        todo = np.arange(len(x))
        if hint is not None:
            hint = np.asarray(hint, dtype=np.int64)
            rows = np.flatnonzero(hint >= 0)
            h = hint[rows]
            lam = np.einsum("nij,nj->ni", Tinv[h], x[rows] - v0[h])
            full = np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1)
            ok = full.min(axis=1) > 1e-9
            sid[rows[ok]] = h[ok]
            bary[rows[ok]] = full[ok]
            todo = np.flatnonzero(sid < 0)
        cube = np.full(len(x), -1, dtype=np.int64)
        cube[todo] = self.dec.find_cube_closed(x[todo])
        todo = todo[cube[todo] >= 0]
        self._locate_in(x, todo, table[cube[todo]], v0, Tinv, tol, sid, bary)
        # Points on a cube face may have been assigned to the neighbour whose
        # simplices do not contain them after rounding; retry the adjacent cells.
        miss = todo[sid[todo] < 0]
        if len(miss):
            eps = self.dec.root_side * 2.0**-40
            for shift in product((-eps, 0.0, eps), repeat=m):
                if len(miss) == 0:
                    break
                c2 = self.dec.find_cube_closed(x[miss] + np.asarray(shift))
                ok = c2 >= 0
                self._locate_in(x, miss[ok], table[c2[ok]], v0, Tinv, tol, sid, bary)
                miss = miss[sid[miss] < 0]
        return sid, bary

    @staticmethod
    def _locate_in(x, rows, cand, v0, Tinv, tol, sid, bary):
        if len(rows) == 0:
            return
        safe = np.where(cand >= 0, cand, 0)
        rel = x[rows, None, :] - v0[safe]
        lam = np.einsum("nkij,nkj->nki", Tinv[safe], rel)
        lam0 = 1.0 - lam.sum(axis=2)
        full = np.concatenate([lam0[..., None], lam], axis=2)
        inside = (full.min(axis=2) >= -tol) & (cand >= 0)
        # lowest simplex id among the containing candidates
        key = np.where(inside, cand, np.iinfo(np.int64).max)
        j = np.argmin(key, axis=1)
        found = inside[np.arange(len(rows)), j]
        r = rows[found]
        sid[r] = cand[found, j[found]]
        bary[r] = full[found, j[found]]

    def locate(self, x) -> tuple[int, np.ndarray]:
        sid, bary = self.locate_many(np.asarray(x, dtype=float)[None])
        if sid[0] < 0:
            raise NotCovered(f"point {np.asarray(x).tolist()} is not in any triangulated cube")
        return int(sid[0]), bary[0]

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "vertices": self.vertices.tolist(),
            "simplices": {str(k): s.tolist() for k, s in enumerate(self.simplices)},
            "parent_cube": self.parent_cube.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, dec: Decomposition) -> "SimplicialComplex":
        m = int(obj["m"])
        verts = np.asarray(obj["vertices"], dtype=float).reshape(-1, m)
        top = np.asarray(obj["simplices"][str(m)], dtype=np.int64).reshape(-1, m + 1)
        parent = np.asarray(obj["parent_cube"], dtype=np.int64)
        return _assemble(verts, top, parent, dec)

    def to_off(self) -> str:
        """The 2-skeleton as an OFF file (vertices padded to 3D)."""
        V = np.zeros((len(self.vertices), 3))
        V[:, : min(3, self.m)] = self.vertices[:, :3]
        tris = self.simplices[2] if self.m >= 2 else np.zeros((0, 3), int)
        lines = ["OFF", f"{len(V)} {len(tris)} 0"]
        lines += [" ".join(repr(float(c)) for c in v) for v in V]
        lines += ["3 " + " ".join(str(int(i)) for i in t) for t in tris]
        return "\n".join(lines) + "\n"


def _assemble(verts: np.ndarray, top: np.ndarray, parent: np.ndarray, dec: Decomposition):
    m = verts.shape[1]
    V = len(verts)
    top = np.sort(top, axis=1)
    simplices: list[np.ndarray] = [None] * (m + 1)  # type: ignore[list-item]
    facets: list[np.ndarray] = [np.zeros((V, 0), dtype=np.int64)] + [None] * m  # type: ignore[list-item]
    simplices[m] = top
    for k in range(m, 0, -1):
        S = simplices[k]
        rows = np.concatenate([np.delete(S, i, axis=1) for i in range(k + 1)])
        uniq, inv = _unique_rows(rows, V)
        if k - 1 == 0:
            uniq = np.arange(V, dtype=np.int64)[:, None]
            inv = rows[:, 0]
        simplices[k - 1] = uniq
        facets[k] = inv.reshape(k + 1, len(S)).T.copy()
    return SimplicialComplex(verts, simplices, facets, parent, dec)


def build_complex(dec: Decomposition, validate: bool = True) -> SimplicialComplex:
    """Triangulate the accepted cubes of ``dec``."""
    if len(dec) == 0:
        raise ValueError("decomposition has no accepted cubes")
    m = dec.m
    tri = _FaceTriangulator(dec)
    top: list[tuple[int, ...]] = []
    parent: list[int] = []
    # smallest cubes first
    order = sorted(range(len(dec)), key=lambda i: (-int(dec.gen[i]), i))
    for i in order:
        g = int(dec.gen[i])
        s = 1 << (tri.top - g)
        lo = tuple(int(v) * s for v in dec.lattice[i])
        face = (tuple(range(m)), lo, s)
        simp = tri.simplices(face)
        top.extend(simp)
        parent.extend([i] * len(simp))
        del tri.memo[face]
    coords = np.array(list(tri.vertex_ids.keys()), dtype=np.float64)
    unit = dec.root_side / float(1 << tri.top)
    verts = dec.root_lo + coords * unit
    top_arr = np.array(top, dtype=np.int64)
    par = np.array(parent, dtype=np.int64)
    # canonical order: by parent cube, then by sorted vertex tuple
    top_arr = np.sort(top_arr, axis=1)
    order = np.lexsort(tuple(top_arr[:, j] for j in range(m, -1, -1)) + (par,))
    cx = _assemble(verts, top_arr[order], par[order], dec)
    if validate:
        problems = validate_complex(cx)
        if problems:
            first = problems[0]
            raise ConstructionError(first["kind"], tuple(first["pair"]))
    return cx


def _orient(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sign of det[P1-P0, ..., q-P0] for facets ``P`` (F, m, m) and points ``q``."""
    E = np.concatenate([P[:, 1:] - P[:, :1], (q - P[:, 0])[:, None]], axis=1)
    return np.sign(np.linalg.det(E))


def validate_complex(cx: SimplicialComplex, volume_rtol: float = 1e-9) -> list[dict]:
    """Conformity and coverage checks; returns a list of violations (empty if valid).

    * every (m-1)-face has one or two incident m-simplices;
    * the two m-simplices on an interior facet lie on opposite sides of it;
    * a facet with a single incident simplex faces away from every accepted cube
      (a hanging facet would poke into a neighbour);
    * all m-simplices have positive volume and fill their cubes exactly.
    """
    m = cx.m
    out: list[dict] = []
    vol = cx.volumes()
    bad = np.flatnonzero(vol <= 0)
    for s in bad[:10]:
        out.append({"kind": "degenerate simplex", "pair": [int(s), int(s)]})

    lo, hi = cx.dec.bounds()
    cube_vol = np.prod(hi - lo, axis=1)
    filled = np.bincount(cx.parent_cube, weights=vol, minlength=len(cx.dec))
    rel = np.abs(filled - cube_vol) / cube_vol
    for c in np.flatnonzero(rel > volume_rtol)[:10]:
        out.append({"kind": "cube volume not partitioned", "pair": [int(c), int(c)]})

    fac = cx.facets[m]
    nf = len(cx.simplices[m - 1])
    inc = np.bincount(fac.ravel(), minlength=nf)
    for f in np.flatnonzero(inc > 2)[:10]:
        owners = np.flatnonzero(np.any(fac == f, axis=1))
        out.append({"kind": "facet shared by more than two simplices", "pair": owners[:2].tolist()})

    flat_f = fac.T.ravel()
    flat_s = np.tile(np.arange(len(fac)), m + 1)
    flat_i = np.repeat(np.arange(m + 1), len(fac))
    order = np.argsort(flat_f, kind="stable")
    flat_f, flat_s, flat_i = flat_f[order], flat_s[order], flat_i[order]
    starts = np.searchsorted(flat_f, np.arange(nf))
    P = cx.vertices[cx.simplices[m - 1]]
    top = cx.simplices[m]

    two = np.flatnonzero(inc == 2)
    if len(two):
        a = starts[two]
        sa, sb = flat_s[a], flat_s[a + 1]
        qa = cx.vertices[top[sa, flat_i[a]]]
        qb = cx.vertices[top[sb, flat_i[a + 1]]]
        oa, ob = _orient(P[two], qa), _orient(P[two], qb)
        for j in np.flatnonzero(oa * ob >= 0)[:10]:
            out.append({"kind": "simplices overlap across facet", "pair": [int(sa[j]), int(sb[j])]})

    one = np.flatnonzero(inc == 1)
    if len(one):
        a = starts[one]
        s1 = flat_s[a]
        opp = cx.vertices[top[s1, flat_i[a]]]
        Pf = P[one]
        bc = Pf.mean(axis=1)
        # outward unit normal of the facet hyperplane
        E = Pf[:, 1:] - Pf[:, :1]
        normal = np.empty((len(one), m))
        for j in range(m):
            minor = np.delete(E, j, axis=2)
            normal[:, j] = (-1) ** j * (np.linalg.det(minor) if m > 1 else 1.0)
        normal /= np.linalg.norm(normal, axis=1, keepdims=True)
        flip = np.sum(normal * (opp - bc), axis=1) > 0
        normal[flip] *= -1
        size = cx.dec.side(cx.dec.gen[cx.parent_cube[s1]])
        probe = bc + normal * (1e-6 * size)[:, None]
        hit = cx.dec.find_cube(probe)
        for j in np.flatnonzero(hit >= 0)[:10]:
            out.append({"kind": "hanging facet", "pair": [int(s1[j]), int(hit[j])]})
    return out


def _gram_dets(P: np.ndarray, idx: tuple[int, ...]) -> np.ndarray:
    if len(idx) == 1:
        return np.ones(len(P))
    E = P[:, list(idx[1:])] - P[:, [idx[0]]]
    return np.linalg.det(E @ np.swapaxes(E, 1, 2))


def flatness(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(beta, B)`` per simplex: min/max barycentre-to-facet-plane distance over all faces.

    For an l-face the distance from its barycentre to the plane of the facet
    opposite a vertex is ``sqrt(G_face / G_facet) / (l + 1)`` with ``G`` the
    Gram determinants of the edge vectors.
    """
    S, k1, _ = P.shape
    gram = {}
    for size in range(1, k1 + 1):
        for idx in combinations(range(k1), size):
            gram[idx] = np.maximum(_gram_dets(P, idx), 0.0)
    beta = np.full(S, np.inf)
    B = np.zeros(S)
    for size in range(2, k1 + 1):
        l = size - 1
        for idx in combinations(range(k1), size):
            for drop in idx:
                facet = tuple(i for i in idx if i != drop)
                dist = np.sqrt(gram[idx] / gram[facet]) / (l + 1)
                beta = np.minimum(beta, dist)
                B = np.maximum(B, dist)
    return beta, B


def fingerprints(P: np.ndarray, quantum: float = 1e-9) -> np.ndarray:
    """Sorted, scale-normalised edge lengths, quantised (one row per simplex)."""
    k1 = P.shape[1]
    lens = np.stack([np.linalg.norm(P[:, i] - P[:, j], axis=1) for i, j in combinations(range(k1), 2)], axis=1)
    lens = np.sort(lens, axis=1)
    lens /= lens[:, -1:]
    return np.round(lens / quantum).astype(np.int64)


def corner_factor(P: np.ndarray, rng: np.random.Generator, pairs: int = 64) -> float:
    """Measured constant of the corner inequality |x-v| + |v-y| <= mu |x-y|.

    For every (j+1)-face of the given simplices and every pair of its j-faces,
    random ``x``, ``y`` on the two faces are joined through the nearest point
    ``v`` of the common face to ``x`` or ``y`` (whichever is better).
    """
    from scipy.optimize import nnls

    k1 = P.shape[1]
    mu = 1.0
    for size in range(3, k1 + 1):
        for idx in combinations(range(k1), size):
            for d1, d2 in combinations(idx, 2):
                f1 = [i for i in idx if i != d1]
                f2 = [i for i in idx if i != d2]
                common = [i for i in idx if i not in (d1, d2)]
                for s in range(len(P)):
                    C = P[s, common]
                    A = np.vstack([C.T, 1e3 * np.ones(len(common))])
                    for _ in range(pairs):
                        x = rng.dirichlet(np.ones(len(f1))) @ P[s, f1]
                        y = rng.dirichlet(np.ones(len(f2))) @ P[s, f2]
                        best = np.inf
                        for w in (x, y):
                            lam, _ = nnls(A, np.concatenate([w, [1e3]]))
                            v = lam @ C
                            best = min(best, np.linalg.norm(x - v) + np.linalg.norm(v - y))
                        dxy = np.linalg.norm(x - y)
                        if dxy > 0:
                            mu = max(mu, best / dxy)
    return float(mu)


def quality_report(cx: SimplicialComplex, Z=None, corner_samples: int = 0, seed: int = 0) -> dict:
    """Flatness, size and similarity-class statistics of the m-simplices."""
    m = cx.m
    P = cx.simplex_coords()
    diam = cx.diameters()
    beta, B = flatness(P)
    if np.any(~np.isfinite(beta)) or np.any(beta <= 0):
        raise ConstructionError("degenerate simplex in quality report")
    fp = fingerprints(P)
    classes, cls_of = np.unique(fp, axis=0, return_inverse=True)
    cls_of = cls_of.ravel()
    ratio_beta = diam / beta
    ratio_B = diam / B
    per_class = []
    for c in range(len(classes)):
        sel = cls_of == c
        per_class.append({
            "class": c,
            "count": int(sel.sum()),
            "diam_over_beta": float(ratio_beta[sel].max()),
            "diam_over_B": float(ratio_B[sel].min()),
        })
    report = {
        "m": m,
        "simplices": cx.counts(),
        "similarity_classes": int(len(classes)),
        "D1_measured": float(ratio_B.min()),
        "D2_measured": float(ratio_beta.max()),
        "beta_le_B_le_diam": bool(np.all((beta <= B * (1 + 1e-12)) & (B <= diam * (1 + 1e-12)))),
        "per_class": per_class,
    }
    if Z is not None:
        cube = cx.parent_cube
        lo, hi = cx.dec.bounds()
        dQ = Z.box_distance(lo, hi)[cube]
        vdist = Z.distance(cx.vertices)[cx.simplices[m]].min(axis=1)
        lower_ok = diam <= dQ * (1 + 1e-12)
        upper = 12.0 * math.sqrt(m)
        upper_ok = vdist <= upper * diam
        report["size_lower_violations"] = int(np.sum(~lower_ok))
        report["size_upper_violations"] = int(np.sum(~upper_ok))
        report["size_ratio_min"] = float(np.min(dQ / diam))
        report["size_ratio_max"] = float(np.max(vdist / diam))
    if corner_samples and m >= 2:
        rng = np.random.default_rng(seed)
        reps = np.array([np.flatnonzero(cls_of == c)[0] for c in range(len(classes))])
        report["corner_factor_mu"] = corner_factor(P[reps], rng, corner_samples)
    return report
