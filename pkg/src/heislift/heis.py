"""Heisenberg group arithmetic in exponential coordinates.

Points of H^n are stored as arrays whose last axis is laid out as
``[x_1, y_1, ..., x_n, y_n, t]`` (the JSON wire order).  All array functions
broadcast over leading axes, so a batch of points is simply a ``(..., 2n+1)``
array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Worst case of (a + 2b) / (a^4 + b^4)^(1/4): Hoelder with exponents 4 and 4/3.
GAMMA_H = (1.0 + 2.0 ** (4.0 / 3.0)) ** 0.75


def _check_same_dim(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape[-1] != q.shape[-1]:
        raise ValueError(f"dimension mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    if p.shape[-1] < 3 or p.shape[-1] % 2 == 0:
        raise ValueError(f"not a Heisenberg point of length 2n+1: {p.shape[-1]}")


def heis_dim(p: np.ndarray) -> int:
    return (np.shape(p)[-1] - 1) // 2


def group_mul(p, q) -> np.ndarray:
    """Group product ``p * q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_same_dim(p, q)
    out = p + q
    px, py = p[..., 0:-1:2], p[..., 1:-1:2]
    qx, qy = q[..., 0:-1:2], q[..., 1:-1:2]
    out[..., -1] = p[..., -1] + q[..., -1] + 2.0 * np.sum(qx * py - px * qy, axis=-1)
    return out


def group_inv(p) -> np.ndarray:
    """Inverse element; in exponential coordinates this is negation."""
    return -np.asarray(p, dtype=float)


def dilate(p, lam: float) -> np.ndarray:
    """Anisotropic dilation (x, y, t) -> (lam x, lam y, lam^2 t)."""
    out = np.array(p, dtype=float, copy=True)
    lam = np.asarray(lam, dtype=float)
    out[..., :-1] *= lam[..., None]
    out[..., -1] *= lam * lam
    return out


def koranyi_norm(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    r2 = np.sum(p[..., :-1] ** 2, axis=-1)
    return (r2 * r2 + p[..., -1] ** 2) ** 0.25


def koranyi_dist(p, q) -> np.ndarray:
    """Koranyi distance ``|| q^{-1} * p ||_K``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_same_dim(p, q)
    return koranyi_norm(group_mul(group_inv(q), p))


def vertical_defect(p, q) -> np.ndarray:
    """The t-part of ``q^{-1} * p``: ``t - t' + 2 sum(x'_j y_j - x_j y'_j)``."""
    return group_mul(group_inv(q), p)[..., -1]


def lift_increment(a, b) -> np.ndarray:
    """Height gained along the straight planar segment ``a -> b``.

    Along a segment the 1-form ``2 sum(y dx - x dy)`` has the constant density
    ``2 sum(b_x a_y - a_x b_y)`` per unit parameter, so this is exact.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ax, ay = a[..., 0::2], a[..., 1::2]
    bx, by = b[..., 0::2], b[..., 1::2]
    return 2.0 * np.sum(bx * ay - ax * by, axis=-1)


@dataclass(frozen=True)
class HPoint:
    """A single point of H^n; a convenience wrapper over the array layout."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    t: float

    def __post_init__(self) -> None:
        if len(self.x) != len(self.y) or len(self.x) == 0:
            raise ValueError("x and y must have the same positive length")
        vals = (*self.x, *self.y, self.t)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("HPoint coordinates must be finite")

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "HPoint":
        a = np.asarray(a, dtype=float)
        return cls(tuple(a[0:-1:2].tolist()), tuple(a[1:-1:2].tolist()), float(a[-1]))

    @classmethod
    def identity(cls, n: int = 1) -> "HPoint":
        return cls((0.0,) * n, (0.0,) * n, 0.0)

    def to_array(self) -> np.ndarray:
        out = np.empty(2 * self.n + 1)
        out[0:-1:2] = self.x
        out[1:-1:2] = self.y
        out[-1] = self.t
        return out

    def to_json(self) -> list[float]:
        return self.to_array().tolist()

    def __mul__(self, other: "HPoint") -> "HPoint":
        return HPoint.from_array(group_mul(self.to_array(), other.to_array()))

    def inv(self) -> "HPoint":
        return HPoint.from_array(group_inv(self.to_array()))

    def dist(self, other: "HPoint") -> float:
        return float(koranyi_dist(self.to_array(), other.to_array()))


def _lift_heights(vertices: np.ndarray, t0: float) -> np.ndarray:
    inc = lift_increment(vertices[:-1], vertices[1:])
    out = np.empty(len(vertices))
    out[0] = t0
    out[1:] = t0 + np.cumsum(inc)
    return out


@dataclass(frozen=True)
class HorizontalPath:
    """Planar polyline plus starting height; heights are always lifted.

    ``vertices`` has shape ``(k+1, 2n)`` in the interleaved planar layout.
    """

    vertices: np.ndarray
    t0: float
    lifted_t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] % 2:
            raise ValueError("vertices must be a (k+1, 2n) array")
        v.setflags(write=False)
        lifted = _lift_heights(v, float(self.t0))
        lifted.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "lifted_t", lifted)

    @property
    def n(self) -> int:
        return self.vertices.shape[1] // 2

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    def length(self) -> float:
        """Horizontal length, i.e. the Euclidean length of the planar polyline."""
        return float(np.sum(self.segment_lengths))

    def points(self) -> np.ndarray:
        """Full H^n coordinates of every vertex, shape ``(k+1, 2n+1)``."""
        return np.concatenate([self.vertices, self.lifted_t[:, None]], axis=1)

    def start(self) -> np.ndarray:
        return self.points()[0]

    def end(self) -> np.ndarray:
        return self.points()[-1]

    def at(self, s) -> np.ndarray:
        """Point at planar-arclength fraction ``s`` in [0, 1] (constant speed)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        cum = np.concatenate([[0.0], np.cumsum(self.segment_lengths)])
        total = cum[-1]
        if total == 0.0:
            return np.broadcast_to(self.points()[0], s.shape + (2 * self.n + 1,)).copy()
        tau = s * total
        idx = np.clip(np.searchsorted(cum, tau, side="right") - 1, 0, len(cum) - 2)
        seg = cum[idx + 1] - cum[idx]
        frac = np.where(seg > 0, (tau - cum[idx]) / np.where(seg > 0, seg, 1.0), 0.0)
        a = self.vertices[idx]
        b = self.vertices[idx + 1]
        planar = a + frac[..., None] * (b - a)
        t = self.lifted_t[idx] + lift_increment(a, planar)
        return np.concatenate([planar, t[..., None]], axis=-1)

    def translated(self, g) -> "HorizontalPath":
        """Left translation ``g * path``; horizontality is preserved."""
        g = np.asarray(g, dtype=float)
        start = group_mul(g, self.points()[0])
        return HorizontalPath(self.vertices + g[:-1], float(start[-1]))

    def to_json(self) -> dict:
        return {
            "t0": self.t0,
            "vertices": self.vertices.tolist(),
            "lifted_t": self.lifted_t.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, atol: float = 1e-9) -> "HorizontalPath":
        path = cls(np.asarray(obj["vertices"], dtype=float), float(obj["t0"]))
        if "lifted_t" in obj:
            stored = np.asarray(obj["lifted_t"], dtype=float)
            if stored.shape != path.lifted_t.shape or not np.allclose(
                stored, path.lifted_t, rtol=0.0, atol=atol
            ):
                raise ValueError("stored lifted_t disagrees with the exact lift")
        return path


def connect_batch(p, q) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal connections for a batch of point pairs.

    Returns ``(vertices, t0)`` with ``vertices`` of shape ``(E, 6, 2n)``: the
    start, the end of the planar segment, and the four corners of the
    correcting square loop (zero-length pieces are kept so that every path has
    the same shape).
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    _check_same_dim(p, q)
    p, q = np.broadcast_arrays(p, q)
    r = group_mul(group_inv(p), q)
    dim2 = p.shape[-1] - 1
    E = r.shape[0]
    rt = r[:, -1]
    side = 0.5 * np.sqrt(np.abs(rt))
    # rt < 0 needs positive signed area (counter-clockwise), rt > 0 clockwise.
    ccw = rt < 0
    u = np.where(ccw, side, 0.0)
    w = np.where(ccw, 0.0, side)
    loop = np.zeros((E, 4, 2))
    loop[:, 0, 0], loop[:, 0, 1] = u, w
    loop[:, 1, 0], loop[:, 1, 1] = side, side
    loop[:, 2, 0], loop[:, 2, 1] = w, u
    verts = np.zeros((E, 6, dim2))
    verts[:, 1, :] = r[:, :-1]
    verts[:, 2:, :] = r[:, None, :-1]
    verts[:, 2:5, 0:2] += loop[:, :3]
    verts += p[:, None, :-1]
    return verts, p[:, -1].copy()


def batch_lift(verts: np.ndarray, t0: np.ndarray) -> np.ndarray:
    """Lifted heights for a batch of polylines ``(E, K, 2n)``."""
    inc = lift_increment(verts[:, :-1], verts[:, 1:])
    out = np.empty(verts.shape[:2])
    out[:, 0] = t0
    out[:, 1:] = t0[:, None] + np.cumsum(inc, axis=1)
    return out


def connect_points(p, q) -> HorizontalPath:
    """A horizontal path from ``p`` to ``q``.

    Built from the origin towards ``r = p^{-1} q``: a straight planar segment to
    ``(r_x, r_y)`` (no height change from the origin) followed by an
    axis-aligned square loop in the first (x, y) plane whose enclosed area
    supplies the remaining height, then left-translated by ``p``.  Its length is
    at most ``GAMMA_H * koranyi_dist(p, q)``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_same_dim(p, q)
    verts, t0 = connect_batch(p[None], q[None])
    v = verts[0]
    keep = [0] + [i for i in range(1, len(v)) if np.any(v[i] != v[i - 1])]
    return HorizontalPath(v[keep], float(t0[0]))


def path_length(path: HorizontalPath) -> float:
    return path.length()
