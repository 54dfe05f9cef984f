"""Target spaces and their Lipschitz connectivity fills.

Two oracles ship: Euclidean space (fills in every dimension, by coning over
the barycenter) and the Heisenberg group (fills of 0-spheres only, by the
explicit horizontal connections of :func:`heislift.heis.connect_points`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import heis
from .errors import UnsupportedFill


@dataclass(frozen=True)
class TargetSpace:
    """Base class; ``gamma`` is the connectivity constant the fills achieve."""

    @property
    def kind(self) -> str:
        raise NotImplementedError

    @property
    def point_dim(self) -> int:
        raise NotImplementedError

    @property
    def gamma(self) -> float:
        raise NotImplementedError

    def max_fill_dim(self, ambient: int) -> int:
        raise NotImplementedError

    def dist(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def check_points(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != self.point_dim:
            raise ValueError(
                f"{self.kind} target expects points of length {self.point_dim}, got {a.shape[-1]}"
            )
        return a

    def to_json(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_json(obj: dict) -> "TargetSpace":
        kind = obj["kind"]
        if kind == "euclidean":
            return Euclidean(int(obj["dim"]))
        if kind == "heisenberg":
            return Heisenberg(int(obj["dim"]))
        raise ValueError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class Euclidean(TargetSpace):
    d: int

    kind = "euclidean"  # type: ignore[assignment]

    @property
    def point_dim(self) -> int:
        return self.d

    @property
    def gamma(self) -> float:
        # An affine map attains its Lipschitz constant on boundary chords.
        return 1.0

    def max_fill_dim(self, ambient: int) -> int:
        return ambient - 1

    def dist(self, a, b) -> np.ndarray:
        a = self.check_points(a)
        b = self.check_points(b)
        return np.linalg.norm(a - b, axis=-1)

    def dilate(self, a, lam: float) -> np.ndarray:
        return lam * np.asarray(a, dtype=float)

    def to_json(self) -> dict:
        return {"kind": "euclidean", "dim": self.d}


@dataclass(frozen=True)
class Heisenberg(TargetSpace):
    n: int

    kind = "heisenberg"  # type: ignore[assignment]

    @property
    def point_dim(self) -> int:
        return 2 * self.n + 1

    @property
    def gamma(self) -> float:
        return heis.GAMMA_H

    def max_fill_dim(self, ambient: int) -> int:
        return 0

    def dist(self, a, b) -> np.ndarray:
        a = self.check_points(a)
        b = self.check_points(b)
        return heis.koranyi_dist(a, b)

    def dilate(self, a, lam: float) -> np.ndarray:
        return heis.dilate(a, lam)

    def to_json(self) -> dict:
        return {"kind": "heisenberg", "dim": self.n}


def dist(Y: TargetSpace, a, b) -> np.ndarray:
    return Y.dist(a, b)


class CellMap:
    """A map from a simplex (given by its vertex coordinates) into the target.

    ``evaluate`` takes barycentric coordinates with respect to ``vertices``.
    ``lipschitz`` is the bound recorded at construction.
    """

    vertices: np.ndarray
    lipschitz: float

    @property
    def k(self) -> int:
        return len(self.vertices) - 1

    def evaluate(self, bary) -> np.ndarray:
        raise NotImplementedError

    def vertex_values(self) -> np.ndarray:
        return self.evaluate(np.eye(self.k + 1))


@dataclass(frozen=True, eq=False)
class AffineCell(CellMap):
    """Barycentric interpolation of vertex values (Euclidean targets)."""

    vertices: np.ndarray
    values: np.ndarray
    lipschitz: float

    def evaluate(self, bary) -> np.ndarray:
        # anchored at vertex 0 so that constant data stays exactly constant
        bary = np.asarray(bary, dtype=float)
        return self.values[0] + bary[..., 1:] @ (self.values[1:] - self.values[0])


@dataclass(frozen=True, eq=False)
class EdgePathCell(CellMap):
    """A horizontal path traversed at constant planar speed along an edge."""

    vertices: np.ndarray
    path: heis.HorizontalPath
    lipschitz: float

    def evaluate(self, bary) -> np.ndarray:
        bary = np.asarray(bary, dtype=float)
        return self.path.at(bary[..., 1])


def affine_lipschitz(vertices, values) -> float:
    """Operator norm of the affine map on a simplex determined by vertex values."""
    v = np.asarray(vertices, dtype=float)
    f = np.asarray(values, dtype=float)
    if len(v) == 1:
        return 0.0
    return float(affine_lipschitz_batch(v[None], f[None])[0])


def affine_lipschitz_batch(vertices: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Batched version; ``vertices`` (S, k+1, m), ``values`` (S, k+1, d)."""
    E = vertices[:, 1:] - vertices[:, :1]
    W = values[:, 1:] - values[:, :1]
    G = E @ np.swapaxes(E, 1, 2)
    R = np.linalg.cholesky(G)
    # Generalized eigenproblem W W^T c = mu G c, reduced with G = R R^T.
    X = np.linalg.solve(R, W)
    M = X @ np.swapaxes(X, 1, 2)
    mu = np.linalg.eigvalsh(M)[:, -1]
    return np.sqrt(np.maximum(mu, 0.0))


def fill_sphere(
    Y: TargetSpace,
    k: int,
    vertices: Sequence[Sequence[float]],
    boundary: Sequence[CellMap] | Sequence[Sequence[float]],
    L_bd: float,
) -> CellMap:
    """Extend a map on the boundary of a (k+1)-simplex to the whole simplex.

    For ``k == 0`` the boundary is given by the two vertex values.  For
    ``k >= 1`` it is the list of facet cell maps, facet ``i`` being the one
    opposite vertex ``i``.
    """
    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) != k + 2:
        raise ValueError(f"a {k + 1}-simplex needs {k + 2} vertices")
    if k > Y.max_fill_dim(vertices.shape[1]):
        raise UnsupportedFill(Y.kind, k)

    if k == 0:
        values = Y.check_points(np.asarray(boundary, dtype=float))
    else:
        values = np.empty((k + 2, Y.point_dim))
        for i, facet in enumerate(boundary):
            if not isinstance(facet, AffineCell):
                raise TypeError("Euclidean fills expect affine facet maps")
            idx = [j for j in range(k + 2) if j != i]
            values[idx] = facet.values

    if isinstance(Y, Heisenberg):
        path = heis.connect_points(values[0], values[1])
        length = float(np.linalg.norm(vertices[1] - vertices[0]))
        lip = path.length() / length if length > 0 else 0.0
        return EdgePathCell(vertices, path, lip)

    # The cone over the barycenter with the mean vertex value is affine on
    # every cone piece and agrees with the barycentric interpolant there.
    lip = affine_lipschitz(vertices, values)
    return AffineCell(vertices, values, lip)
