"""Seeded instances: random sites and Lipschitz boundary data."""

from __future__ import annotations

import numpy as np

from . import heis


def random_sites(m: int, count: int, seed: int, lo=-1.0, hi=1.0, margin: float = 0.1) -> np.ndarray:
    """``count`` uniform sites in the box shrunk by ``margin`` on each side."""
    rng = np.random.default_rng([seed, 100])
    return rng.uniform(lo + margin, hi - margin, size=(count, m))


def helix_values(points: np.ndarray, radius: float = 0.5, freq: float = 2.0, seed: int = 0, translate=None) -> np.ndarray:
    """Heisenberg-valued data along a horizontal helix in a random direction.

    ``s -> (r cos ws, r sin ws, -2 r^2 w s)`` is horizontal with speed ``r w``,
    so composing with ``z -> a.z`` (unit ``a``) gives data that is ``r w``
    Lipschitz for the Carnot-Caratheodory metric, hence for Koranyi.
    """
    rng = np.random.default_rng([seed, 101])
    a = rng.normal(size=points.shape[1])
    a /= np.linalg.norm(a)
    s = freq * (points @ a)
    vals = np.stack([radius * np.cos(s), radius * np.sin(s), -2.0 * radius * radius * s], axis=1)
    if translate is not None:
        vals = heis.group_mul(np.broadcast_to(np.asarray(translate, dtype=float), vals.shape), vals)
    return vals


def linear_values(points: np.ndarray, dim: int, seed: int = 0) -> np.ndarray:
    """Euclidean data from a random linear map."""
    rng = np.random.default_rng([seed, 102])
    return points @ rng.normal(size=(points.shape[1], dim))
