"""Exception types shared across the pipeline."""

from __future__ import annotations


class HeisliftError(Exception):
    """Base class for pipeline errors."""


class UnsupportedFill(HeisliftError):
    """The target space has no fill for spheres of this dimension."""

    def __init__(self, kind: str, k: int):
        self.kind = kind
        self.k = k
        super().__init__(f"no Lipschitz fill of {k}-spheres into {kind} target")


class ConstructionError(HeisliftError):
    """The simplicial complex failed a conformity check."""

    def __init__(self, message: str, pair: tuple = ()):
        self.pair = tuple(pair)
        super().__init__(message if not pair else f"{message}: {pair}")


class NotCovered(HeisliftError):
    """A point lies outside every triangulated cube."""


class SingularProximity(HeisliftError):
    """A radial projection stage was asked to project its own center."""

    def __init__(self, stage: int, distance: float):
        self.stage = stage
        self.distance = distance
        super().__init__(f"point within singular radius of stage {stage} center ({distance:g})")


class NoValidDirection(HeisliftError):
    """Every finite-difference direction left the domain."""
