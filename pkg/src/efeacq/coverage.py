"""Covered volume of a box-shaped target set by delta-neighbourhoods of observed points.

Volume is estimated on a fixed probe lattice (cell centres) so that every
estimate is deterministic and coverage flags only ever switch on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, ParameterError

DEFAULT_PROBES = 50
DEFAULT_DELTA = 0.1


@dataclass(frozen=True)
class TargetSet:
    """Axis-aligned box ``lower <= y <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise DomainError("target box needs lower < upper in every dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @classmethod
    def unit_cube(cls, dim: int) -> TargetSet:
        return cls(np.zeros(dim), np.ones(dim))

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.all((y >= self.lower) & (y <= self.upper), axis=-1)


def probe_lattice(target: TargetSet, probes: int) -> np.ndarray:
    """Cell-centre lattice with ``probes`` points per dimension."""
    ticks = [lo + (np.arange(probes) + 0.5) * (hi - lo) / probes
             for lo, hi in zip(target.lower, target.upper)]
    mesh = np.meshgrid(*ticks, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass
class CoverageTracker:
    """Probe flags over ``target``; distances are Euclidean after dividing by ``scale``."""

    target: TargetSet
    delta: float = DEFAULT_DELTA
    probes: int = DEFAULT_PROBES
    scale: np.ndarray | None = None
    observed: list = field(default_factory=list)

    def __post_init__(self):
        if self.delta <= 0:
            raise ParameterError("delta must be positive")
        if self.probes < 1:
            raise ParameterError("need at least one probe per dimension")
        self.scale = (np.ones(self.target.dim) if self.scale is None
                      else np.broadcast_to(np.asarray(self.scale, dtype=float),
                                           (self.target.dim,)).copy())
        if np.any(self.scale <= 0):
            raise ParameterError("scale must be positive")
        self._probes = probe_lattice(self.target, self.probes) / self.scale
        self.covered = np.zeros(len(self._probes), dtype=bool)
        self._rebuild()
        pending, self.observed = list(self.observed), []
        for y in pending:
            self.add_outcome(y)

    def _rebuild(self):
        self._free_idx = np.flatnonzero(~self.covered)
        self._free_tree = cKDTree(self._probes[self._free_idx]) if self._free_idx.size else None

    def _std(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.target.dim:
            raise DomainError("outcome dimension does not match the target set")
        if not np.all(np.isfinite(y)):
            raise DomainError("outcomes must be finite")
        return y / self.scale

    def add_outcome(self, y) -> CoverageTracker:
        ys = np.atleast_2d(self._std(y))
        self.observed.extend(np.atleast_2d(np.asarray(y, dtype=float)).copy())
        if self._free_tree is None:
            return self
        hits = self._free_tree.query_ball_point(ys, self.delta)
        new = np.unique(np.concatenate([np.asarray(h, dtype=int) for h in hits]))
        if new.size:
            self.covered[self._free_idx[new]] = True
            self._rebuild()
        return self

    def covered_fraction(self) -> float:
        return float(self.covered.mean())

    def gains(self, y_samples) -> np.ndarray:
        """Increment in covered fraction from adding each sample on its own."""
        ys = np.atleast_2d(self._std(y_samples))
        if self._free_tree is None:
            return np.zeros(len(ys))
        counts = self._free_tree.query_ball_point(ys, self.delta, return_length=True)
        return np.asarray(counts, dtype=float) / self.covered.size

    def expected_gain(self, y_samples) -> float:
        """Mean single-sample gain; the tracker itself is left unchanged."""
        ys = np.atleast_2d(np.asarray(y_samples, dtype=float))
        if len(ys) == 0:
            raise DomainError("need at least one sample")
        return float(self.gains(ys).mean())


def parameter_tracker(dim: int, delta: float = DEFAULT_DELTA, probes: int = DEFAULT_PROBES):
    """Tracker over queried inputs in the unit cube."""
    return CoverageTracker(TargetSet.unit_cube(dim), delta, probes)
