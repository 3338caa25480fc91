"""Numeric containers for metric-measure spaces and couplings.

These are frozen dataclasses over read-only float64 numpy arrays; pydantic is
kept for configuration and records, where validation of user text matters.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from gsgw.exceptions.exceptions import InvalidInputError, ShapeError


class CostConvention(str, Enum):
    """Whether a cost matrix holds distances or squared distances."""
    DISTANCE = "distance"
    SQUARED_DISTANCE = "squared_distance"


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointCloud:
    """Finite point set in R^d stored as an (n, d) array."""
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ShapeError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError("a point cloud needs at least one point of dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("point coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point set; weights lie on the probability simplex."""
    support: PointCloud
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.support.n,):
            raise ShapeError(f"weights shape {w.shape} does not match {self.support.n} points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights must sum to 1, got {w.sum():.17g}")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n(self) -> int:
        return self.support.n

    def is_uniform(self, tol: float = 1e-12) -> bool:
        """Check whether every weight equals 1/n."""
        return bool(np.all(np.abs(self.weights - 1.0 / self.n) <= tol))


@dataclass(frozen=True)
class CostMatrix:
    """Symmetric, zero-diagonal, nonnegative intra-space cost matrix."""
    entries: np.ndarray
    convention: CostConvention = CostConvention.DISTANCE

    def __post_init__(self):
        c = np.asarray(self.entries, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"cost matrix must be square, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("cost entries must be finite")
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-12:
            raise InvalidInputError("cost matrix must be symmetric")
        if np.any(np.diag(c) != 0.0):
            raise InvalidInputError("cost matrix must have a zero diagonal")
        if np.any(c < 0):
            raise InvalidInputError("cost entries must be nonnegative")
        object.__setattr__(self, "entries", _frozen(c))
        object.__setattr__(self, "convention", CostConvention(self.convention))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Coupling:
    """Nonnegative n x m plan with its row and column marginals."""
    plan: np.ndarray
    row_marginal: np.ndarray = field(default=None)
    col_marginal: np.ndarray = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.plan, dtype=np.float64)
        if p.ndim != 2:
            raise ShapeError(f"plan must be 2-D, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("plan entries must be finite")
        if np.any(p < -1e-15):
            raise InvalidInputError(f"plan has negative entries (min {p.min():.3g})")
        p = np.where(p < 0, 0.0, p)
        a = p.sum(axis=1) if self.row_marginal is None else np.asarray(self.row_marginal, dtype=np.float64)
        b = p.sum(axis=0) if self.col_marginal is None else np.asarray(self.col_marginal, dtype=np.float64)
        if a.shape != (p.shape[0],) or b.shape != (p.shape[1],):
            raise ShapeError("marginal lengths do not match the plan")
        if np.max(np.abs(p.sum(axis=1) - a)) > 1e-10 or np.max(np.abs(p.sum(axis=0) - b)) > 1e-10:
            raise InvalidInputError("plan does not have the declared marginals")
        object.__setattr__(self, "plan", _frozen(p))
        object.__setattr__(self, "row_marginal", _frozen(a))
        object.__setattr__(self, "col_marginal", _frozen(b))

    @property
    def shape(self):
        return self.plan.shape

    def marginal_error(self, a: Optional[np.ndarray] = None, b: Optional[np.ndarray] = None) -> float:
        """
        Largest deviation of the plan's marginals from target marginals.

        Args:
            a: Target row marginal (uniform if omitted)
            b: Target column marginal (uniform if omitted)

        Returns:
            max(|pi 1 - a|, |pi^T 1 - b|)
        """
        n, m = self.plan.shape
        a = np.full(n, 1.0 / n) if a is None else np.asarray(a, dtype=np.float64)
        b = np.full(m, 1.0 / m) if b is None else np.asarray(b, dtype=np.float64)
        return float(max(
            np.max(np.abs(self.plan.sum(axis=1) - a)),
            np.max(np.abs(self.plan.sum(axis=0) - b)),
        ))

    def transpose(self) -> "Coupling":
        return Coupling(self.plan.T, self.col_marginal, self.row_marginal)
