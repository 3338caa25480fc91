"""Hard slicer-induced plans: stable sorting, the T_{n,m} staircase and the lifted plan."""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import (
    DegenerateInputError,
    InvalidInputError,
    ShapeError,
)
from gsgw.schemas.measures import Coupling

logger = get_logger(__name__)


@dataclass(frozen=True)
class SortResult:
    """Stable sorting permutation of a value vector."""
    order: np.ndarray

    @property
    def n(self) -> int:
        return self.order.shape[0]

    @property
    def ranks(self) -> np.ndarray:
        """ranks[index] = position of index in the sorted order."""
        ranks = np.empty_like(self.order)
        ranks[self.order] = np.arange(self.n)
        return ranks

    @property
    def perm_matrix(self) -> np.ndarray:
        """P with P[rank][index] = 1."""
        matrix = np.zeros((self.n, self.n))
        matrix[np.arange(self.n), self.order] = 1.0
        return matrix


@dataclass(frozen=True)
class MonotoneInterp:
    """
    Staircase matrix of interval overlaps between uniform n- and m-grids.

    Entries are numerators / denominator with integer numerators on the
    n*m grid, so both marginals are exact before the float conversion.
    """
    rows: np.ndarray
    cols: np.ndarray
    numerators: np.ndarray
    n: int
    m: int

    @property
    def denominator(self) -> int:
        return self.n * self.m

    @property
    def mass(self) -> np.ndarray:
        return self.numerators / float(self.denominator)

    @property
    def matrix(self) -> np.ndarray:
        dense = np.zeros((self.n, self.m))
        dense[self.rows, self.cols] = self.mass
        return dense


def _as_values(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be a vector, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise InvalidInputError(f"{name} must not be empty")
    if np.any(np.isnan(arr)):
        raise InvalidInputError(f"{name} contains NaN")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains infinite values")
    return arr


def stable_argsort(values) -> SortResult:
    """
    Sort order of a value vector with ties broken by ascending index.

    Args:
        values: Finite real vector

    Returns:
        SortResult whose order lists indices in nondecreasing value order

    Raises:
        InvalidInputError: If a value is NaN or infinite
    """
    arr = _as_values(values, "values")
    return SortResult(np.argsort(arr, kind="stable"))


def monotone_interp_matrix(n: int, m: int) -> MonotoneInterp:
    """
    The canonical monotone plan between uniform measures of sizes n and m.

    Row i covers [i*m, (i+1)*m) and column j covers [j*n, (j+1)*n) on the
    integer scale {0, ..., n*m}; each nonzero entry is one segment between
    consecutive merged breakpoints, so there are at most n + m - 1 of them.

    Raises:
        InvalidInputError: If n or m is below 1
    """
    if n < 1 or m < 1:
        raise InvalidInputError(f"grid sizes must be positive, got n={n}, m={m}")
    total = n * m
    breaks = np.union1d(
        np.arange(0, total + 1, m, dtype=np.int64),
        np.arange(0, total + 1, n, dtype=np.int64),
    )
    starts = breaks[:-1]
    return MonotoneInterp(
        rows=starts // m,
        cols=starts // n,
        numerators=np.diff(breaks),
        n=int(n),
        m=int(m),
    )


def hard_plan_sparse(s, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Index-only hard plan as (rows, cols, mass) triples.

    Sorting dominates the cost, O((n + m) log(n + m)); nothing of size n*m
    is allocated.

    Args:
        s: Source push-forward values
        t: Target push-forward values

    Returns:
        Original row indices, original column indices, masses
    """
    s_arr = _as_values(s, "s")
    t_arr = _as_values(t, "t")
    order_s = np.argsort(s_arr, kind="stable")
    order_t = np.argsort(t_arr, kind="stable")
    interp = monotone_interp_matrix(s_arr.shape[0], t_arr.shape[0])
    return order_s[interp.rows], order_t[interp.cols], interp.mass


def hard_plan(s, t) -> Coupling:
    """
    Dense hard plan (P_X)^T T_{n,m} P_Y induced by sorting s and t.

    For n = m this is (1/n) times the permutation matrix matching the k-th
    smallest s to the k-th smallest t.

    Raises:
        InvalidInputError: If s or t contains NaN
    """
    rows, cols, mass = hard_plan_sparse(s, t)
    n = np.asarray(s).size
    m = np.asarray(t).size
    dense = np.zeros((n, m))
    dense[rows, cols] = mass
    return Coupling(dense, np.full(n, 1.0 / n), np.full(m, 1.0 / m))


def plan_permutation(s, t) -> np.ndarray:
    """Permutation sigma with s_i matched to t_{sigma(i)} for equal sizes."""
    rows, cols, _ = hard_plan_sparse(s, t)
    if rows.shape[0] != np.asarray(s).size or np.asarray(s).size != np.asarray(t).size:
        raise ShapeError("plan_permutation needs n == m")
    sigma = np.empty_like(rows)
    sigma[rows] = cols
    return sigma


@dataclass(frozen=True)
class PiecewiseLinearMap:
    """Continuous piecewise-linear map through (knots, values), constant outside."""
    knots: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=np.float64), self.knots, self.values)


def _check_permutation(sigma, n: int) -> np.ndarray:
    sig = np.asarray(sigma)
    if sig.shape != (n,) or not np.issubdtype(sig.dtype, np.integer):
        raise InvalidInputError(f"sigma must be an integer vector of length {n}")
    if not np.array_equal(np.sort(sig), np.arange(n)):
        raise InvalidInputError("sigma is not a bijection")
    return sig.astype(np.intp)


def construct_xi(x, sigma: Sequence[int], y) -> PiecewiseLinearMap:
    """
    Build a piecewise-linear rearrangement that turns sigma into a monotone matching.

    Node x_i gets the value rank(x_i) and node y_{sigma(i)} the same value,
    so sorting xi(x) and xi(y) pairs x_i with y_{sigma(i)}. xi is the linear
    interpolant through these node values.

    Args:
        x: Source nodes (any order)
        sigma: Target permutation, x_i -> y_{sigma(i)}
        y: Target nodes, same length as x

    Returns:
        PiecewiseLinearMap over the merged sorted nodes

    Raises:
        InvalidInputError: If sigma is not a bijection or lengths differ
        DegenerateInputError: If two nodes coincide with conflicting values
    """
    x_arr = _as_values(x, "x")
    y_arr = _as_values(y, "y")
    n = x_arr.shape[0]
    if y_arr.shape[0] != n:
        raise InvalidInputError("construct_xi needs n == m")
    sig = _check_permutation(sigma, n)

    x_rank = stable_argsort(x_arr).ranks.astype(np.float64)
    if np.unique(x_arr).shape[0] != n:
        raise DegenerateInputError("duplicate source nodes; perturb x")
    if np.unique(y_arr).shape[0] != n:
        raise DegenerateInputError("duplicate target nodes; perturb y")

    y_value = np.empty(n)
    y_value[sig] = x_rank

    nodes = np.concatenate([x_arr, y_arr])
    values = np.concatenate([x_rank, y_value])
    order = np.argsort(nodes, kind="stable")
    nodes, values = nodes[order], values[order]

    same = nodes[1:] == nodes[:-1]
    if np.any(same & (values[1:] != values[:-1])):
        raise DegenerateInputError("a source and a target node coincide with conflicting targets")
    keep = np.concatenate([[True], ~same])
    return PiecewiseLinearMap(nodes[keep], values[keep])
