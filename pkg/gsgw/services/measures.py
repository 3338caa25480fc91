"""Cost matrices, couplings and the GW / fused-GW objectives."""
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from gsgw.core.config import settings
from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import (
    InvalidInputError,
    ShapeError,
    SizeError,
    InternalConsistencyError,
)
from gsgw.schemas.measures import (
    CostConvention,
    CostMatrix,
    Coupling,
    DiscreteMeasure,
    PointCloud,
)
from gsgw.services import autodiff as ad

logger = get_logger(__name__)

NEGATIVE_LOSS_TOL = 1e-10


def _entries(C) -> np.ndarray:
    return C.entries if isinstance(C, CostMatrix) else np.asarray(C, dtype=np.float64)


def _plan(pi) -> np.ndarray:
    return pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=np.float64)


def _check_shapes(cx: np.ndarray, cy: np.ndarray, p: np.ndarray) -> None:
    if cx.ndim != 2 or cx.shape[0] != cx.shape[1]:
        raise ShapeError(f"Cx must be square, got {cx.shape}")
    if cy.ndim != 2 or cy.shape[0] != cy.shape[1]:
        raise ShapeError(f"Cy must be square, got {cy.shape}")
    if p.shape != (cx.shape[0], cy.shape[0]):
        raise ShapeError(f"plan shape {p.shape} does not match costs {cx.shape[0]}x{cy.shape[0]}")


def uniform_measure(cloud: PointCloud) -> DiscreteMeasure:
    """Attach uniform weights 1/n to a point cloud."""
    return DiscreteMeasure(cloud, np.full(cloud.n, 1.0 / cloud.n))


def build_cost_matrix(
    cloud: PointCloud,
    convention: CostConvention = CostConvention.DISTANCE,
) -> CostMatrix:
    """
    Euclidean intra-space cost matrix of a point cloud.

    Args:
        cloud: Input points
        convention: distance or squared_distance

    Returns:
        Symmetric zero-diagonal cost matrix

    Raises:
        InvalidInputError: If a coordinate is not finite
    """
    points = np.asarray(cloud.points if isinstance(cloud, PointCloud) else cloud, dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("non-finite coordinate in point cloud")
    if points.ndim == 1:
        points = points[:, None]
    convention = CostConvention(convention)
    if points.shape[0] == 1:
        return CostMatrix(np.zeros((1, 1)), convention)
    metric = "sqeuclidean" if convention is CostConvention.SQUARED_DISTANCE else "euclidean"
    return CostMatrix(squareform(pdist(points, metric=metric)), convention)


def coupling_from_matrix(
    plan: np.ndarray,
    a: Optional[np.ndarray] = None,
    b: Optional[np.ndarray] = None,
) -> Coupling:
    """
    Wrap a plan matrix as a Coupling, clipping round-off negatives.

    Args:
        plan: n x m matrix
        a: Declared row marginal (taken from the matrix if omitted)
        b: Declared column marginal (taken from the matrix if omitted)

    Returns:
        Validated coupling
    """
    return Coupling(np.asarray(plan, dtype=np.float64), a, b)


def _finish_loss(value: float, what: str, scale: float = 0.0) -> float:
    if value < -NEGATIVE_LOSS_TOL * (1.0 + abs(scale)):
        raise InternalConsistencyError(f"{what} evaluated to {value:.3e} < 0")
    return max(float(value), 0.0)


def gw_loss(Cx, Cy, pi) -> float:
    """
    GW objective at a coupling via the quadratic-time decomposition.

    L = a^T (Cx*Cx) a + b^T (Cy*Cy) b - 2 <Cx pi Cy, pi>, with (a, b) the
    marginals of pi.

    Args:
        Cx: n x n source costs
        Cy: m x m target costs
        pi: n x m coupling

    Returns:
        Nonnegative loss

    Raises:
        ShapeError: If the shapes disagree
        InternalConsistencyError: If the decomposition goes below -1e-10
    """
    cx, cy, p = _entries(Cx), _entries(Cy), _plan(pi)
    _check_shapes(cx, cy, p)
    a = p.sum(axis=1)
    b = p.sum(axis=0)
    const = a @ (cx * cx) @ a + b @ (cy * cy) @ b
    cross = np.sum((cx @ p @ cy) * p)
    return _finish_loss(const - 2.0 * cross, "gw_loss", scale=const)


def gw_loss_naive(Cx, Cy, pi) -> float:
    """
    Literal quadruple sum of the GW objective; oracle for small instances.

    Raises:
        SizeError: If n*m exceeds the configured guard
    """
    cx, cy, p = _entries(Cx), _entries(Cy), _plan(pi)
    _check_shapes(cx, cy, p)
    n, m = p.shape
    if n * m > settings.NAIVE_LOSS_GUARD:
        raise SizeError(f"gw_loss_naive guard: n*m={n * m} > {settings.NAIVE_LOSS_GUARD}")
    total = 0.0
    for i in range(n):
        for k in range(n):
            for j in range(m):
                for l in range(m):
                    total += (cx[i, k] - cy[j, l]) ** 2 * p[i, j] * p[k, l]
    return _finish_loss(total, "gw_loss_naive")


def gw_loss_grad_pi(Cx, Cy, pi) -> np.ndarray:
    """
    Gradient of the decomposed GW objective with respect to the plan entries.

    G = 2 (Cx*Cx) a 1^T + 2 1 ((Cy*Cy) b)^T - 4 Cx pi Cy

    Returns:
        n x m gradient matrix
    """
    cx, cy, p = _entries(Cx), _entries(Cy), _plan(pi)
    _check_shapes(cx, cy, p)
    a = p.sum(axis=1)
    b = p.sum(axis=0)
    return (
        2.0 * ((cx * cx) @ a)[:, None]
        + 2.0 * ((cy * cy) @ b)[None, :]
        - 4.0 * (cx @ p @ cy)
    )


def gw_loss_permutation(Cx, Cy, sigma: Sequence[int]) -> float:
    """
    Gromov-Monge objective (1/n^2) sum (Cx[i,k] - Cy[sigma i, sigma k])^2.

    Equals gw_loss at the plan (1/n) P_sigma.
    """
    cx, cy = _entries(Cx), _entries(Cy)
    sigma = np.asarray(sigma, dtype=np.intp)
    n = cx.shape[0]
    if cy.shape != cx.shape or sigma.shape != (n,):
        raise ShapeError("permutation loss needs equal sizes")
    diff = cx - cy[np.ix_(sigma, sigma)]
    return float(np.sum(diff * diff)) / (n * n)


def feature_cost(FeatX: np.ndarray, FeatY: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances ||phi_i - phi_j||^2 between feature rows."""
    fx = np.asarray(FeatX, dtype=np.float64)
    fy = np.asarray(FeatY, dtype=np.float64)
    if fx.ndim != 2 or fy.ndim != 2 or fx.shape[1] != fy.shape[1]:
        raise ShapeError(f"feature dims differ: {fx.shape} vs {fy.shape}")
    return cdist(fx, fy, metric="sqeuclidean")


def fgw_loss(Cx, Cy, pi, FeatX: np.ndarray, FeatY: np.ndarray, lam: float) -> float:
    """
    Fused GW objective (1 - lam) GW + lam sum ||phi_i - phi_j||^2 pi_ij.

    Raises:
        InvalidInputError: If lam is outside [0, 1]
    """
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError(f"lambda must lie in [0, 1], got {lam}")
    p = _plan(pi)
    structure = gw_loss(Cx, Cy, p)
    if lam == 0.0:
        return structure
    fc = feature_cost(FeatX, FeatY)
    if fc.shape != p.shape:
        raise ShapeError(f"feature cost {fc.shape} does not match plan {p.shape}")
    return (1.0 - lam) * structure + lam * float(np.sum(fc * p))


def gw_loss_tape(Cx, Cy, plan: ad.Tensor) -> ad.Tensor:
    """
    gw_loss recorded on the tape of a plan tensor, marginals taken from the plan.

    Returns:
        (1, 1) tensor
    """
    cx, cy = _entries(Cx), _entries(Cy)
    n, m = plan.shape
    if cx.shape != (n, n) or cy.shape != (m, m):
        raise ShapeError(f"plan shape {plan.shape} does not match costs {cx.shape[0]}x{cy.shape[0]}")
    tape = plan.tape
    cx_t, cy_t = tape.constant(cx), tape.constant(cy)
    a = plan @ tape.constant(np.ones((m, 1)))
    b = plan.T @ tape.constant(np.ones((n, 1)))
    const = a.T @ tape.constant(cx * cx) @ a + b.T @ tape.constant(cy * cy) @ b
    cross = ad.sum_((cx_t @ plan @ cy_t) * plan)
    return const - cross * 2.0


def fgw_loss_tape(Cx, Cy, plan: ad.Tensor, FeatX: np.ndarray, FeatY: np.ndarray, lam: float) -> ad.Tensor:
    """fgw_loss recorded on the tape of a plan tensor."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError(f"lambda must lie in [0, 1], got {lam}")
    structure = gw_loss_tape(Cx, Cy, plan)
    if lam == 0.0:
        return structure
    fc = feature_cost(FeatX, FeatY)
    if fc.shape != plan.shape:
        raise ShapeError(f"feature cost {fc.shape} does not match plan {plan.shape}")
    linear = ad.sum_(plan.tape.constant(fc) * plan)
    return structure * (1.0 - lam) + linear * lam
