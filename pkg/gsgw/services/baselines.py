"""Reference solvers and sliced baselines.

Exact Gromov-Monge enumeration, the 1-D oracle, entropic GW by iterated
Sinkhorn projections, Frank-Wolfe with an exact assignment oracle, and the
shared / independent / max-min sliced GW objectives.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from gsgw.core.config import settings
from gsgw.core.logging import get_logger
from gsgw.core.rng import make_rng
from gsgw.exceptions.exceptions import (
    InvalidInputError,
    NumericError,
    ShapeError,
    SizeError,
    UnsupportedMarginalsError,
)
from gsgw.schemas.measures import CostMatrix, Coupling, DiscreteMeasure
from gsgw.schemas.solver import SgwConfig, SgwMode, SinkhornConfig
from gsgw.services.measures import gw_loss, gw_loss_grad_pi, gw_loss_permutation
from gsgw.services.monotone_plan import hard_plan, plan_permutation

logger = get_logger(__name__)

SINKHORN_EPSILON_PRESETS = (0.05, 0.5, 1.0)
PERMUTATION_CHUNK = 5040
INCREASE_TOL = 1e-10


def _entries(C) -> np.ndarray:
    return C.entries if isinstance(C, CostMatrix) else np.asarray(C, dtype=np.float64)


# -- exact oracles ------------------------------------------------------------

@dataclass(frozen=True)
class BruteForceResult:
    """Exact Gromov-Monge minimizer; the first optimal permutation in lexicographic order."""
    best_perm: np.ndarray
    best_loss: float
    evaluated: int


def brute_force_gw(Cx, Cy) -> BruteForceResult:
    """
    Enumerate every permutation and minimize (1/n^2) sum (Cx[i,k] - Cy[s(i),s(k)])^2.

    Raises:
        InvalidInputError: If n != m
        SizeError: If n exceeds settings.BRUTE_FORCE_MAX_N
    """
    cx, cy = _entries(Cx), _entries(Cy)
    n = cx.shape[0]
    if cy.shape[0] != n:
        raise InvalidInputError(f"brute force needs n == m, got {n} and {cy.shape[0]}")
    if n > settings.BRUTE_FORCE_MAX_N:
        raise SizeError(f"brute force limited to n <= {settings.BRUTE_FORCE_MAX_N}, got {n}")

    best_perm, best_value, evaluated = None, np.inf, 0
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, PERMUTATION_CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        diff = cx[None, :, :] - cy[chunk[:, :, None], chunk[:, None, :]]
        values = np.einsum("kij,kij->k", diff, diff)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value, best_perm = values[k], chunk[k].copy()
        evaluated += chunk.shape[0]
    return BruteForceResult(best_perm, gw_loss_permutation(cx, cy, best_perm), evaluated)


def _squared_line_costs(values: np.ndarray) -> np.ndarray:
    diff = values[:, None] - values[None, :]
    return diff * diff


def gw_1d_oracle(x, y) -> Tuple[np.ndarray, float]:
    """
    Exact 1-D GW permutation under the squared Euclidean cost.

    Returns:
        (sigma, loss) with x_i matched to y_{sigma(i)}
    """
    x_arr = np.asarray(x, dtype=np.float64).reshape(-1)
    y_arr = np.asarray(y, dtype=np.float64).reshape(-1)
    result = brute_force_gw(_squared_line_costs(x_arr), _squared_line_costs(y_arr))
    return result.best_perm, result.best_loss


@dataclass(frozen=True)
class MonotoneCounterexample:
    """1-D instance where the optimal permutation is neither monotone arrangement."""
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    oracle_loss: float
    identity_loss: float
    reversal_loss: float

    @property
    def margin(self) -> float:
        return min(self.identity_loss, self.reversal_loss) - self.oracle_loss


def _sample_line(rng: np.random.Generator, n: int) -> np.ndarray:
    family = rng.integers(3)
    if family == 0:
        values = rng.uniform(0.0, 1.0, n)
    elif family == 1:
        values = rng.standard_normal(n) ** 3
    else:
        values = rng.exponential(1.0, n) * rng.choice([-1.0, 1.0], n)
    return np.sort(values)


def find_monotone_counterexample(
    n_values: Sequence[int] = (5, 6, 7),
    seed: int = 0,
    max_trials: int = 2000,
    margin: float = 1e-3,
) -> Optional[MonotoneCounterexample]:
    """
    Search seeded sorted 1-D instances for one where the oracle beats both
    the identity (monotone) and the reversal (anti-monotone) by ``margin``.

    No n = 4 instance qualifies: after centering, both terms of the objective
    are maximized by the identity or the reversal for four points.

    Returns:
        The first instance found, walking n_values in order, or None
    """
    for n in n_values:
        rng = make_rng(seed, "counterexample", n)
        found = None
        reversal = np.arange(n)[::-1]
        for _ in range(max_trials):
            x, y = _sample_line(rng, n), _sample_line(rng, n)
            cx, cy = _squared_line_costs(x), _squared_line_costs(y)
            identity_loss = gw_loss_permutation(cx, cy, np.arange(n))
            reversal_loss = gw_loss_permutation(cx, cy, reversal)
            sigma, oracle_loss = gw_1d_oracle(x, y)
            if min(identity_loss, reversal_loss) - oracle_loss >= margin:
                found = MonotoneCounterexample(x, y, sigma, oracle_loss, identity_loss, reversal_loss)
                break
        if found is not None:
            logger.info(f"Monotone counterexample found at n={n}, margin {found.margin:.4g}")
            return found
    return None


# -- entropic GW ----------------------------------------------------------------

def _marginal(weights, size: int, name: str) -> np.ndarray:
    w = np.full(size, 1.0 / size) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (size,):
        raise ShapeError(f"{name} has shape {w.shape}, expected ({size},)")
    if np.any(w <= 0):
        raise InvalidInputError(f"{name} must be strictly positive")
    return w


def _sinkhorn_log(log_kernel: np.ndarray, a: np.ndarray, b: np.ndarray, iters: int, tol: float
                  ) -> np.ndarray:
    """Log-domain Sinkhorn projection of exp(log_kernel) onto couplings of (a, b)."""
    if not np.all(np.isfinite(log_kernel)):
        raise NumericError("Sinkhorn kernel is not finite; increase epsilon")
    log_a, log_b = np.log(a), np.log(b)
    log_u = np.zeros_like(a)
    log_v = np.zeros_like(b)
    for it in range(iters):
        log_u = log_a - logsumexp(log_kernel + log_v[None, :], axis=1)
        log_v = log_b - logsumexp(log_kernel + log_u[:, None], axis=0)
        if it % 10 == 9 or it == iters - 1:
            plan = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
            if np.max(np.abs(plan.sum(axis=1) - a)) <= tol:
                break
    plan = np.exp(log_kernel + log_u[:, None] + log_v[None, :])
    if not np.all(np.isfinite(plan)) or np.any(plan.sum(axis=1) == 0.0):
        raise NumericError("Sinkhorn plan underflowed; increase epsilon")
    return plan


@dataclass
class SolverLog:
    """Per-iteration trace of an iterative baseline."""
    loss: List[float] = field(default_factory=list)
    gap: List[float] = field(default_factory=list)
    iterations: int = 0
    stopped_on_increase: bool = False


def sinkhorn_gw(
    Cx,
    Cy,
    a: Optional[np.ndarray] = None,
    b: Optional[np.ndarray] = None,
    epsilon: float = 0.05,
    outer_iters: int = 100,
    inner_iters: int = 1000,
    tol: float = 1e-9,
    seed: int = 0,
    log: bool = False,
) -> Union[Coupling, Tuple[Coupling, SolverLog]]:
    """
    Entropic GW: iterate pi <- Sinkhorn(exp(-grad L(pi) / epsilon), a, b).

    The start is a seeded positive perturbation of the product coupling. An
    outer step that raises the loss by more than 1e-10 is rejected and the
    iteration stops at the previous iterate.

    Args:
        Cx: Source costs
        Cy: Target costs
        a: Source weights (uniform if omitted)
        b: Target weights (uniform if omitted)
        epsilon: Entropic regularization, > 0
        outer_iters: Cap on linearization steps
        inner_iters: Cap on Sinkhorn iterations per step
        tol: Marginal tolerance of the inner loop and loss tolerance of the outer loop
        seed: Seed of the initial perturbation
        log: Also return the loss trace

    Raises:
        InvalidInputError: If epsilon <= 0
        NumericError: If the Gibbs kernel underflows
    """
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    cx, cy = _entries(Cx), _entries(Cy)
    n, m = cx.shape[0], cy.shape[0]
    a = _marginal(a, n, "a")
    b = _marginal(b, m, "b")

    rng = make_rng(seed, "sinkhorn-init")
    start = np.outer(a, b) * (1.0 + 0.5 * rng.uniform(size=(n, m)))
    plan = _sinkhorn_log(np.log(start), a, b, inner_iters, tol)
    trace = SolverLog(loss=[gw_loss(cx, cy, plan)])

    for it in range(outer_iters):
        grad = gw_loss_grad_pi(cx, cy, plan)
        candidate = _sinkhorn_log(-grad / epsilon, a, b, inner_iters, tol)
        loss = gw_loss(cx, cy, candidate)
        trace.iterations = it + 1
        if loss > trace.loss[-1] + INCREASE_TOL:
            trace.stopped_on_increase = True
            break
        change = trace.loss[-1] - loss
        moved = float(np.max(np.abs(candidate - plan)))
        plan = candidate
        trace.loss.append(loss)
        if change <= tol and moved <= tol:
            break

    logger.info(
        f"Sinkhorn GW stopped after {trace.iterations} outer iterations, loss {trace.loss[-1]:.6g}",
        extra={"method": f"sinkhorn-{epsilon:g}"},
    )
    coupling = Coupling(plan)
    return (coupling, trace) if log else coupling


# -- Frank-Wolfe ----------------------------------------------------------------

def solve_1d_linesearch_quad(a: float, b: float) -> float:
    """argmin over [0, 1] of a x^2 + b x, convex or not."""
    if a > 0:
        return min(1.0, max(0.0, -b / (2.0 * a)))
    return 1.0 if a + b < 0 else 0.0


def frank_wolfe_gw(
    Cx,
    Cy,
    iters: int = 100,
    tol: float = 1e-12,
    log: bool = False,
    init: Optional[np.ndarray] = None,
) -> Union[Coupling, Tuple[Coupling, SolverLog]]:
    """
    Conditional gradient on the uniform Birkhoff polytope.

    The linear oracle is an exact assignment (Hungarian); the step is the
    closed-form minimizer of the quadratic objective along the direction.

    Raises:
        UnsupportedMarginalsError: If n != m
    """
    cx, cy = _entries(Cx), _entries(Cy)
    n = cx.shape[0]
    if cy.shape[0] != n:
        raise UnsupportedMarginalsError("Frank-Wolfe needs n == m; use sinkhorn_gw")
    plan = np.full((n, n), 1.0 / (n * n)) if init is None else np.array(init, dtype=np.float64)
    trace = SolverLog(loss=[gw_loss(cx, cy, plan)])

    for it in range(iters):
        grad = gw_loss_grad_pi(cx, cy, plan)
        rows, cols = linear_sum_assignment(grad)
        vertex = np.zeros((n, n))
        vertex[rows, cols] = 1.0 / n
        direction = vertex - plan
        slope = float(np.sum(grad * direction))
        trace.gap.append(-slope)
        trace.iterations = it + 1
        if -slope <= tol:
            break
        curvature = -2.0 * float(np.sum((cx @ direction @ cy) * direction))
        gamma = solve_1d_linesearch_quad(curvature, slope)
        if gamma == 0.0:
            break
        plan = plan + gamma * direction
        trace.loss.append(gw_loss(cx, cy, plan))

    logger.info(
        f"Frank-Wolfe stopped after {trace.iterations} iterations, loss {trace.loss[-1]:.6g}",
        extra={"method": "frank_wolfe"},
    )
    coupling = Coupling(np.clip(plan, 0.0, None))
    return (coupling, trace) if log else coupling


# -- sliced GW --------------------------------------------------------------------

@dataclass(frozen=True)
class SgwDetails:
    """Sliced GW value with its per-direction (or per-restart) contributions."""
    value: float
    mode: SgwMode
    per_direction: np.ndarray


def _unit_rows(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    v = rng.standard_normal((count, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _pad(points: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((points.shape[0], d))
    out[:, : points.shape[1]] = points
    return out


def projected_gw(u: np.ndarray, v: np.ndarray) -> float:
    """GW loss of the monotone plan between two projected 1-D point sets, squared costs."""
    cu, cv = _squared_line_costs(u), _squared_line_costs(v)
    if u.shape[0] == v.shape[0]:
        return gw_loss_permutation(cu, cv, plan_permutation(u, v))
    return gw_loss(cu, cv, hard_plan(u, v))


def _direction_losses(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    count = px.shape[1]
    workers = max(1, min(settings.max_workers, count))
    if workers == 1:
        return np.array([projected_gw(px[:, k], py[:, k]) for k in range(count)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda k: projected_gw(px[:, k], py[:, k]), range(count))))


def _projected_grads(X: np.ndarray, Y: np.ndarray, theta: np.ndarray, phi: np.ndarray
                     ) -> Tuple[float, np.ndarray, np.ndarray]:
    """Loss and direction gradients of the projected GW at its (fixed) monotone plan."""
    px, py = X @ theta, Y @ phi
    plan = hard_plan(px, py).plan
    a, b = plan.sum(axis=1), plan.sum(axis=0)
    cu, cv = _squared_line_costs(px), _squared_line_costs(py)
    loss = gw_loss(cu, cv, plan)
    w_x = 2.0 * cu * np.outer(a, a) - 2.0 * plan @ cv @ plan.T
    w_y = 2.0 * cv * np.outer(b, b) - 2.0 * plan.T @ cu @ plan
    grad_theta = 4.0 * X.T @ (px * w_x.sum(axis=1) - w_x @ px)
    grad_phi = 4.0 * Y.T @ (py * w_y.sum(axis=1) - w_y @ py)
    return loss, grad_theta, grad_phi


def _normalized_step(direction: np.ndarray, grad: np.ndarray, lr: float, sign: float) -> np.ndarray:
    norm = np.linalg.norm(grad)
    if norm > 0:
        direction = direction + sign * lr * grad / norm
    return direction / np.linalg.norm(direction)


def _best_response(X: np.ndarray, Y: np.ndarray, theta: np.ndarray, phi: np.ndarray, cfg: SgwConfig) -> float:
    """Lowest loss reached by descending on phi alone with theta held fixed."""
    best = _projected_grads(X, Y, theta, phi)[0]
    for _ in range(cfg.maxmin_iters):
        _, _, grad_phi = _projected_grads(X, Y, theta, phi)
        phi = _normalized_step(phi, grad_phi, cfg.maxmin_lr, -1.0)
        best = min(best, _projected_grads(X, Y, theta, phi)[0])
    return best


def _max_min(X: np.ndarray, Y: np.ndarray, cfg: SgwConfig, stream: str) -> np.ndarray:
    """max over theta (on X) of min over phi (on Y), one value per restart."""
    values = []
    for restart in range(cfg.maxmin_restarts):
        rng = make_rng(cfg.seed, "msgw", stream, restart)
        theta = _unit_rows(rng, 1, X.shape[1])[0]
        phi = _unit_rows(rng, 1, Y.shape[1])[0]
        for _ in range(cfg.maxmin_iters):
            _, _, grad_phi = _projected_grads(X, Y, theta, phi)
            phi = _normalized_step(phi, grad_phi, cfg.maxmin_lr, -1.0)
            _, grad_theta, _ = _projected_grads(X, Y, theta, phi)
            theta = _normalized_step(theta, grad_theta, cfg.maxmin_lr, 1.0)
        # restarts are scored at the inner player's best response to the final theta
        values.append(_best_response(X, Y, theta, phi, cfg))
    return np.array(values)


def sgw_details(mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SgwConfig,
                num_directions: Optional[int] = None) -> SgwDetails:
    """
    Sliced GW estimate with its per-direction values.

    shared: one direction on S^{d-1}, d = max(p, q), applied to both
    zero-padded supports. independent: directions drawn separately on
    S^{p-1} and S^{q-1}. maxmin: the symmetrized max-min game optimized by
    alternating normalized gradient steps on the spheres; per_direction then
    holds the per-restart values of both orientations.

    Raises:
        InvalidInputError: If the direction count is below 1
        UnsupportedMarginalsError: If a measure is not uniform
    """
    count = cfg.num_directions if num_directions is None else num_directions
    if count < 1:
        raise InvalidInputError(f"need at least one direction, got {count}")
    if not (mu.is_uniform() and nu.is_uniform()):
        raise UnsupportedMarginalsError("sliced GW uses uniform monotone plans")
    X, Y = mu.support.points, nu.support.points
    mode = SgwMode(cfg.mode)

    if mode is SgwMode.SHARED:
        d = max(X.shape[1], Y.shape[1])
        theta = _unit_rows(make_rng(cfg.seed, "sgw", "shared"), count, d)
        losses = _direction_losses(_pad(X, d) @ theta.T, _pad(Y, d) @ theta.T)
        return SgwDetails(float(losses.mean()), mode, losses)
    if mode is SgwMode.INDEPENDENT:
        theta = _unit_rows(make_rng(cfg.seed, "sgw", "source"), count, X.shape[1])
        phi = _unit_rows(make_rng(cfg.seed, "sgw", "target"), count, Y.shape[1])
        losses = _direction_losses(X @ theta.T, Y @ phi.T)
        return SgwDetails(float(losses.mean()), mode, losses)

    forward = _max_min(X, Y, cfg, "forward")
    backward = _max_min(Y, X, cfg, "backward")
    value = max(float(forward.max()), float(backward.max()))
    logger.info(
        f"Max-min sliced GW {value:.6g}, restart spread {np.ptp(forward):.3g}/{np.ptp(backward):.3g}",
        extra={"method": "msgw", "seed": cfg.seed},
    )
    return SgwDetails(value, mode, np.concatenate([forward, backward]))


def sgw(mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SgwConfig) -> float:
    """Scalar sliced GW objective; see sgw_details."""
    return sgw_details(mu, nu, cfg).value


def sinkhorn_presets(seed: int = 0) -> Dict[float, SinkhornConfig]:
    """Entropic settings for every preset epsilon."""
    return {eps: SinkhornConfig(epsilon=eps, seed=seed) for eps in SINKHORN_EPSILON_PRESETS}
