"""The per-instance min-GSGW loop: slicers -> soft plan -> GW loss -> Adam, with restarts."""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gsgw.core.config import settings
from gsgw.core.logging import get_logger
from gsgw.core.rng import derive_seed, make_rng
from gsgw.exceptions.exceptions import (
    NumericError,
    OptimizationFailureError,
    ShapeError,
    UnsupportedMarginalsError,
)
from gsgw.schemas.measures import CostConvention, CostMatrix, Coupling, DiscreteMeasure, PointCloud
from gsgw.schemas.solver import SlicerKind, SlicerRelation, SolverConfig
from gsgw.services import autodiff as ad
from gsgw.services.geometry import geodesic_error, plan_to_correspondence
from gsgw.services.measures import build_cost_matrix, gw_loss, gw_loss_tape, uniform_measure
from gsgw.services.monotone_plan import hard_plan
from gsgw.services.optim import AdamState, adam_step, warmup_lr
from gsgw.services.slicers import (
    PairFactory,
    SlicerPair,
    evaluate_values,
    make_pair_factory,
    pushforward_values,
)
from gsgw.services.softsort import anneal, soft_plan_tape

logger = get_logger(__name__)


@dataclass(frozen=True)
class TracePoint:
    step: int
    loss: float
    tau: float


@dataclass
class RestartOutcome:
    """What one restart produced."""
    restart: int
    hard_loss: float = float("inf")
    plan: Optional[Coupling] = None
    pair: Optional[SlicerPair] = None
    trace: List[TracePoint] = field(default_factory=list)
    diverged: bool = False
    train_ms: float = 0.0
    plan_extract_ms: float = 0.0


@dataclass
class SolveResult:
    """Best hard plan over restarts, with traces and timings."""
    best_plan: Coupling
    best_loss: float
    loss_trace: List[TracePoint]
    restart_losses: List[float]
    wall_time_ms: float
    train_ms: float
    plan_extract_ms: float
    diverged_restarts: List[int]
    best_pair: SlicerPair
    best_restart: int


def _cost_entries(C) -> np.ndarray:
    return C.entries if isinstance(C, CostMatrix) else np.asarray(C, dtype=np.float64)


def _check_instance(mu: DiscreteMeasure, nu: DiscreteMeasure, Cx, Cy) -> None:
    if not (mu.is_uniform() and nu.is_uniform()):
        raise UnsupportedMarginalsError("slicer-induced plans need uniform weights")
    if _cost_entries(Cx).shape != (mu.n, mu.n):
        raise ShapeError(f"Cx is {_cost_entries(Cx).shape} for {mu.n} source points")
    if _cost_entries(Cy).shape != (nu.n, nu.n):
        raise ShapeError(f"Cy is {_cost_entries(Cy).shape} for {nu.n} target points")


def soft_loss_and_grad(
    pair: SlicerPair,
    theta: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    Cx,
    Cy,
    tau: float,
    jitter: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[float, np.ndarray]:
    """GW loss of the soft plan at temperature tau and its gradient in the slicer parameters."""

    def build(tape: ad.Tape, params: ad.Tensor) -> ad.Tensor:
        s, t = pushforward_values(pair, X, Y, tape, params=params)
        if jitter is not None:
            s = s + tape.constant(jitter[0][:, None])
            t = t + tape.constant(jitter[1][:, None])
        return gw_loss_tape(Cx, Cy, soft_plan_tape(s, t, tau))

    return ad.value_and_grad(build, theta)


def _hard_evaluation(pair: SlicerPair, X, Y, Cx, Cy) -> Tuple[float, Coupling]:
    s, t = evaluate_values(pair, X, Y)
    plan = hard_plan(s, t)
    return gw_loss(Cx, Cy, plan), plan


def _run_restart(
    restart: int,
    X: np.ndarray,
    Y: np.ndarray,
    Cx,
    Cy,
    cfg: SolverConfig,
    factory: PairFactory,
) -> RestartOutcome:
    outcome = RestartOutcome(restart)
    context = {"restart": restart, "seed": cfg.seed}
    pair = factory(X.shape[1], Y.shape[1], derive_seed(cfg.seed, "restart", restart))
    jitter_rng = make_rng(cfg.seed, "jitter", restart)
    theta = pair.params
    state = AdamState.zeros(theta.shape[0])

    def evaluate(current: SlicerPair) -> None:
        start = time.perf_counter()
        loss, plan = _hard_evaluation(current, X, Y, Cx, Cy)
        outcome.plan_extract_ms += (time.perf_counter() - start) * 1000.0
        if loss < outcome.hard_loss:
            outcome.hard_loss, outcome.plan, outcome.pair = loss, plan, current

    evaluate(pair)
    for step in range(cfg.steps):
        tau = anneal(cfg.anneal, step)
        jitter = (settings.TIE_JITTER * jitter_rng.standard_normal(X.shape[0]),
                  settings.TIE_JITTER * jitter_rng.standard_normal(Y.shape[0]))
        start = time.perf_counter()
        try:
            loss, grad = soft_loss_and_grad(pair.with_params(theta), theta, X, Y, Cx, Cy, tau, jitter)
            if not np.isfinite(loss):
                raise NumericError(f"soft loss is {loss}")
            theta, state = adam_step(theta, grad, state, warmup_lr(cfg.lr, step, cfg.warmup_steps),
                                     cfg.grad_clip, cfg.optimizer, cfg.weight_decay)
        except NumericError as exc:
            outcome.diverged = True
            logger.warning(f"Restart diverged: {exc}", extra={**context, "step": step})
            break
        finally:
            outcome.train_ms += (time.perf_counter() - start) * 1000.0
        outcome.trace.append(TracePoint(step, loss, tau))
        if (step + 1) % cfg.eval_every == 0 or step == cfg.steps - 1:
            evaluate(pair.with_params(theta))

    logger.info(
        f"Restart finished with hard loss {outcome.hard_loss:.6g}",
        extra={**context, "step": len(outcome.trace)},
    )
    return outcome


def solve(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    Cx,
    Cy,
    cfg: SolverConfig,
    pair_factory: Optional[PairFactory] = None,
) -> SolveResult:
    """
    Minimize the soft-plan GW loss over slicer pairs and return the best hard plan.

    The loss is always evaluated on the original intra-space costs. Each
    restart keeps the best hard-plan loss seen at initialization, every
    ``eval_every`` steps and at the end.

    Args:
        mu: Uniform source measure in R^p
        nu: Uniform target measure in R^q, p <= q
        Cx: Source costs
        Cy: Target costs
        cfg: Optimization settings
        pair_factory: (p, q, seed) -> SlicerPair; built from cfg.slicer by default

    Returns:
        SolveResult of the best restart

    Raises:
        UnsupportedMarginalsError: If a measure is not uniform
        OptimizationFailureError: If every restart diverges
    """
    _check_instance(mu, nu, Cx, Cy)
    factory = pair_factory or make_pair_factory(cfg.slicer)
    X, Y = mu.support.points, nu.support.points

    start = time.perf_counter()
    workers = max(1, min(settings.max_workers, cfg.restarts))
    if workers == 1:
        outcomes = [_run_restart(r, X, Y, Cx, Cy, cfg, factory) for r in range(cfg.restarts)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda r: _run_restart(r, X, Y, Cx, Cy, cfg, factory),
                                     range(cfg.restarts)))
    wall_ms = (time.perf_counter() - start) * 1000.0

    finished = [o for o in outcomes if not o.diverged]
    if not finished:
        raise OptimizationFailureError(f"all {cfg.restarts} restarts diverged")
    best = min(finished, key=lambda o: (o.hard_loss, o.restart))
    return SolveResult(
        best_plan=best.plan,
        best_loss=best.hard_loss,
        loss_trace=best.trace,
        restart_losses=[float("inf") if o.diverged else o.hard_loss for o in outcomes],
        wall_time_ms=wall_ms,
        train_ms=sum(o.train_ms for o in outcomes),
        plan_extract_ms=sum(o.plan_extract_ms for o in outcomes),
        diverged_restarts=[o.restart for o in outcomes if o.diverged],
        best_pair=best.pair,
        best_restart=best.restart,
    )


def solve_point_clouds(
    X: PointCloud,
    Y: PointCloud,
    cfg: SolverConfig,
    convention: CostConvention = CostConvention.DISTANCE,
    pair_factory: Optional[PairFactory] = None,
) -> SolveResult:
    """solve on uniform measures with Euclidean costs built from the clouds."""
    return solve(uniform_measure(X), uniform_measure(Y),
                 build_cost_matrix(X, convention), build_cost_matrix(Y, convention),
                 cfg, pair_factory)


@dataclass(frozen=True)
class AblationCell:
    kind: SlicerKind
    relation: SlicerRelation
    result: SolveResult
    geodesic_error: Optional[float] = None


def ablation_grid(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    Cx,
    Cy,
    cfg: SolverConfig,
    ground_truth: Optional[Sequence[int]] = None,
    target_geodesic=None,
) -> Dict[Tuple[SlicerKind, SlicerRelation], AblationCell]:
    """
    Solve the instance under slicer kind x relation.

    Args:
        mu, nu, Cx, Cy: Instance, as for solve
        cfg: Base settings; the slicer kind and relation are overridden per cell
        ground_truth: Optional true correspondence i -> j*
        target_geodesic: GeodesicMatrix of the target, needed with ground_truth

    Returns:
        Map (kind, relation) -> AblationCell; the (nonlinear, dependent) cell is solve(cfg)
    """
    cells = {}
    for kind in (SlicerKind.LINEAR, SlicerKind.NONLINEAR):
        for relation in (SlicerRelation.INDEPENDENT, SlicerRelation.DEPENDENT):
            cell_cfg = cfg.model_copy(update={
                "slicer": cfg.slicer.model_copy(update={"kind": kind, "relation": relation}),
            })
            result = solve(mu, nu, Cx, Cy, cell_cfg)
            error = None
            if ground_truth is not None and target_geodesic is not None:
                error = geodesic_error(plan_to_correspondence(result.best_plan), ground_truth, target_geodesic)
            cells[(kind, relation)] = AblationCell(kind, relation, result, error)
            logger.info(
                f"Ablation cell {kind.value}/{relation.value}: loss {result.best_loss:.6g}",
                extra={"seed": cfg.seed, "method": f"{kind.value}-{relation.value}"},
            )
    return cells
