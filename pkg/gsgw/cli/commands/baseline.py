"""``gsgw baseline``: reference solvers on the configured instance."""
import argparse
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from gsgw.cli.deps import CommandContext, Instance, load_instance
from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import (
    InvalidInputError,
    NumericError,
    SizeError,
    UnsupportedMarginalsError,
)
from gsgw.repositories.result_repository import BASELINE_HEADER
from gsgw.schemas.measures import Coupling
from gsgw.schemas.run import ResultRecord
from gsgw.schemas.solver import SgwMode
from gsgw.services.baselines import brute_force_gw, frank_wolfe_gw, sgw, sinkhorn_gw
from gsgw.services.measures import gw_loss, uniform_measure

logger = get_logger(__name__)

NAME = "baseline"

# failures recorded in the table instead of aborting the run
RECORDED_ERRORS = (UnsupportedMarginalsError, SizeError, InvalidInputError, NumericError)

SGW_MODES = {"sgw_shared": SgwMode.SHARED, "sgw_independent": SgwMode.INDEPENDENT, "msgw": SgwMode.MAXMIN}

# (loss, plan or None for plan-free estimates)
Outcome = Tuple[float, Optional[Coupling]]


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(NAME, parents=parents, help="Run brute force, Frank-Wolfe, Sinkhorn and sliced GW")


def _brute_force(inst: Instance) -> Outcome:
    found = brute_force_gw(inst.Cx, inst.Cy)
    n = found.best_perm.shape[0]
    plan = np.zeros((n, n))
    plan[np.arange(n), found.best_perm] = 1.0 / n
    return found.best_loss, Coupling(plan)


def _plan_outcome(inst: Instance, plan: Coupling) -> Outcome:
    return gw_loss(inst.Cx, inst.Cy, plan), plan


def _methods(ctx: CommandContext, inst: Instance, seed: int) -> List[Tuple[str, Callable[[], Outcome]]]:
    """Named zero-argument solver calls in config order; Sinkhorn expands to one per epsilon."""
    config = ctx.config
    methods = []
    for method in config.baseline.methods:
        if method == "brute_force":
            methods.append((method, lambda: _brute_force(inst)))
        elif method == "frank_wolfe":
            methods.append((method, lambda: _plan_outcome(
                inst, frank_wolfe_gw(inst.Cx, inst.Cy, iters=config.baseline.fw_iters))))
        elif method == "sinkhorn":
            for cfg in config.sinkhorn_configs(seed):
                methods.append((f"sinkhorn_{cfg.epsilon:g}", lambda cfg=cfg: _plan_outcome(inst, sinkhorn_gw(
                    inst.Cx, inst.Cy, epsilon=cfg.epsilon, outer_iters=cfg.outer_iters,
                    inner_iters=cfg.inner_iters, tol=cfg.tol, seed=cfg.seed))))
        else:
            cfg = config.sgw_config(SGW_MODES[method], seed)
            methods.append((method, lambda cfg=cfg: (
                sgw(uniform_measure(inst.X), uniform_measure(inst.Y), cfg), None)))
    return methods


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """One CSV row per method and seed: method, seed, loss, feasibility_err, time_ms."""
    inst = load_instance(ctx)
    records = []
    for seed in ctx.seeds:
        rows, losses, failures, timings = [], {}, {}, {}
        for method, call in _methods(ctx, inst, seed):
            start = time.perf_counter()
            try:
                loss, plan = call()
            except RECORDED_ERRORS as exc:
                logger.warning(f"{method} failed: {type(exc).__name__}: {exc}",
                               extra={"method": method, "seed": seed})
                failures[method] = type(exc).__name__
                rows.append((method, seed, type(exc).__name__, "", ""))
                continue
            elapsed = (time.perf_counter() - start) * 1000.0
            feasibility = "" if plan is None else plan.marginal_error()
            losses[method] = loss
            timings[f"{method}_ms"] = elapsed
            rows.append((method, seed, loss, feasibility, elapsed))

        table = ctx.results.write_csv(ctx.artifact_name(seed, "table.csv"), BASELINE_HEADER, rows)
        records.append(ctx.record(seed, {"loss": losses, "failed": failures}, {"table": table}, timings))
    return records
