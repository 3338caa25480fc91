"""``gsgw amortized {train,eval,constraints}``: the one-pass matcher on synthetic shapes."""
import argparse
import time
from pathlib import Path
from typing import List

import numpy as np

from gsgw.cli.deps import CommandContext, oriented_solve
from gsgw.core.logging import get_logger
from gsgw.core.rng import derive_seed
from gsgw.exceptions.exceptions import InternalConsistencyError
from gsgw.repositories.result_repository import TRACE_HEADER
from gsgw.schemas.run import ResultRecord
from gsgw.services.amortized import (
    MatcherParams,
    check_constraints,
    evaluate_pair,
    init_matcher,
    train_amortized,
)
from gsgw.services.datasets import make_dataset, make_pair_dataset
from gsgw.services.measures import build_cost_matrix

logger = get_logger(__name__)

NAME = "amortized"
ACTIONS = ("train", "eval", "constraints")
CONSTRAINT_CLOUDS = 4


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, parents=parents, help="Train, evaluate or check the amortized matcher")
    parser.add_argument("action", choices=ACTIONS)
    return parser


def checkpoint_path(ctx: CommandContext, seed: int) -> Path:
    """amortized.checkpoint with the seed appended to its stem, or amortized_<seed>.gsgw under the output dir."""
    configured = ctx.config.amortized.checkpoint
    if configured is None:
        return ctx.checkpoints.resolve(f"{NAME}_{seed}.gsgw")
    return configured.with_name(f"{configured.stem}_{seed}{configured.suffix}")


def load_params(ctx: CommandContext, seed: int) -> MatcherParams:
    return MatcherParams.from_arrays(ctx.checkpoints.load(checkpoint_path(ctx, seed)))


def _train(ctx: CommandContext, seed: int) -> ResultRecord:
    section = ctx.config.amortized
    cfg = ctx.config.amortized_config(seed)
    dataset = make_dataset(section.train_shapes, derive_seed(seed, "train"), sizes=section.sizes)
    result = train_amortized(dataset, init_matcher(cfg), cfg)
    artifacts = {
        "checkpoint": ctx.checkpoints.save(checkpoint_path(ctx, seed), result.params.to_arrays()),
        "trace": ctx.results.write_csv(
            ctx.artifact_name(seed, "train_trace.csv"), TRACE_HEADER,
            [(step, loss, tau) for step, (loss, tau) in enumerate(zip(result.loss_trace, result.tau_trace))],
        ),
    }
    metrics = {
        "epoch_losses": result.epoch_losses,
        "final_loss": result.epoch_losses[-1],
        "lr": result.lr,
        "retried": result.retried,
        "parameters": result.params.size,
    }
    return ctx.record(seed, metrics, artifacts)


def _evaluate(ctx: CommandContext, seed: int) -> ResultRecord:
    """Label transfer on held-out same-kind pairs, with the per-instance solver as speed reference."""
    section = ctx.config.amortized
    params = load_params(ctx, seed)
    pairs = make_pair_dataset(section.eval_pairs, derive_seed(seed, "eval"), sizes=section.sizes)
    evaluations = [evaluate_pair(params, pair.source, pair.target) for pair in pairs]
    accuracy = float(np.mean([e.accuracy for e in evaluations]))
    baseline = float(np.mean([e.baseline for e in evaluations]))
    forward_ms = float(np.mean([e.forward_ms for e in evaluations]))
    timings = {"forward_ms": forward_ms}

    solver_ms = []
    for pair in pairs[: section.solver_pairs]:
        X, Y = pair.source.cloud, pair.target.cloud
        start = time.perf_counter()
        oriented_solve(X, Y, build_cost_matrix(X), build_cost_matrix(Y), ctx.config.solver_config(seed))
        solver_ms.append((time.perf_counter() - start) * 1000.0)
    if solver_ms:
        reference = [e.forward_ms for e in evaluations[: len(solver_ms)]]
        timings["solver_ms"] = float(np.mean(solver_ms))
        timings["speedup"] = float(np.mean(solver_ms) / max(np.mean(reference), 1e-9))

    metrics = {
        "accuracy": accuracy,
        "random_baseline": baseline,
        "margin": accuracy - baseline,
        "pairs": len(evaluations),
        "per_pair_accuracy": [e.accuracy for e in evaluations],
    }
    logger.info(f"Seed {seed}: accuracy {accuracy:.3f} vs random {baseline:.3f}",
                extra={"seed": seed, "command": NAME})
    return ctx.record(seed, metrics, {"checkpoint": checkpoint_path(ctx, seed)}, timings)


def _constraints(ctx: CommandContext, seed: int) -> ResultRecord:
    """
    Constraint suites on the seed's checkpoint, or on an untrained matcher
    when none has been written.
    """
    path = checkpoint_path(ctx, seed)
    if path.is_file():
        params = load_params(ctx, seed)
    else:
        logger.info("No checkpoint found; checking an untrained matcher", extra={"path": str(path)})
        params = init_matcher(ctx.config.amortized_config(seed))
    clouds = make_dataset(CONSTRAINT_CLOUDS, derive_seed(seed, "constraints"), sizes=ctx.config.amortized.sizes)
    reports = check_constraints(params, clouds, seed=seed)
    metrics = {
        name: {"passed": r.passed, "max_deviation": r.max_deviation, "cases": r.cases}
        for name, r in reports.items()
    }
    metrics["passed"] = all(r.passed for r in reports.values())
    return ctx.record(seed, metrics)


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """
    Raises:
        InternalConsistencyError: If a constraint suite fails; the records are written first
    """
    handler = {"train": _train, "eval": _evaluate, "constraints": _constraints}[args.action]
    records = [handler(ctx, seed) for seed in ctx.seeds]
    if args.action == "constraints":
        failed = sorted({name for r in records for name, v in r.metrics.items()
                         if isinstance(v, dict) and not v["passed"]})
        if failed:
            raise InternalConsistencyError(f"constraint suites failed: {failed}")
    return records
