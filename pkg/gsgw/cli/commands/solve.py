"""``gsgw solve``: min-GSGW on one source/target pair."""
import argparse
from typing import List

from gsgw.cli.deps import CommandContext, load_ground_truth, load_instance, oriented_solve
from gsgw.core.logging import get_logger
from gsgw.repositories.result_repository import TRACE_HEADER
from gsgw.schemas.run import ResultRecord
from gsgw.services.geometry import geodesic_error, geodesic_matrix, plan_to_correspondence

logger = get_logger(__name__)

NAME = "solve"


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(NAME, parents=parents, help="Solve min-GSGW between data.source and data.target")


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """Hard plan, loss trace and summary per seed."""
    inst = load_instance(ctx)
    truth = load_ground_truth(ctx, inst.X.n)
    target_geo = inst.target_geodesic
    if truth is not None and target_geo is None:
        data = ctx.config.data
        target_geo = geodesic_matrix(inst.target, k=data.k, normalize=True, graph=data.graph)

    records = []
    for seed in ctx.seeds:
        result, plan = oriented_solve(inst.X, inst.Y, inst.Cx, inst.Cy, ctx.config.solver_config(seed))
        artifacts = {
            "plan": ctx.results.write_plan(ctx.artifact_name(seed, "plan.csv"), plan),
            "trace": ctx.results.write_csv(
                ctx.artifact_name(seed, "trace.csv"), TRACE_HEADER,
                [(point.step, point.loss, point.tau) for point in result.loss_trace],
            ),
        }
        metrics = {
            "best_loss": result.best_loss,
            "best_restart": result.best_restart,
            "restart_losses": result.restart_losses,
            "diverged_restarts": result.diverged_restarts,
            "n": inst.X.n,
            "m": inst.Y.n,
        }
        if truth is not None:
            metrics["geodesic_error"] = geodesic_error(plan_to_correspondence(plan), truth, target_geo)
        timings = {
            "wall_time_ms": result.wall_time_ms,
            "train_ms": result.train_ms,
            "plan_extract_ms": result.plan_extract_ms,
        }
        logger.info(f"Seed {seed}: best loss {result.best_loss:.6g}", extra={"seed": seed, "command": NAME})
        records.append(ctx.record(seed, metrics, artifacts, timings))
    return records
