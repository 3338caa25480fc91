"""``gsgw interpolate``: barycentric interpolation along a sequence of clouds."""
import argparse
from typing import List

from gsgw.cli.deps import CommandContext, load_shape, oriented_solve, shape_costs
from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ConfigError
from gsgw.schemas.run import ResultRecord
from gsgw.services.geometry import barycentric_interpolate
from gsgw.services.measures import gw_loss

logger = get_logger(__name__)

NAME = "interpolate"


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(NAME, parents=parents,
                                 help="Write interpolated clouds between consecutive inputs")


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """
    Solve a plan between each consecutive pair and move the earlier cloud
    toward the later one at every configured t.

    The sequence is interpolate.clouds, or data.source then data.target.
    """
    paths = list(ctx.config.interpolate.clouds)
    if not paths:
        data = ctx.config.data
        paths = [ctx.require(data.source, "data.source"), ctx.require(data.target, "data.target")]
    if len(paths) < 2:
        raise ConfigError("interpolation needs at least two clouds")
    shapes = [load_shape(ctx, path) for path in paths]
    costs = [shape_costs(ctx, shape)[0] for shape in shapes]

    records = []
    for seed in ctx.seeds:
        cfg = ctx.config.solver_config(seed)
        artifacts, segment_losses = {}, []
        for k in range(len(shapes) - 1):
            X, Y = shapes[k].vertices, shapes[k + 1].vertices
            _, plan = oriented_solve(X, Y, costs[k], costs[k + 1], cfg)
            loss = gw_loss(costs[k], costs[k + 1], plan)
            segment_losses.append(loss)
            logger.info(f"Segment {k}: GW value of the plan {loss:.6g}", extra={"seed": seed, "step": k})
            for t in ctx.config.interpolate.t:
                moved = barycentric_interpolate(X, Y, plan, t)
                name = f"segment{k}_t{t:g}"
                artifacts[name] = ctx.results.write_npy(ctx.artifact_name(seed, f"{name}.npy"), moved.points)
        records.append(ctx.record(seed, {"gw_loss": segment_losses, "t": list(ctx.config.interpolate.t)},
                                  artifacts))
    return records
