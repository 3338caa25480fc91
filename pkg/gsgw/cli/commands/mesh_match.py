"""``gsgw mesh-match``: shape correspondence on graph-geodesic costs."""
import argparse
import time
from typing import List

import numpy as np

from gsgw.cli.deps import CommandContext, load_ground_truth, load_shape, oriented_solve
from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ConfigError, NumericError, UnsupportedMarginalsError
from gsgw.repositories.result_repository import LANDMARK_HEADER
from gsgw.schemas.run import ResultRecord
from gsgw.services.baselines import frank_wolfe_gw, sinkhorn_gw
from gsgw.services.measures import uniform_measure
from gsgw.services.solver import ablation_grid
from gsgw.services.geometry import (
    geodesic_error,
    geodesic_matrix,
    landmark_correspondences,
    plan_to_correspondence,
)

logger = get_logger(__name__)

NAME = "mesh-match"


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, parents=parents,
                                   help="Match two meshes and report geodesic error and landmarks")
    parser.add_argument("--ablation", action="store_true",
                        help="Also solve under every slicer kind x relation and report their errors")
    return parser


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """
    Geodesic error of min-GSGW and the configured baselines, per seed.

    Without data.ground_truth the meshes must have equal vertex counts and
    vertex i of the source corresponds to vertex i of the target.
    """
    data, mesh_cfg = ctx.config.data, ctx.config.mesh
    source = load_shape(ctx, ctx.require(data.source, "data.source"))
    target = load_shape(ctx, ctx.require(data.target, "data.target"))
    Gx = geodesic_matrix(source, k=data.k, normalize=True, graph=data.graph)
    Gy = geodesic_matrix(target, k=data.k, normalize=True, graph=data.graph)

    truth = load_ground_truth(ctx, source.vertices.n)
    if truth is None:
        if source.vertices.n != target.vertices.n:
            raise ConfigError("data.ground_truth is required when the meshes differ in size")
        logger.info("No ground truth given; using vertex order", extra={"command": NAME})
        truth = np.arange(source.vertices.n)

    records = []
    for seed in ctx.seeds:
        errors, timings, failed = {}, {}, {}
        start = time.perf_counter()
        result, plan = oriented_solve(source.vertices, target.vertices, Gx.cost, Gy.cost,
                                      ctx.config.solver_config(seed))
        timings["min_gsgw_ms"] = (time.perf_counter() - start) * 1000.0
        errors["min_gsgw"] = geodesic_error(plan_to_correspondence(plan), truth, Gy)

        for method in mesh_cfg.baselines:
            configs = ctx.config.sinkhorn_configs(seed) if method == "sinkhorn" else [None]
            for cfg in configs:
                label = method if cfg is None else f"sinkhorn_{cfg.epsilon:g}"
                start = time.perf_counter()
                try:
                    if cfg is None:
                        baseline_plan = frank_wolfe_gw(Gx.cost, Gy.cost, iters=ctx.config.baseline.fw_iters)
                    else:
                        baseline_plan = sinkhorn_gw(Gx.cost, Gy.cost, epsilon=cfg.epsilon,
                                                    outer_iters=cfg.outer_iters, inner_iters=cfg.inner_iters,
                                                    tol=cfg.tol, seed=cfg.seed)
                except (UnsupportedMarginalsError, NumericError) as exc:
                    logger.warning(f"{label} failed: {exc}", extra={"method": label, "seed": seed})
                    failed[label] = type(exc).__name__
                    continue
                timings[f"{label}_ms"] = (time.perf_counter() - start) * 1000.0
                errors[label] = geodesic_error(plan_to_correspondence(baseline_plan), truth, Gy)

        if args.ablation:
            if source.vertices.dim > target.vertices.dim:
                raise ConfigError("--ablation needs the source dimension to not exceed the target's")
            cells = ablation_grid(uniform_measure(source.vertices), uniform_measure(target.vertices),
                                  Gx.cost, Gy.cost, ctx.config.solver_config(seed), truth, Gy)
            for (kind, relation), cell in cells.items():
                errors[f"ablation_{kind.value}_{relation.value}"] = cell.geodesic_error

        landmark_sets = landmark_correspondences(plan, source.vertices, mesh_cfg.n_land, mesh_cfg.n_rep, seed)
        artifacts = {
            f"landmarks_{ls.repetition}": ctx.results.write_csv(
                ctx.artifact_name(seed, f"landmarks_{ls.repetition}.csv"), LANDMARK_HEADER,
                [(int(s), int(d)) for s, d in zip(ls.src_idx, ls.dst_idx)],
            )
            for ls in landmark_sets
        }
        artifacts["plan"] = ctx.results.write_plan(ctx.artifact_name(seed, "plan.csv"), plan)
        metrics = {
            "geodesic_error": errors,
            "best_loss": result.best_loss,
            "failed": failed,
            "graph": Gx.graph.value,
        }
        logger.info(f"Seed {seed}: geodesic error {errors['min_gsgw']:.4g}", extra={"seed": seed, "command": NAME})
        records.append(ctx.record(seed, metrics, artifacts, timings))
    return records
