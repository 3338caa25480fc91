"""``gsgw bench``: wall-clock scaling of plan extraction, losses and baselines."""
import argparse
from typing import Callable, Dict, List, Sequence

from gsgw.cli.deps import CommandContext
from gsgw.core.logging import get_logger
from gsgw.core.rng import make_rng
from gsgw.repositories.result_repository import BENCH_HEADER
from gsgw.schemas.measures import PointCloud
from gsgw.schemas.run import ResultRecord
from gsgw.services.baselines import frank_wolfe_gw, sinkhorn_gw
from gsgw.services.measures import build_cost_matrix, gw_loss
from gsgw.services.monotone_plan import hard_plan, hard_plan_sparse
from gsgw.services.softsort import soft_plan
from gsgw.services.timing import TimingRecorder, doubling_ratios, loglog_slope

logger = get_logger(__name__)

NAME = "bench"
SOFT_TAU = 0.1


def add_parser(subparsers, parents) -> argparse.ArgumentParser:
    return subparsers.add_parser(NAME, parents=parents, help="Time plan extraction, losses and baselines")


def _operation(ctx: CommandContext, name: str, n: int, seed: int) -> Callable[[], object]:
    """Zero-argument call of one operation on a seeded size-n instance; inputs are built outside the timing."""
    rng = make_rng(seed, "bench", name, n)
    if name == "hard_plan":
        s, t = rng.standard_normal(n), rng.standard_normal(n)
        return lambda: hard_plan_sparse(s, t)
    if name == "soft_plan":
        s, t = rng.standard_normal(n), rng.standard_normal(n)
        return lambda: soft_plan(s, t, SOFT_TAU)

    Cx = build_cost_matrix(PointCloud(rng.standard_normal((n, 3))))
    Cy = build_cost_matrix(PointCloud(rng.standard_normal((n, 3))))
    if name == "gw_loss":
        plan = hard_plan(rng.standard_normal(n), rng.standard_normal(n))
        return lambda: gw_loss(Cx, Cy, plan)
    if name == "sinkhorn":
        cfg = ctx.config.sinkhorn_configs(seed)[0]
        return lambda: sinkhorn_gw(Cx, Cy, epsilon=cfg.epsilon, outer_iters=cfg.outer_iters,
                                   inner_iters=cfg.inner_iters, tol=cfg.tol, seed=seed)
    return lambda: frank_wolfe_gw(Cx, Cy, iters=ctx.config.baseline.fw_iters)


def _sizes(ctx: CommandContext, name: str) -> Sequence[int]:
    bench = ctx.config.bench
    return bench.extraction_sizes if name == "hard_plan" else bench.sizes


def run(ctx: CommandContext, args: argparse.Namespace) -> List[ResultRecord]:
    """
    Mean and standard deviation over bench.repeats calls per (operation, size),
    after two discarded warmup calls.
    """
    bench = ctx.config.bench
    records = []
    for seed in ctx.seeds:
        recorder = TimingRecorder()
        rows, means = [], {}
        for name in bench.operations:
            means[name] = []
            for n in _sizes(ctx, name):
                stats = recorder.time_call(_operation(ctx, name, n, seed), repeats=bench.repeats)
                means[name].append(stats.mean_ms)
                rows.append((name, n, n, stats.mean_ms, stats.std_ms, stats.repeats))
                logger.info(f"{name} n={n}: {stats.mean_ms:.3f} ms", extra={"method": name, "seed": seed})

        timings: Dict[str, object] = {"mean_ms": means, "recorder": recorder.summary()}
        if "hard_plan" in means:
            timings["extraction_doubling_ratios"] = doubling_ratios(means["hard_plan"], bench.extraction_sizes)
        if "gw_loss" in means:
            timings["gw_loss_loglog_slope"] = loglog_slope(bench.sizes, means["gw_loss"])
        table = ctx.results.write_csv(ctx.artifact_name(seed, "timings.csv"), BENCH_HEADER, rows)
        metrics = {
            "sizes": list(bench.sizes),
            "extraction_sizes": list(bench.extraction_sizes),
            "repeats": bench.repeats,
            "operations": list(bench.operations),
        }
        records.append(ctx.record(seed, metrics, {"timings": table}, timings))
    return records
