"""Command dependencies: loaded config, repositories and instance loading."""
import argparse
import hashlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ConfigError
from gsgw.repositories.checkpoint_repository import CheckpointRepository
from gsgw.repositories.config_repository import (
    ConfigRepository,
    LoadedConfig,
    build_run_config,
    canonical_text,
    config_hash,
)
from gsgw.repositories.mesh_repository import MeshRepository
from gsgw.repositories.result_repository import ResultRepository, jsonable
from gsgw.schemas.geometry import GeodesicMatrix, Mesh
from gsgw.schemas.measures import CostConvention, CostMatrix, Coupling, PointCloud
from gsgw.schemas.run import CostKind, ResultRecord, RunConfig
from gsgw.schemas.solver import SolverConfig
from gsgw.services.geometry import geodesic_matrix, normalize_cloud
from gsgw.services.measures import build_cost_matrix, uniform_measure
from gsgw.services.solver import SolveResult, solve

logger = get_logger(__name__)


@dataclass
class CommandContext:
    """Everything a command handler needs for one invocation."""
    command: str
    loaded: LoadedConfig
    seeds: List[int]
    results: ResultRepository
    meshes: MeshRepository
    checkpoints: CheckpointRepository

    @property
    def config(self) -> RunConfig:
        return self.loaded.config

    def run_id(self, seed: int) -> str:
        """Stable id of (config, command, seed)."""
        key = f"{self.loaded.hash}:{self.command}:{seed}"
        return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]

    def artifact_name(self, seed: int, suffix: str) -> str:
        return f"{self.command}_{seed}_{suffix}"

    def record(
        self,
        seed: int,
        metrics: Dict[str, Any],
        artifacts: Optional[Dict[str, Path]] = None,
        timings: Optional[Dict[str, Any]] = None,
    ) -> ResultRecord:
        """
        Append the run's record to results.jsonl and write its JSON summary.

        Artifact paths are stored relative to the output directory.
        """
        relative = {}
        for name, path in (artifacts or {}).items():
            path = Path(path)
            try:
                relative[name] = str(path.relative_to(self.results.root))
            except ValueError:
                relative[name] = str(path)
        record = ResultRecord(
            run_id=self.run_id(seed),
            command=self.command,
            seed=seed,
            config_hash=self.loaded.hash,
            metrics=jsonable(metrics),
            artifacts=relative,
            timings=jsonable(timings or {}),
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        self.results.append_record(record)
        self.results.write_summary(self.command, seed, record.model_dump())
        return record

    def require(self, value: Optional[Path], key: str) -> Path:
        if value is None:
            raise ConfigError(f"{self.command} needs {key} in the config")
        return value


def _load_config(path: Optional[Path]) -> LoadedConfig:
    if path is not None:
        return ConfigRepository().load(path)
    # no file: every section at its defaults, paths relative to the working directory
    config = build_run_config({}, Path.cwd(), "<defaults>")
    return LoadedConfig(config, {}, canonical_text({}), config_hash({}), None)


def build_context(command: str, args: argparse.Namespace) -> CommandContext:
    """
    Load the config named on the command line and apply --seed / --out.

    Raises:
        ConfigError: On a negative --seed or an invalid config
        ParseError: If the config file is missing
    """
    loaded = _load_config(getattr(args, "config", None))
    seeds = list(loaded.config.run.seeds)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        seeds = [args.seed]
    out = getattr(args, "out", None) or loaded.config.run.out
    logger.info(f"Running {command} for seeds {seeds}", extra={"command": command, "path": str(out)})
    return CommandContext(
        command=command,
        loaded=loaded,
        seeds=seeds,
        results=ResultRepository(out),
        meshes=MeshRepository(),
        checkpoints=CheckpointRepository(out),
    )


# -- instances ------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """Two loaded shapes with the intra-space costs the solvers see."""
    source: Mesh
    target: Mesh
    Cx: CostMatrix
    Cy: CostMatrix
    target_geodesic: Optional[GeodesicMatrix] = None

    @property
    def X(self) -> PointCloud:
        return self.source.vertices

    @property
    def Y(self) -> PointCloud:
        return self.target.vertices


def load_shape(ctx: CommandContext, path: Path) -> Mesh:
    """Mesh or cloud from disk, normalized when data.normalize is set."""
    mesh = ctx.meshes.load_mesh(path)
    if ctx.config.data.normalize:
        logger.info("Normalizing to zero mean and unit max norm", extra={"path": str(path)})
        mesh = Mesh(normalize_cloud(mesh.vertices), mesh.faces, mesh.source_format)
    return mesh


def shape_costs(ctx: CommandContext, shape: Mesh) -> Tuple[CostMatrix, Optional[GeodesicMatrix]]:
    """Euclidean or graph-geodesic costs in the configured convention."""
    data = ctx.config.data
    if data.cost is CostKind.EUCLIDEAN:
        return build_cost_matrix(shape.vertices, data.convention), None
    geo = geodesic_matrix(shape, k=data.k, normalize=True, graph=data.graph)
    if data.convention is CostConvention.SQUARED_DISTANCE:
        return CostMatrix(geo.entries ** 2, CostConvention.SQUARED_DISTANCE), geo
    return geo.cost, geo


def load_instance(ctx: CommandContext) -> Instance:
    """Source and target from data.source / data.target with their costs."""
    data = ctx.config.data
    source = load_shape(ctx, ctx.require(data.source, "data.source"))
    target = load_shape(ctx, ctx.require(data.target, "data.target"))
    Cx, _ = shape_costs(ctx, source)
    Cy, target_geo = shape_costs(ctx, target)
    return Instance(source, target, Cx, Cy, target_geo)


def load_ground_truth(ctx: CommandContext, n: int) -> Optional[np.ndarray]:
    """data.ground_truth as one target index per source point, if configured."""
    path = ctx.config.data.ground_truth
    if path is None:
        return None
    truth = ctx.meshes.load_labels(path)
    if truth.shape[0] != n:
        raise ConfigError(f"ground truth has {truth.shape[0]} entries for {n} source points")
    return truth


def oriented_solve(X: PointCloud, Y: PointCloud, Cx, Cy, cfg: SolverConfig) -> Tuple[SolveResult, Coupling]:
    """
    Run the solver with the lower-dimensional measure as source.

    Returns:
        The solver result and its best plan in the caller's (X, Y) orientation
    """
    if X.dim <= Y.dim:
        result = solve(uniform_measure(X), uniform_measure(Y), Cx, Cy, cfg)
        return result, result.best_plan
    logger.info(f"Swapping source (p={X.dim}) and target (q={Y.dim})", extra={"seed": cfg.seed})
    result = solve(uniform_measure(Y), uniform_measure(X), Cy, Cx, cfg)
    return result, result.best_plan.transpose()
