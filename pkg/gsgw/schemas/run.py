"""Run configuration sections and result records."""
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gsgw.core.config import settings
from gsgw.schemas.base import BaseSchema
from gsgw.schemas.geometry import GraphKind
from gsgw.schemas.measures import CostConvention
from gsgw.schemas.solver import (
    Activation,
    AmortizedConfig,
    AnnealShape,
    OptimizerKind,
    SgwConfig,
    SgwMode,
    SinkhornConfig,
    SlicerKind,
    SlicerRelation,
    SolverConfig,
)

BASELINE_METHODS = ("brute_force", "frank_wolfe", "sinkhorn", "sgw_shared", "sgw_independent", "msgw")
BENCH_OPERATIONS = ("hard_plan", "soft_plan", "gw_loss", "sinkhorn", "frank_wolfe")
TOY_PAIRS = ("line_to_helix", "circle_to_sphere", "spiral_to_spring", "square_to_cube")


def _is_list(annotation) -> bool:
    origin = get_origin(annotation)
    if origin in (list, tuple):
        return True
    if origin is Union:
        return any(_is_list(arg) for arg in get_args(annotation))
    return False


class ConfigSection(BaseModel):
    """One ``section.key = value`` block; unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", str_strip_whitespace=True)

    @model_validator(mode="before")
    @classmethod
    def split_lists(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        out = dict(data)
        for name, info in cls.model_fields.items():
            value = out.get(name)
            if isinstance(value, str) and _is_list(info.annotation):
                out[name] = [item.strip() for item in value.split(",") if item.strip()]
        return out

    def overrides(self, exclude=()) -> Dict[str, Any]:
        """Explicitly set, non-null fields."""
        return {k: v for k, v in self.model_dump(exclude_none=True).items()
                if k in self.model_fields_set and k not in exclude}


class RunSection(ConfigSection):
    seeds: List[int] = Field(default_factory=lambda: list(settings.DEFAULT_SEEDS), min_length=1)
    out: Path = Path("results")

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, v: List[int]) -> List[int]:
        if any(seed < 0 for seed in v):
            raise ValueError("seeds must be non-negative")
        return v


class CostKind(str, Enum):
    EUCLIDEAN = "euclidean"
    GEODESIC = "geodesic"


class DataSection(ConfigSection):
    source: Optional[Path] = None
    target: Optional[Path] = None
    source_labels: Optional[Path] = None
    target_labels: Optional[Path] = None
    ground_truth: Optional[Path] = None
    cost: CostKind = CostKind.EUCLIDEAN
    convention: CostConvention = CostConvention.DISTANCE
    normalize: bool = False
    k: int = Field(default=20, ge=1)
    graph: GraphKind = GraphKind.AUTO


class SolverPreset(str, Enum):
    MATCHING = "matching"
    INTERPOLATION = "interpolation"
    DESK = "desk"


class SolverSection(ConfigSection):
    """Solver preset with optional per-field overrides."""
    preset: SolverPreset = SolverPreset.DESK
    steps: Optional[int] = Field(default=None, ge=1)
    lr: Optional[float] = Field(default=None, gt=0)
    optimizer: Optional[OptimizerKind] = None
    weight_decay: Optional[float] = Field(default=None, ge=0)
    warmup_steps: Optional[int] = Field(default=None, ge=0)
    grad_clip: Optional[float] = Field(default=None, gt=0)
    restarts: Optional[int] = Field(default=None, ge=1)
    eval_every: Optional[int] = Field(default=None, ge=1)
    alpha_start: Optional[float] = Field(default=None, gt=0)
    alpha_end: Optional[float] = Field(default=None, gt=0)
    anneal_shape: Optional[AnnealShape] = None


class SlicerSection(ConfigSection):
    kind: Optional[SlicerKind] = None
    relation: Optional[SlicerRelation] = None
    hidden_width: Optional[int] = Field(default=None, ge=1)
    depth: Optional[int] = Field(default=None, ge=1)
    activation: Optional[Activation] = None
    rff_features: Optional[int] = Field(default=None, ge=0)
    rff_bandwidth: Optional[float] = Field(default=None, gt=0)
    lift_hidden_width: Optional[int] = Field(default=None, ge=1)
    lift_depth: Optional[int] = Field(default=None, ge=1)


class SgwSection(ConfigSection):
    num_directions: int = Field(default=500, ge=1)
    maxmin_iters: int = Field(default=100, ge=1)
    maxmin_restarts: int = Field(default=10, ge=1)
    maxmin_lr: float = Field(default=0.1, gt=0)


class SinkhornSection(ConfigSection):
    epsilons: List[float] = Field(default_factory=lambda: [0.05, 0.5, 1.0], min_length=1)
    outer_iters: int = Field(default=100, ge=1)
    inner_iters: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-9, gt=0)


class BaselineSection(ConfigSection):
    methods: List[str] = Field(default_factory=lambda: list(BASELINE_METHODS), min_length=1)
    fw_iters: int = Field(default=100, ge=1)

    @field_validator("methods")
    @classmethod
    def check_methods(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(BASELINE_METHODS))
        if unknown:
            raise ValueError(f"unknown baseline methods {unknown}; choose from {list(BASELINE_METHODS)}")
        return v


class MeshSection(ConfigSection):
    n_land: int = Field(default=18, ge=1)
    n_rep: int = Field(default=4, ge=1)
    baselines: List[str] = Field(default_factory=lambda: ["frank_wolfe"])

    @field_validator("baselines")
    @classmethod
    def check_baselines(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - {"frank_wolfe", "sinkhorn"})
        if unknown:
            raise ValueError(f"mesh baselines must be frank_wolfe or sinkhorn, got {unknown}")
        return v


class InterpolateSection(ConfigSection):
    clouds: List[Path] = Field(default_factory=list)
    t: List[float] = Field(default_factory=lambda: [0.33, 0.67], min_length=1)

    @field_validator("t")
    @classmethod
    def check_t(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= t <= 1.0 for t in v):
            raise ValueError("interpolation times must lie in [0, 1]")
        return v


class BenchSection(ConfigSection):
    sizes: List[int] = Field(default_factory=lambda: [100, 200, 400, 800], min_length=2)
    extraction_sizes: List[int] = Field(default_factory=lambda: [10_000, 100_000, 1_000_000], min_length=2)
    repeats: int = Field(default=10, ge=1)
    operations: List[str] = Field(default_factory=lambda: list(BENCH_OPERATIONS), min_length=1)

    @field_validator("operations")
    @classmethod
    def check_operations(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(BENCH_OPERATIONS))
        if unknown:
            raise ValueError(f"unknown bench operations {unknown}")
        return v


class AmortizedSection(ConfigSection):
    """Matcher settings (desk preset plus overrides) and the synthetic data sizes."""
    preset: str = "desk"
    k_neighbors: Optional[int] = Field(default=None, ge=1)
    token_dim: Optional[int] = Field(default=None, ge=1)
    latent_dim: Optional[int] = Field(default=None, ge=1)
    attention: Optional[bool] = None
    with_coordinates: Optional[bool] = None
    lr: Optional[float] = Field(default=None, gt=0)
    weight_decay: Optional[float] = Field(default=None, ge=0)
    warmup_epochs: Optional[int] = Field(default=None, ge=0)
    grad_clip: Optional[float] = Field(default=None, gt=0)
    alpha_start: Optional[float] = Field(default=None, gt=0)
    alpha_end: Optional[float] = Field(default=None, gt=0)
    fgw_lambda: Optional[float] = Field(default=None, ge=0, le=1)
    epochs: Optional[int] = Field(default=None, ge=1)
    pairs_per_epoch: Optional[int] = Field(default=None, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    train_shapes: int = Field(default=200, ge=1)
    eval_pairs: int = Field(default=50, ge=1)
    sizes: List[int] = Field(default_factory=lambda: [64, 128], min_length=1)
    checkpoint: Optional[Path] = None
    # pairs also solved per instance for the forward-time comparison; 0 disables
    solver_pairs: int = Field(default=1, ge=0)

    @field_validator("preset")
    @classmethod
    def check_preset(cls, v: str) -> str:
        if v not in ("desk", "default"):
            raise ValueError("amortized.preset must be desk or default")
        return v


class ToySection(ConfigSection):
    n_points: int = Field(default=40, ge=4)
    pairs: List[str] = Field(default_factory=lambda: list(TOY_PAIRS), min_length=1)

    @field_validator("pairs")
    @classmethod
    def check_pairs(cls, v: List[str]) -> List[str]:
        unknown = sorted(set(v) - set(TOY_PAIRS))
        if unknown:
            raise ValueError(f"unknown toy pairs {unknown}")
        return v


class RunConfig(BaseSchema):
    """Parsed experiment configuration; every section is optional."""
    run: RunSection = Field(default_factory=RunSection)
    data: DataSection = Field(default_factory=DataSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    slicer: SlicerSection = Field(default_factory=SlicerSection)
    sgw: SgwSection = Field(default_factory=SgwSection)
    sinkhorn: SinkhornSection = Field(default_factory=SinkhornSection)
    baseline: BaselineSection = Field(default_factory=BaselineSection)
    mesh: MeshSection = Field(default_factory=MeshSection)
    interpolate: InterpolateSection = Field(default_factory=InterpolateSection)
    bench: BenchSection = Field(default_factory=BenchSection)
    amortized: AmortizedSection = Field(default_factory=AmortizedSection)
    toy: ToySection = Field(default_factory=ToySection)

    def solver_config(self, seed: int) -> SolverConfig:
        """Preset named in solver.preset with the section and slicer overrides applied."""
        base = getattr(SolverConfig, self.solver.preset.value)(seed=seed).model_dump()
        overrides = self.solver.overrides(exclude=("preset", "alpha_start", "alpha_end", "anneal_shape"))
        base.update(overrides)
        anneal = base["anneal"]
        anneal["steps"] = base["steps"]
        for key, target in (("alpha_start", "alpha_start"), ("alpha_end", "alpha_end"),
                            ("anneal_shape", "shape")):
            value = getattr(self.solver, key)
            if value is not None:
                anneal[target] = value
        if "warmup_steps" not in overrides:
            base["warmup_steps"] = min(base["warmup_steps"], base["steps"])
        base["slicer"].update(self.slicer.overrides())
        return SolverConfig.model_validate(base)

    def sgw_config(self, mode: SgwMode, seed: int) -> SgwConfig:
        return SgwConfig(mode=mode, seed=seed, **self.sgw.model_dump())

    def sinkhorn_configs(self, seed: int) -> List[SinkhornConfig]:
        s = self.sinkhorn
        return [SinkhornConfig(epsilon=eps, outer_iters=s.outer_iters, inner_iters=s.inner_iters,
                               tol=s.tol, seed=seed) for eps in s.epsilons]

    def amortized_config(self, seed: int) -> AmortizedConfig:
        base = (AmortizedConfig.desk(seed=seed) if self.amortized.preset == "desk"
                else AmortizedConfig(seed=seed)).model_dump()
        base.update(self.amortized.overrides(
            exclude=("preset", "train_shapes", "eval_pairs", "sizes", "checkpoint", "solver_pairs")))
        return AmortizedConfig.model_validate(base)

    def resolve_paths(self, base_dir: Path) -> "RunConfig":
        """Copy with every relative path anchored at base_dir."""

        def anchor(value):
            if isinstance(value, Path) and not value.is_absolute():
                return base_dir / value
            if isinstance(value, list):
                return [anchor(v) for v in value]
            return value

        sections = {}
        for name in type(self).model_fields:
            section = getattr(self, name)
            updates = {key: anchor(getattr(section, key)) for key in type(section).model_fields}
            sections[name] = section.model_copy(update=updates)
        return RunConfig(**sections)


class ResultRecord(BaseSchema):
    """One line of results.jsonl."""
    run_id: str
    command: str
    seed: int
    config_hash: str
    metrics: Dict[str, Any] = Field(default_factory=dict)
    # wall-clock values; everything in metrics is reproducible given (config, seed)
    timings: Dict[str, Any] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)
    created_at: str
