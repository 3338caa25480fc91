"""Hyperparameter schemas for slicers, solvers and baselines."""
from enum import Enum
from typing import Optional

from pydantic import Field, model_validator

from gsgw.schemas.base import FrozenSchema


class AnnealShape(str, Enum):
    EXPONENTIAL = "exponential"
    LINEAR = "linear"


class Activation(str, Enum):
    RELU = "relu"
    GELU = "gelu"
    TANH = "tanh"


class OptimizerKind(str, Enum):
    ADAM = "adam"
    ADAMW = "adamw"


class SlicerKind(str, Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class SlicerRelation(str, Enum):
    DEPENDENT = "dependent"
    INDEPENDENT = "independent"


class SgwMode(str, Enum):
    SHARED = "shared"
    INDEPENDENT = "independent"
    MAXMIN = "maxmin"


class AnnealSchedule(FrozenSchema):
    """Temperature schedule driving the soft sort towards the hard plan."""
    alpha_start: float = Field(..., gt=0)
    alpha_end: float = Field(..., gt=0)
    steps: int = Field(..., ge=1)
    shape: AnnealShape = AnnealShape.EXPONENTIAL

    @model_validator(mode="after")
    def check_order(self) -> "AnnealSchedule":
        if self.alpha_end > self.alpha_start:
            raise ValueError("alpha_end must not exceed alpha_start")
        return self


class MlpSpec(FrozenSchema):
    """Shape of one slicer or lifting network."""
    in_dim: int = Field(..., ge=1)
    out_dim: int = Field(..., ge=1)
    hidden_width: int = Field(default=64, ge=1)
    depth: int = Field(default=3, ge=1)
    activation: Activation = Activation.GELU
    rff_features: int = Field(default=0, ge=0)
    rff_bandwidth: float = Field(default=1.0, gt=0)
    bias: bool = True


class SlicerConfig(FrozenSchema):
    """Architecture of the slicer pair built for every restart."""
    kind: SlicerKind = SlicerKind.NONLINEAR
    relation: SlicerRelation = SlicerRelation.DEPENDENT
    hidden_width: int = Field(default=128, ge=1)
    depth: int = Field(default=4, ge=1)
    activation: Activation = Activation.GELU
    rff_features: int = Field(default=32, ge=0)
    rff_bandwidth: float = Field(default=1.0, gt=0)
    # the lifting defaults to the slicer's width and depth
    lift_hidden_width: Optional[int] = Field(default=None, ge=1)
    lift_depth: Optional[int] = Field(default=None, ge=1)


class SolverConfig(FrozenSchema):
    """Optimization settings of one min-GSGW solve."""
    steps: int = Field(..., ge=1)
    lr: float = Field(..., gt=0)
    optimizer: OptimizerKind = OptimizerKind.ADAMW
    weight_decay: float = Field(default=0.0, ge=0)
    warmup_steps: int = Field(default=0, ge=0)
    grad_clip: float = Field(default=1.0, gt=0)
    restarts: int = Field(default=3, ge=1)
    anneal: AnnealSchedule
    seed: int = Field(default=42, ge=0)
    eval_every: int = Field(default=50, ge=1)
    slicer: SlicerConfig = SlicerConfig()

    @model_validator(mode="after")
    def check_schedule(self) -> "SolverConfig":
        if self.warmup_steps > self.steps:
            raise ValueError("warmup_steps must not exceed steps")
        if self.anneal.steps != self.steps:
            raise ValueError("anneal.steps must equal steps")
        return self

    @classmethod
    def matching(cls, seed: int = 42) -> "SolverConfig":
        """Shape-matching settings: Adam, lr 1e-4, 1500 steps, clip 1.0, temperature 1e-4."""
        return cls(
            steps=1500, lr=1e-4, optimizer=OptimizerKind.ADAM, grad_clip=1.0, restarts=3,
            anneal=AnnealSchedule(alpha_start=1e-4, alpha_end=1e-4, steps=1500),
            seed=seed,
            slicer=SlicerConfig(hidden_width=1024, depth=6, rff_features=128),
        )

    @classmethod
    def interpolation(cls, seed: int = 42) -> "SolverConfig":
        """Interpolation settings: AdamW, lr 3e-3, 1000 steps, 3 restarts, alpha 1.0 -> 0.03."""
        return cls(
            steps=1000, lr=3e-3, optimizer=OptimizerKind.ADAMW, weight_decay=1e-4,
            warmup_steps=50, grad_clip=5.0, restarts=3,
            anneal=AnnealSchedule(alpha_start=1.0, alpha_end=0.03, steps=1000),
            seed=seed,
            slicer=SlicerConfig(hidden_width=512, depth=4, rff_features=0),
        )

    @classmethod
    def desk(cls, seed: int = 42, steps: int = 250) -> "SolverConfig":
        """Interpolation settings shrunk 4x in width and steps for CI-sized runs."""
        return cls(
            steps=steps, lr=3e-3, optimizer=OptimizerKind.ADAMW, weight_decay=1e-4,
            warmup_steps=min(12, steps), grad_clip=5.0, restarts=3,
            anneal=AnnealSchedule(alpha_start=1.0, alpha_end=0.03, steps=steps),
            seed=seed, eval_every=25,
            slicer=SlicerConfig(hidden_width=128, depth=4, rff_features=16),
        )


class SgwConfig(FrozenSchema):
    """Sliced GW estimator settings."""
    num_directions: int = Field(default=500, ge=1)
    mode: SgwMode = SgwMode.SHARED
    seed: int = Field(default=42, ge=0)
    maxmin_iters: int = Field(default=100, ge=1)
    maxmin_restarts: int = Field(default=10, ge=1)
    maxmin_lr: float = Field(default=0.1, gt=0)

    @classmethod
    def desk(cls, mode: SgwMode = SgwMode.SHARED, seed: int = 42) -> "SgwConfig":
        return cls(num_directions=50, mode=mode, seed=seed, maxmin_iters=50)


class SinkhornConfig(FrozenSchema):
    """Entropic GW settings."""
    epsilon: float = Field(default=0.05, gt=0)
    outer_iters: int = Field(default=100, ge=1)
    inner_iters: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-9, gt=0)
    seed: int = Field(default=0, ge=0)


class AmortizedConfig(FrozenSchema):
    """Amortized matcher architecture and training schedule."""
    k_neighbors: int = Field(default=32, ge=1)
    token_dim: int = Field(default=64, ge=1)
    latent_dim: int = Field(default=256, ge=1)
    heads: int = Field(default=1, ge=1, le=1)
    attention: bool = False
    lr: float = Field(default=1e-3, gt=0)
    weight_decay: float = Field(default=1e-5, ge=0)
    warmup_epochs: int = Field(default=5, ge=0)
    grad_clip: float = Field(default=1.0, gt=0)
    alpha_start: float = Field(default=0.05, gt=0)
    alpha_end: float = Field(default=0.005, gt=0)
    fgw_lambda: float = Field(default=0.5, ge=0, le=1)
    epochs: int = Field(default=20, ge=1)
    pairs_per_epoch: int = Field(default=16, ge=1)
    batch_size: int = Field(default=4, ge=1)
    # appends raw coordinates to the tokens; breaks rigid invariance
    with_coordinates: bool = False
    seed: int = Field(default=42, ge=0)

    @model_validator(mode="after")
    def check_schedule(self) -> "AmortizedConfig":
        if self.alpha_end > self.alpha_start:
            raise ValueError("alpha_end must not exceed alpha_start")
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup_epochs must not exceed epochs")
        return self

    @classmethod
    def desk(cls, seed: int = 42) -> "AmortizedConfig":
        return cls(k_neighbors=16, token_dim=32, latent_dim=64, epochs=30,
                   warmup_epochs=3, pairs_per_epoch=8, seed=seed)
