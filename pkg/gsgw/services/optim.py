"""Adam / AdamW with global-norm clipping and linear warmup, over flat parameter vectors."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from gsgw.exceptions.exceptions import NumericError, ShapeError
from gsgw.schemas.solver import OptimizerKind

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates and the number of updates taken."""
    exp_avg: np.ndarray
    exp_avg_sq: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def warmup_lr(lr: float, step: int, warmup_steps: int) -> float:
    """lr * (step + 1) / warmup_steps during warmup, constant lr afterwards."""
    if warmup_steps > 0 and step < warmup_steps:
        return lr * (step + 1) / warmup_steps
    return lr


def clip_by_global_norm(grads: np.ndarray, clip: float) -> Tuple[np.ndarray, float]:
    """Rescale grads so their Euclidean norm is at most clip; returns (grads, original norm)."""
    norm = float(np.linalg.norm(grads))
    if norm > clip:
        return grads * (clip / norm), norm
    return grads, norm


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr_t: float,
    clip: float,
    optimizer: OptimizerKind = OptimizerKind.ADAM,
    weight_decay: float = 0.0,
) -> Tuple[np.ndarray, AdamState]:
    """
    One clipped Adam or AdamW update.

    Args:
        params: Flat parameters
        grads: Gradient of the loss at params
        state: Moments from the previous step (zeros initially)
        lr_t: Learning rate of this step, warmup included
        clip: Global-norm clipping threshold
        optimizer: adam, or adamw for decoupled weight decay
        weight_decay: AdamW decay coefficient

    Returns:
        Updated parameters and state

    Raises:
        ShapeError: If the shapes differ
        NumericError: If a gradient entry is not finite
    """
    if params.shape != grads.shape or state.exp_avg.shape != params.shape:
        raise ShapeError(f"params {params.shape}, grads {grads.shape} and state {state.exp_avg.shape} differ")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient")

    grads, _ = clip_by_global_norm(grads, clip)
    step = state.step + 1
    exp_avg = BETA1 * state.exp_avg + (1.0 - BETA1) * grads
    exp_avg_sq = BETA2 * state.exp_avg_sq + (1.0 - BETA2) * grads * grads
    m_hat = exp_avg / (1.0 - BETA1 ** step)
    v_hat = exp_avg_sq / (1.0 - BETA2 ** step)

    updated = params
    if OptimizerKind(optimizer) is OptimizerKind.ADAMW and weight_decay > 0:
        updated = updated * (1.0 - lr_t * weight_decay)
    updated = updated - lr_t * m_hat / (np.sqrt(v_hat) + EPS)
    return updated, AdamState(exp_avg, exp_avg_sq, step)
