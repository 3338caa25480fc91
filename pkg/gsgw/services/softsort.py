"""Differentiable relaxation of sorting permutations and the soft transport plan.

Soft ranks r_i = sum_{k != i} sigmoid((v_i - v_k) / tau) are spread over the
integer rank grid with P[j, i] = softmax_j(-(r_i - j)^2 / tau), then pushed
towards double stochasticity by alternating row and column normalization.
Normalization runs in the log domain so that near-hard temperatures and
exact ties never divide zero by zero.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

from gsgw.core.config import settings
from gsgw.exceptions.exceptions import InvalidInputError, ShapeError
from gsgw.schemas.measures import Coupling
from gsgw.schemas.solver import AnnealSchedule, AnnealShape
from gsgw.services import autodiff as ad
from gsgw.services.monotone_plan import monotone_interp_matrix


@dataclass(frozen=True)
class SoftPermutation:
    """Near doubly-stochastic n x n relaxation of a sorting permutation."""
    matrix: np.ndarray
    temperature: float


def _check_tau(tau: float) -> float:
    if not tau > 0:
        raise InvalidInputError(f"temperature must be positive, got {tau}")
    return float(tau)


def _rounds(rounds: Optional[int]) -> int:
    return settings.SOFTSORT_ROUNDS if rounds is None else int(rounds)


def _values(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.shape[0] < 1:
        raise InvalidInputError("values must not be empty")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("values must be finite")
    return v


def soft_perm(values, tau: float, rounds: Optional[int] = None) -> SoftPermutation:
    """
    Soft sorting matrix of a value vector.

    Args:
        values: Real vector of length n
        tau: Temperature, > 0
        rounds: Row/column normalization rounds (settings.SOFTSORT_ROUNDS by default)

    Returns:
        SoftPermutation with P[rank][index]; columns sum to 1 exactly up to round-off

    Raises:
        InvalidInputError: If tau <= 0 or values are not finite
    """
    tau = _check_tau(tau)
    v = _values(values)
    n = v.shape[0]
    ranks = expit((v[:, None] - v[None, :]) * (1.0 / tau)).sum(axis=1) - 0.5
    grid = np.arange(n, dtype=np.float64)[:, None]
    log_p = ((ranks[None, :] - grid) ** 2) * (-1.0 / tau)
    log_p = log_p - logsumexp(log_p, axis=0, keepdims=True)
    for _ in range(_rounds(rounds)):
        log_p = log_p - logsumexp(log_p, axis=1, keepdims=True)
        log_p = log_p - logsumexp(log_p, axis=0, keepdims=True)
    return SoftPermutation(np.exp(log_p), tau)


def soft_plan(s, t, tau: float, rounds: Optional[int] = None) -> Coupling:
    """
    Soft plan (P_{X,tau})^T T_{n,m} P_{Y,tau}.

    Converges to hard_plan(s, t) as tau -> 0.
    """
    p_x = soft_perm(s, tau, rounds).matrix
    p_y = soft_perm(t, tau, rounds).matrix
    interp = monotone_interp_matrix(p_x.shape[0], p_y.shape[0]).matrix
    return Coupling(p_x.T @ interp @ p_y)


def _normalize_rows(log_p: ad.Tensor, ones_row: ad.Tensor) -> ad.Tensor:
    return log_p - ad.row_logsumexp(log_p) @ ones_row


def _normalize_cols(log_p: ad.Tensor, ones_row: ad.Tensor) -> ad.Tensor:
    return _normalize_rows(log_p.T, ones_row).T


def soft_perm_tape(values: ad.Tensor, tau: float, rounds: Optional[int] = None) -> ad.Tensor:
    """
    soft_perm recorded on the tape of ``values``.

    Args:
        values: (n, 1) column tensor
        tau: Temperature, > 0
        rounds: Normalization rounds

    Returns:
        (n, n) tensor P[rank][index]
    """
    tau = _check_tau(tau)
    if values.data.ndim != 2 or values.shape[1] != 1:
        raise ShapeError(f"soft_perm_tape expects an (n, 1) column, got {values.shape}")
    tape = values.tape
    n = values.shape[0]
    ones_row = tape.constant(np.ones((1, n)))
    ones_col = tape.constant(np.ones((n, 1)))
    grid = tape.constant(np.repeat(np.arange(n, dtype=np.float64)[:, None], n, axis=1))

    spread = values @ ones_row
    ranks = ad.sigmoid((spread - spread.T) * (1.0 / tau)) @ ones_col - 0.5
    log_p = ad.square(ones_col @ ranks.T - grid) * (-1.0 / tau)
    log_p = _normalize_cols(log_p, ones_row)
    for _ in range(_rounds(rounds)):
        log_p = _normalize_rows(log_p, ones_row)
        log_p = _normalize_cols(log_p, ones_row)
    return ad.exp(log_p)


def soft_plan_tape(s: ad.Tensor, t: ad.Tensor, tau: float, rounds: Optional[int] = None) -> ad.Tensor:
    """soft_plan recorded on a tape; s is (n, 1), t is (m, 1), both on the same tape."""
    p_x = soft_perm_tape(s, tau, rounds)
    p_y = soft_perm_tape(t, tau, rounds)
    interp = s.tape.constant(monotone_interp_matrix(s.shape[0], t.shape[0]).matrix)
    return p_x.T @ interp @ p_y


def anneal(schedule: AnnealSchedule, step: int) -> float:
    """
    Temperature at a training step.

    Exponential: alpha_start * (alpha_end / alpha_start)^(step / (steps - 1));
    linear interpolates between the endpoints. A single-step schedule stays at
    alpha_start.

    Raises:
        InvalidInputError: If step is outside [0, steps)
    """
    if not 0 <= step < schedule.steps:
        raise InvalidInputError(f"step {step} outside [0, {schedule.steps})")
    if schedule.steps == 1 or step == 0:
        return schedule.alpha_start
    if step == schedule.steps - 1:
        return schedule.alpha_end
    frac = step / (schedule.steps - 1)
    if schedule.shape is AnnealShape.LINEAR:
        return schedule.alpha_start + frac * (schedule.alpha_end - schedule.alpha_start)
    return schedule.alpha_start * (schedule.alpha_end / schedule.alpha_start) ** frac
