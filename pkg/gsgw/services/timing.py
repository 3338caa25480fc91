"""Wall-clock timing of repeated calls."""
import time
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from gsgw.exceptions.exceptions import InvalidInputError

WARMUP_RUNS = 2


@dataclass(frozen=True)
class TimingStats:
    mean_ms: float
    std_ms: float
    repeats: int


@dataclass
class TimingRecorder:
    """Collects call durations; warmup calls are run but not recorded."""
    warmup: int = WARMUP_RUNS
    durations_ms: List[float] = field(default_factory=list)
    error_count: int = 0

    def time_call(self, fn: Callable[[], object], repeats: int = 10) -> TimingStats:
        """
        Time ``repeats`` calls of fn after the warmup calls.

        Args:
            fn: Zero-argument callable
            repeats: Recorded calls, >= 1

        Returns:
            Mean and population standard deviation in milliseconds
        """
        if repeats < 1:
            raise InvalidInputError(f"repeats must be >= 1, got {repeats}")
        for _ in range(self.warmup):
            fn()
        recorded = []
        for _ in range(repeats):
            start = time.perf_counter()
            try:
                fn()
            except Exception:
                self.error_count += 1
                raise
            recorded.append((time.perf_counter() - start) * 1000.0)
        self.durations_ms.extend(recorded)
        return TimingStats(float(np.mean(recorded)), float(np.std(recorded)), repeats)

    def summary(self) -> dict:
        return {
            "calls": len(self.durations_ms),
            "error_count": self.error_count,
            "avg_ms": round(float(np.mean(self.durations_ms)), 3) if self.durations_ms else 0.0,
        }


def loglog_slope(sizes, times_ms) -> float:
    """Least-squares slope of log(time) against log(size)."""
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(times_ms, dtype=np.float64))
    if x.shape[0] < 2:
        raise InvalidInputError("a slope needs at least two sizes")
    return float(np.polyfit(x, y, 1)[0])


def doubling_ratios(times_ms, sizes=None) -> List[float]:
    """
    Ratios of consecutive timings.

    With sizes, each ratio is rescaled to a doubling of the size:
    (t2 / t1) ** (log 2 / log(n2 / n1)).
    """
    t = np.asarray(times_ms, dtype=np.float64)
    ratios = t[1:] / t[:-1]
    if sizes is None:
        return ratios.tolist()
    n = np.asarray(sizes, dtype=np.float64)
    if n.shape != t.shape or np.any(n[1:] <= n[:-1]):
        raise InvalidInputError("sizes must be increasing and match the timings")
    return (ratios ** (np.log(2.0) / np.log(n[1:] / n[:-1]))).tolist()
