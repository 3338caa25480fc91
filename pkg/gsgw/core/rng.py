"""Pinned random number streams.

Every random draw in the toolkit goes through :func:`make_rng`. The bit
generator is numpy's counter-based Philox, keyed by a SeedSequence built
from the run seed plus stream keys, so a restart or a direction batch gets the
same numbers regardless of scheduling or thread count.
"""
from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, str):
        # stable across processes, unlike hash()
        return int.from_bytes(key.encode("utf-8")[:8].ljust(8, b"\0"), "little")
    if key < 0:
        raise ValueError("stream keys must be non-negative")
    return int(key)


def make_rng(seed: int, *stream: StreamKey) -> np.random.Generator:
    """
    Build the generator for a seed and an optional stream path.

    Args:
        seed: Run seed
        *stream: Stream keys, e.g. ("restart", 2)

    Returns:
        numpy Generator over Philox
    """
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *stream: StreamKey) -> int:
    """Derive a child integer seed, used where an API takes ints rather than generators."""
    return int(make_rng(seed, *stream).integers(0, 2**31 - 1))
