"""Procedural two-part shapes for desk-scale amortized matching."""
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from gsgw.core.rng import derive_seed, make_rng
from gsgw.exceptions.exceptions import InvalidInputError
from gsgw.schemas.geometry import LabeledCloud
from gsgw.schemas.measures import PointCloud
from gsgw.services.geometry import normalize_cloud, sample_rigid

NOISE = 0.01


class ShapeKind(str, Enum):
    DUMBBELL = "dumbbell"
    L_SHAPE = "l_shape"
    TRIPOD = "tripod"


def _sphere(rng: np.random.Generator, count: int, center, radius: float) -> np.ndarray:
    v = rng.standard_normal((count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(center) + radius * v


def _box(rng: np.random.Generator, count: int, low, high) -> np.ndarray:
    return rng.uniform(low, high, size=(count, 3))


def _split(n_points: int, share: float) -> tuple:
    first = int(round(share * n_points))
    return first, n_points - first


def _dumbbell(rng, n_points):
    n0, n1 = _split(n_points, 0.6)
    return [_sphere(rng, n0, (-1.0, 0.0, 0.0), 0.6), _sphere(rng, n1, (1.1, 0.0, 0.0), 0.4)]


def _l_shape(rng, n_points):
    n0, n1 = _split(n_points, 0.65)
    return [_box(rng, n0, (0.0, 0.0, 0.0), (2.0, 0.4, 0.3)),
            _box(rng, n1, (0.0, 0.4, 0.0), (0.4, 1.4, 0.3))]


def _tripod(rng, n_points):
    n0, n1 = _split(n_points, 0.4)
    angle = rng.uniform(0.0, 2.0 * np.pi, n0)
    radius = np.sqrt(rng.uniform(0.0, 1.0, n0)) * 0.8
    top = np.stack([radius * np.cos(angle), radius * np.sin(angle), np.full(n0, 1.2)], axis=1)
    leg = rng.integers(0, 3, n1)
    along = rng.uniform(0.0, 1.0, n1)
    feet = np.stack([np.cos(2.0 * np.pi * leg / 3.0), np.sin(2.0 * np.pi * leg / 3.0), np.zeros(n1)], axis=1)
    head = np.stack([0.5 * feet[:, 0], 0.5 * feet[:, 1], np.full(n1, 1.2)], axis=1)
    legs = head + along[:, None] * (feet - head)
    return [top, legs]


_BUILDERS = {
    ShapeKind.DUMBBELL: _dumbbell,
    ShapeKind.L_SHAPE: _l_shape,
    ShapeKind.TRIPOD: _tripod,
}


def make_shape(kind: ShapeKind, n_points: int, seed: int) -> LabeledCloud:
    """
    Sample a normalized two-part shape with part labels 0 and 1.

    Part sizes are unequal so that the shapes have no label-swapping symmetry.
    """
    if n_points < 4:
        raise InvalidInputError(f"a two-part shape needs at least 4 points, got {n_points}")
    kind = ShapeKind(kind)
    rng = make_rng(seed, "shape", kind.value, n_points)
    parts = _BUILDERS[kind](rng, n_points)
    points = np.concatenate(parts) + NOISE * rng.standard_normal((n_points, 3))
    labels = np.concatenate([np.full(len(part), label) for label, part in enumerate(parts)])
    return LabeledCloud(normalize_cloud(PointCloud(points)), labels)


def make_dataset(
    count: int,
    seed: int,
    kinds: Sequence[ShapeKind] = tuple(ShapeKind),
    sizes: Sequence[int] = (64, 128),
) -> List[LabeledCloud]:
    """``count`` shapes cycling through kinds, sizes drawn from ``sizes``."""
    rng = make_rng(seed, "dataset")
    clouds = []
    for k in range(count):
        n = int(rng.choice(sizes))
        clouds.append(make_shape(kinds[k % len(kinds)], n, derive_seed(seed, "dataset", k)))
    return clouds


@dataclass(frozen=True)
class ShapePair:
    source: LabeledCloud
    target: LabeledCloud
    kind: ShapeKind


def make_pair_dataset(
    count: int,
    seed: int,
    kinds: Sequence[ShapeKind] = tuple(ShapeKind),
    sizes: Sequence[int] = (64, 128),
    rigid: bool = True,
) -> List[ShapePair]:
    """
    Same-kind pairs from independent samples; the target is optionally moved
    by a random rigid motion.
    """
    rng = make_rng(seed, "pairs")
    pairs = []
    for k in range(count):
        kind = ShapeKind(kinds[k % len(kinds)])
        n_src, n_dst = (int(v) for v in rng.choice(sizes, size=2))
        source = make_shape(kind, n_src, derive_seed(seed, "pair-source", k))
        target = make_shape(kind, n_dst, derive_seed(seed, "pair-target", k))
        if rigid:
            motion = sample_rigid(3, derive_seed(seed, "pair-motion", k))
            target = LabeledCloud(PointCloud(motion.apply(target.cloud)), target.labels)
        pairs.append(ShapePair(source, target, kind))
    return pairs


def make_toy_pair(name: str, n_points: int, seed: int) -> tuple:
    """
    Planar source and 3-D target sampled at shared curve parameters.

    Returns:
        (X in R^2, Y in R^3), both normalized; row i of X and Y share a parameter
    """
    rng = make_rng(seed, "toy", name, n_points)
    t = np.sort(rng.uniform(0.0, 1.0, n_points))
    if name == "line_to_helix":
        X = np.stack([t, 0.05 * np.sin(6.0 * t)], axis=1)
        Y = np.stack([np.cos(4.0 * np.pi * t), np.sin(4.0 * np.pi * t), 2.0 * t], axis=1)
    elif name == "circle_to_sphere":
        angle = 2.0 * np.pi * t
        X = np.stack([np.cos(angle), np.sin(angle)], axis=1)
        Y = np.stack([np.cos(angle), np.sin(angle), 0.3 * np.sin(2.0 * angle)], axis=1)
    elif name == "spiral_to_spring":
        angle = 3.0 * np.pi * t
        X = np.stack([t * np.cos(angle), t * np.sin(angle)], axis=1)
        Y = np.stack([np.cos(angle), np.sin(angle), t], axis=1)
    elif name == "square_to_cube":
        X = rng.uniform(0.0, 1.0, (n_points, 2))
        Y = np.concatenate([X, rng.uniform(0.0, 0.5, (n_points, 1))], axis=1)
    else:
        raise InvalidInputError(f"unknown toy pair {name!r}")
    return normalize_cloud(PointCloud(X)), normalize_cloud(PointCloud(Y))
