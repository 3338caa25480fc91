"""Geometric containers: meshes, geodesic matrices, rigid transforms, labeled clouds."""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from gsgw.exceptions.exceptions import InvalidInputError, ShapeError
from gsgw.schemas.measures import CostMatrix, PointCloud


class MeshFormat(str, Enum):
    OBJ = "obj"
    OFF = "off"
    NPY = "npy"


class GraphKind(str, Enum):
    """Neighbourhood graph behind a geodesic matrix."""
    AUTO = "auto"
    MESH = "mesh"
    KNN = "knn"


@dataclass(frozen=True)
class Mesh:
    """Vertices in R^3 with optional triangle faces."""
    vertices: PointCloud
    faces: Optional[np.ndarray] = None
    source_format: MeshFormat = MeshFormat.NPY

    def __post_init__(self):
        if self.faces is None:
            return
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.size == 0:
            object.__setattr__(self, "faces", None)
            return
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ShapeError(f"faces must be (k, 3) triangles, got {faces.shape}")
        if faces.min() < 0 or faces.max() >= self.vertices.n:
            raise InvalidInputError("face index out of range")
        faces.setflags(write=False)
        object.__setattr__(self, "faces", faces)

    @property
    def has_faces(self) -> bool:
        return self.faces is not None


@dataclass(frozen=True)
class GeodesicMatrix:
    """Graph-geodesic cost matrix with the graph that produced it."""
    cost: CostMatrix
    graph_k: int
    normalized: bool
    graph: GraphKind = GraphKind.KNN

    @property
    def entries(self) -> np.ndarray:
        return self.cost.entries

    @property
    def n(self) -> int:
        return self.cost.n


@dataclass(frozen=True)
class RigidTransform:
    """x -> R x + b, applied to row-vector point arrays as X R^T + b."""
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        b = np.array(self.translation, dtype=np.float64).reshape(-1)
        d = b.shape[0]
        if r.shape != (d, d):
            raise ShapeError(f"rotation {r.shape} does not match translation of length {d}")
        if np.max(np.abs(r.T @ r - np.eye(d))) > 1e-12:
            raise InvalidInputError("rotation is not orthogonal to 1e-12")
        r.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", b)

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def is_proper(self) -> bool:
        return bool(np.linalg.det(self.rotation) > 0)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points.points if isinstance(points, PointCloud) else points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def apply_inverse(self, points) -> np.ndarray:
        pts = np.asarray(points.points if isinstance(points, PointCloud) else points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


@dataclass(frozen=True)
class LabeledCloud:
    """Point cloud with one integer part label per point."""
    cloud: PointCloud
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != (self.cloud.n,):
            raise ShapeError(f"{labels.shape[0] if labels.ndim else 0} labels for {self.cloud.n} points")
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.cloud.n
