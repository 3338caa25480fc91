"""Geodesics, normalization, correspondence scoring, interpolation and rigid motions."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra
from sklearn.neighbors import kneighbors_graph

from gsgw.core.config import settings
from gsgw.core.logging import get_logger
from gsgw.core.rng import make_rng
from gsgw.exceptions.exceptions import (
    ConnectivityError,
    DegenerateInputError,
    InvalidInputError,
    ShapeError,
)
from gsgw.schemas.geometry import GeodesicMatrix, GraphKind, Mesh, RigidTransform
from gsgw.schemas.measures import CostConvention, CostMatrix, Coupling, PointCloud

logger = get_logger(__name__)

DIJKSTRA_CHUNK = 64


def _as_cloud(source) -> PointCloud:
    if isinstance(source, Mesh):
        return source.vertices
    return source if isinstance(source, PointCloud) else PointCloud(source)


def normalize_cloud(cloud) -> PointCloud:
    """
    Center a cloud at its mean and scale it to unit maximum norm.

    Raises:
        DegenerateInputError: If all points coincide
    """
    pts = _as_cloud(cloud).points
    centered = pts - pts.mean(axis=0)
    radius = np.max(np.linalg.norm(centered, axis=1))
    if radius == 0.0:
        raise DegenerateInputError("cannot normalize a cloud whose points all coincide")
    return PointCloud(centered / radius)


def _check_distinct(points: np.ndarray) -> None:
    if np.unique(points, axis=0).shape[0] < points.shape[0]:
        raise DegenerateInputError("duplicate points give zero-length graph edges")


def knn_graph(cloud, k: int) -> sparse.csr_matrix:
    """Symmetrized kNN graph with Euclidean edge weights."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    pts = _as_cloud(cloud).points
    _check_distinct(pts)
    graph = kneighbors_graph(pts, n_neighbors=min(k, pts.shape[0] - 1), mode="distance",
                             include_self=False)
    return graph.maximum(graph.T).tocsr()


def mesh_edge_graph(mesh: Mesh) -> sparse.csr_matrix:
    """Edge graph of a triangle mesh weighted by edge length."""
    if not mesh.has_faces:
        raise InvalidInputError("mesh has no faces")
    pts = mesh.vertices.points
    _check_distinct(pts)
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    weights = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    n = pts.shape[0]
    graph = sparse.coo_matrix((weights, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    return graph.maximum(graph.T).tocsr()


def _all_pairs(graph: sparse.csr_matrix) -> np.ndarray:
    n = graph.shape[0]
    chunks = [np.arange(i, min(i + DIJKSTRA_CHUNK, n)) for i in range(0, n, DIJKSTRA_CHUNK)]
    workers = max(1, min(settings.max_workers, len(chunks)))
    if workers == 1:
        blocks = [dijkstra(graph, directed=False, indices=c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda c: dijkstra(graph, directed=False, indices=c), chunks))
    return np.vstack(blocks)


def geodesic_matrix(
    source: Union[PointCloud, Mesh, np.ndarray],
    k: int = 20,
    normalize: bool = True,
    graph: GraphKind = GraphKind.AUTO,
) -> GeodesicMatrix:
    """
    All-pairs graph geodesics, Dijkstra from every source.

    A mesh with faces uses its edge graph unless ``graph`` asks for kNN;
    everything else uses the symmetrized kNN graph.

    Args:
        source: Cloud or mesh
        k: Neighbours per point for the kNN graph
        normalize: Divide by the largest entry
        graph: auto, mesh or knn

    Returns:
        GeodesicMatrix in the distance convention

    Raises:
        ConnectivityError: If the graph is disconnected
        DegenerateInputError: If two points coincide
    """
    graph = GraphKind(graph)
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    has_faces = isinstance(source, Mesh) and source.has_faces
    if graph is GraphKind.MESH and not has_faces:
        raise InvalidInputError("graph=mesh needs a mesh with faces")
    kind = GraphKind.MESH if has_faces and graph is not GraphKind.KNN else GraphKind.KNN

    cloud = _as_cloud(source)
    if cloud.n == 1:
        return GeodesicMatrix(CostMatrix(np.zeros((1, 1))), k, normalize, kind)
    adjacency = mesh_edge_graph(source) if kind is GraphKind.MESH else knn_graph(cloud, k)
    logger.info(f"Geodesics on the {kind.value} graph of {cloud.n} points", extra={"method": kind.value})

    count, labels = connected_components(adjacency, directed=False)
    if count > 1:
        raise ConnectivityError(f"{kind.value} graph has {count} components",
                                sorted(np.bincount(labels).tolist(), reverse=True))

    dist = _all_pairs(adjacency)
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    if normalize:
        dist = dist / dist.max()
    return GeodesicMatrix(CostMatrix(dist, CostConvention.DISTANCE), k, normalize, kind)


def _geodesic_entries(target) -> np.ndarray:
    if isinstance(target, GeodesicMatrix):
        entries = target.entries
        scale_needed = not target.normalized
    else:
        entries = target.entries if isinstance(target, CostMatrix) else np.asarray(target, dtype=np.float64)
        scale_needed = entries.size > 0
    if scale_needed and entries.max() > 0:
        entries = entries / entries.max()
    return entries


def geodesic_error(predicted: Sequence[int], ground_truth: Sequence[int], target_geodesic) -> float:
    """
    Mean normalized target geodesic between predicted and true matches.

    Raises:
        ShapeError: If the maps have different lengths
        InvalidInputError: If an index is out of range
    """
    entries = _geodesic_entries(target_geodesic)
    pred = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(ground_truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"predicted {pred.shape} and ground truth {truth.shape} differ")
    m = entries.shape[0]
    for name, idx in (("predicted", pred), ("ground truth", truth)):
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise InvalidInputError(f"{name} index out of range for {m} target points")
    return float(entries[pred, truth].mean())


def plan_to_correspondence(pi) -> np.ndarray:
    """Row-wise argmax of a plan, ties to the smallest column."""
    plan = pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=np.float64)
    if np.any(plan.max(axis=1) <= 0):
        raise InvalidInputError("a plan row carries no mass")
    return np.argmax(plan, axis=1)


def barycentric_interpolate(X, Y, pi, t: float) -> PointCloud:
    """
    Move each source point toward its plan barycenter in Y.

    z_i = (1 - t) x_i + t (sum_j pi_ij y_j) / (sum_j pi_ij); t = 0 returns X.

    Raises:
        InvalidInputError: If t is outside [0, 1] or a plan row is empty
        ShapeError: If the ambient dimensions or the plan shape differ
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"t must lie in [0, 1], got {t}")
    xc, yc = _as_cloud(X), _as_cloud(Y)
    if xc.dim != yc.dim:
        raise ShapeError(f"interpolation needs equal dimensions, got {xc.dim} and {yc.dim}")
    plan = pi.plan if isinstance(pi, Coupling) else np.asarray(pi, dtype=np.float64)
    if plan.shape != (xc.n, yc.n):
        raise ShapeError(f"plan {plan.shape} does not match {xc.n} x {yc.n}")
    mass = plan.sum(axis=1)
    if np.any(mass <= 0):
        raise InvalidInputError("a plan row carries no mass")
    if t == 0.0:
        return xc
    bary = (plan @ yc.points) / mass[:, None]
    return PointCloud((1.0 - t) * xc.points + t * bary)


def sample_rigid(d: int, seed: int, allow_reflection: bool = False) -> RigidTransform:
    """Random orthogonal matrix by QR of a Gaussian matrix, with N(0, I) translation."""
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    rng = make_rng(seed, "rigid", d)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    if not allow_reflection and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return RigidTransform(q, rng.standard_normal(d))


def farthest_point_sample(cloud, n_land: int, seed: int) -> np.ndarray:
    """Greedy farthest-point indices from a seeded random start."""
    pts = _as_cloud(cloud).points
    n = pts.shape[0]
    if not 1 <= n_land <= n:
        raise InvalidInputError(f"cannot pick {n_land} landmarks from {n} points")
    chosen = [int(make_rng(seed, "fps").integers(n))]
    nearest = np.linalg.norm(pts - pts[chosen[0]], axis=1)
    for _ in range(n_land - 1):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.linalg.norm(pts - pts[nxt], axis=1))
    return np.array(chosen, dtype=np.int64)


@dataclass(frozen=True)
class LandmarkSet:
    repetition: int
    src_idx: np.ndarray
    dst_idx: np.ndarray


def landmark_correspondences(pi, cloud, n_land: int = 18, n_rep: int = 4, seed: int = 0
                             ) -> List[LandmarkSet]:
    """Farthest-point landmarks on the source mapped through the plan, once per repetition."""
    matches = plan_to_correspondence(pi)
    out = []
    for rep in range(n_rep):
        src = farthest_point_sample(cloud, n_land, seed=int(make_rng(seed, "landmarks", rep).integers(2**31 - 1)))
        out.append(LandmarkSet(rep, src, matches[src]))
    return out
