import numpy as np
import pytest

from gsgw.exceptions.exceptions import (
    ConnectivityError,
    DegenerateInputError,
    InvalidInputError,
    ShapeError,
)
from gsgw.schemas.geometry import GraphKind, Mesh, RigidTransform
from gsgw.schemas.measures import PointCloud
from gsgw.services.geometry import (
    barycentric_interpolate,
    farthest_point_sample,
    geodesic_error,
    geodesic_matrix,
    knn_graph,
    landmark_correspondences,
    normalize_cloud,
    plan_to_correspondence,
    sample_rigid,
)
from gsgw.services.measures import build_cost_matrix


class TestNormalize:
    def test_centered_with_unit_radius(self, cloud_3d):
        pts = normalize_cloud(cloud_3d).points
        np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=1e-12)
        assert np.max(np.linalg.norm(pts, axis=1)) == pytest.approx(1.0)

    def test_coincident_points(self):
        with pytest.raises(DegenerateInputError):
            normalize_cloud(np.ones((4, 3)))


class TestGeodesics:
    def test_icosahedron_hop_distances(self, icosahedron):
        geo = geodesic_matrix(icosahedron)
        assert geo.graph is GraphKind.MESH
        row = np.sort(geo.entries[0])
        np.testing.assert_allclose(row, [0.0] + [1 / 3] * 5 + [2 / 3] * 5 + [1.0], atol=1e-12)

    def test_knn_on_a_line(self):
        line = PointCloud(np.arange(6, dtype=np.float64)[:, None])
        geo = geodesic_matrix(line, k=2, normalize=False)
        assert geo.graph is GraphKind.KNN
        np.testing.assert_allclose(geo.entries, np.abs(np.subtract.outer(np.arange(6), np.arange(6))))

    def test_geodesics_dominate_euclidean(self, cloud_3d):
        geo = geodesic_matrix(cloud_3d, k=3, normalize=False).entries
        euclid = build_cost_matrix(cloud_3d).entries
        assert np.all(geo >= euclid - 1e-12)

    def test_disconnected_graph(self):
        clusters = PointCloud(np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1],
                                        [10.0, 0.0], [10.1, 0.0], [10.0, 0.1]]))
        with pytest.raises(ConnectivityError) as excinfo:
            geodesic_matrix(clusters, k=2)
        assert excinfo.value.component_sizes == [3, 3]

    def test_duplicate_points(self):
        with pytest.raises(DegenerateInputError):
            knn_graph(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), k=1)

    def test_mesh_graph_needs_faces(self, cloud_3d):
        with pytest.raises(InvalidInputError):
            geodesic_matrix(Mesh(cloud_3d), graph=GraphKind.MESH)

    def test_single_point(self):
        assert geodesic_matrix(PointCloud(np.zeros((1, 3)))).entries.shape == (1, 1)


class TestCorrespondence:
    def test_geodesic_error_of_exact_map_is_zero(self, icosahedron):
        geo = geodesic_matrix(icosahedron)
        assert geodesic_error(np.arange(12), np.arange(12), geo) == 0.0

    def test_geodesic_error_of_antipodal_map(self, icosahedron):
        geo = geodesic_matrix(icosahedron)
        antipode = np.argmax(geo.entries, axis=1)
        assert geodesic_error(antipode, np.arange(12), geo) == pytest.approx(1.0)

    def test_raw_matrix_is_rescaled(self):
        raw = np.array([[0.0, 4.0], [4.0, 0.0]])
        assert geodesic_error([1, 0], [0, 1], raw) == 1.0

    def test_raw_matrix_below_one_is_rescaled(self):
        raw = np.array([[0.0, 0.5], [0.5, 0.0]])
        assert geodesic_error([1, 0], [0, 1], raw) == 1.0

    def test_length_mismatch(self, icosahedron):
        with pytest.raises(ShapeError):
            geodesic_error([0, 1], [0, 1, 2], geodesic_matrix(icosahedron))

    def test_index_out_of_range(self, icosahedron):
        with pytest.raises(InvalidInputError):
            geodesic_error([0, 12], [0, 1], geodesic_matrix(icosahedron))

    def test_argmax_ties_to_smallest_column(self):
        np.testing.assert_array_equal(plan_to_correspondence(np.array([[0.25, 0.25], [0.0, 0.5]])), [0, 1])

    def test_landmarks(self, cloud_3d):
        plan = np.eye(6) / 6
        sets = landmark_correspondences(plan, cloud_3d, n_land=3, n_rep=2, seed=1)
        assert len(sets) == 2
        for landmarks in sets:
            np.testing.assert_array_equal(landmarks.src_idx, landmarks.dst_idx)
            assert len(set(landmarks.src_idx.tolist())) == 3

    def test_farthest_point_bounds(self, cloud_3d):
        with pytest.raises(InvalidInputError):
            farthest_point_sample(cloud_3d, 7, seed=0)


class TestInterpolation:
    def test_endpoints(self, cloud_2d, rng):
        Y = PointCloud(rng.standard_normal((6, 2)))
        plan = np.eye(6)[rng.permutation(6)] / 6
        assert barycentric_interpolate(cloud_2d, Y, plan, 0.0) is cloud_2d
        end = barycentric_interpolate(cloud_2d, Y, plan, 1.0).points
        np.testing.assert_allclose(end, (plan * 6) @ Y.points)

    def test_out_of_range(self, cloud_2d):
        with pytest.raises(InvalidInputError):
            barycentric_interpolate(cloud_2d, cloud_2d, np.eye(6) / 6, 1.5)

    def test_dimension_mismatch(self, cloud_2d, cloud_3d):
        with pytest.raises(ShapeError):
            barycentric_interpolate(cloud_2d, cloud_3d, np.eye(6) / 6, 0.5)


class TestRigid:
    def test_proper_rotation(self):
        g = sample_rigid(3, seed=5)
        assert g.is_proper
        np.testing.assert_allclose(g.rotation.T @ g.rotation, np.eye(3), atol=1e-12)

    def test_inverse_round_trip(self, cloud_3d):
        g = sample_rigid(3, seed=5)
        np.testing.assert_allclose(g.apply_inverse(g.apply(cloud_3d)), cloud_3d.points, atol=1e-12)
        np.testing.assert_allclose(g.compose(g.inverse()).rotation, np.eye(3), atol=1e-12)

    def test_preserves_distances(self, cloud_3d):
        moved = PointCloud(sample_rigid(3, seed=9).apply(cloud_3d))
        np.testing.assert_allclose(build_cost_matrix(moved).entries, build_cost_matrix(cloud_3d).entries,
                                   atol=1e-12)

    def test_non_orthogonal_rejected(self):
        with pytest.raises(InvalidInputError):
            RigidTransform(np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2))
