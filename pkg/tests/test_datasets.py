import numpy as np
import pytest

from gsgw.exceptions.exceptions import InvalidInputError
from gsgw.services.datasets import ShapeKind, make_dataset, make_pair_dataset, make_shape, make_toy_pair
from gsgw.services.measures import build_cost_matrix

TOY_PAIRS = ["line_to_helix", "circle_to_sphere", "spiral_to_spring", "square_to_cube"]


class TestShapes:
    @pytest.mark.parametrize("kind", list(ShapeKind))
    def test_two_unequal_parts(self, kind):
        shape = make_shape(kind, 40, seed=1)
        assert shape.cloud.points.shape == (40, 3)
        counts = np.bincount(shape.labels)
        assert counts.shape == (2,)
        assert counts[0] != counts[1]

    def test_normalized(self):
        pts = make_shape(ShapeKind.DUMBBELL, 32, seed=0).cloud.points
        np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=1e-12)
        assert np.max(np.linalg.norm(pts, axis=1)) == pytest.approx(1.0)

    def test_seeded(self):
        first = make_shape(ShapeKind.TRIPOD, 20, seed=5)
        second = make_shape(ShapeKind.TRIPOD, 20, seed=5)
        np.testing.assert_array_equal(first.cloud.points, second.cloud.points)

    def test_too_small(self):
        with pytest.raises(InvalidInputError):
            make_shape(ShapeKind.L_SHAPE, 3, seed=0)


class TestDatasets:
    def test_cycles_through_kinds(self):
        clouds = make_dataset(6, seed=2, sizes=(16, 24))
        assert len(clouds) == 6
        assert {c.n for c in clouds} <= {16, 24}

    def test_pairs_keep_intrinsic_geometry(self):
        pair = make_pair_dataset(1, seed=3, sizes=(16,))[0]
        unmoved = make_pair_dataset(1, seed=3, sizes=(16,), rigid=False)[0]
        np.testing.assert_allclose(build_cost_matrix(pair.target.cloud).entries,
                                   build_cost_matrix(unmoved.target.cloud).entries, atol=1e-12)
        np.testing.assert_array_equal(pair.target.labels, unmoved.target.labels)
        assert not np.allclose(pair.target.cloud.points, unmoved.target.cloud.points)


class TestToyPairs:
    @pytest.mark.parametrize("name", TOY_PAIRS)
    def test_planar_source_spatial_target(self, name):
        X, Y = make_toy_pair(name, 30, seed=0)
        assert (X.n, X.dim) == (30, 2)
        assert (Y.n, Y.dim) == (30, 3)
        assert np.max(np.linalg.norm(Y.points, axis=1)) == pytest.approx(1.0)

    def test_unknown_pair(self):
        with pytest.raises(InvalidInputError):
            make_toy_pair("cone_to_torus", 10, seed=0)
