import numpy as np
import pytest

from gsgw.exceptions.exceptions import DegenerateInputError, InvalidInputError, ShapeError
from gsgw.services.monotone_plan import (
    construct_xi,
    hard_plan,
    hard_plan_sparse,
    monotone_interp_matrix,
    plan_permutation,
    stable_argsort,
)


class TestStableArgsort:
    def test_ties_keep_index_order(self):
        result = stable_argsort([2.0, 1.0, 2.0, 1.0])
        np.testing.assert_array_equal(result.order, [1, 3, 0, 2])

    def test_ranks_invert_order(self, rng):
        result = stable_argsort(rng.standard_normal(9))
        np.testing.assert_array_equal(result.order[result.ranks], np.arange(9))

    def test_perm_matrix_sorts(self):
        values = np.array([3.0, -1.0, 2.0])
        P = stable_argsort(values).perm_matrix
        np.testing.assert_array_equal(P @ values, np.sort(values))

    def test_nan_rejected(self):
        with pytest.raises(InvalidInputError):
            stable_argsort([0.0, np.nan])

    def test_matrix_input_rejected(self):
        with pytest.raises(ShapeError):
            stable_argsort(np.zeros((2, 2)))


class TestMonotoneInterp:
    def test_two_by_three(self):
        expected = np.array([[1 / 3, 1 / 6, 0.0], [0.0, 1 / 6, 1 / 3]])
        np.testing.assert_allclose(monotone_interp_matrix(2, 3).matrix, expected, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("n,m", [(1, 1), (1, 5), (4, 4), (7, 3), (10, 12)])
    def test_exact_marginals(self, n, m):
        interp = monotone_interp_matrix(n, m)
        assert interp.numerators.sum() == n * m
        np.testing.assert_allclose(interp.matrix.sum(axis=1), 1.0 / n, atol=1e-15)
        np.testing.assert_allclose(interp.matrix.sum(axis=0), 1.0 / m, atol=1e-15)

    @pytest.mark.parametrize("n,m", [(3, 5), (6, 4), (8, 8)])
    def test_support_is_a_staircase(self, n, m):
        interp = monotone_interp_matrix(n, m)
        assert interp.rows.shape[0] <= n + m - 1
        assert np.all(np.diff(interp.rows) >= 0)
        assert np.all(np.diff(interp.cols) >= 0)

    def test_square_is_scaled_identity(self):
        np.testing.assert_allclose(monotone_interp_matrix(5, 5).matrix, np.eye(5) / 5)

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidInputError):
            monotone_interp_matrix(0, 3)


class TestHardPlan:
    def test_square_plan_is_permutation(self, rng):
        s, t = rng.standard_normal(6), rng.standard_normal(6)
        plan = hard_plan(s, t).plan
        np.testing.assert_array_equal(np.count_nonzero(plan, axis=1), 1)
        np.testing.assert_allclose(plan.sum(axis=1), 1 / 6)

    def test_matches_kth_smallest(self):
        sigma = plan_permutation([0.3, 0.1, 0.2], [5.0, 7.0, 6.0])
        np.testing.assert_array_equal(sigma, [1, 0, 2])

    def test_sparse_and_dense_agree(self, rng):
        s, t = rng.standard_normal(5), rng.standard_normal(8)
        rows, cols, mass = hard_plan_sparse(s, t)
        dense = np.zeros((5, 8))
        dense[rows, cols] = mass
        np.testing.assert_array_equal(dense, hard_plan(s, t).plan)

    def test_rectangular_marginals(self, rng):
        plan = hard_plan(rng.standard_normal(7), rng.standard_normal(3))
        assert plan.marginal_error() < 1e-15

    def test_invariant_under_increasing_maps(self, rng):
        s, t = rng.standard_normal(6), rng.standard_normal(4)
        np.testing.assert_array_equal(hard_plan(s, t).plan, hard_plan(np.exp(s), 3.0 * t + 1.0).plan)

    def test_single_points(self):
        np.testing.assert_array_equal(hard_plan([1.0], [2.0]).plan, [[1.0]])

    def test_permutation_needs_equal_sizes(self):
        with pytest.raises(ShapeError):
            plan_permutation([0.0, 1.0], [0.0, 1.0, 2.0])


class TestConstructXi:
    def test_realises_any_permutation(self, rng):
        x = rng.standard_normal(7)
        y = rng.standard_normal(7) + 10.0
        sigma = rng.permutation(7)
        xi = construct_xi(x, sigma, y)
        np.testing.assert_array_equal(plan_permutation(xi(x), xi(y)), sigma)

    def test_interleaved_nodes(self):
        x = np.array([0.0, 2.0, 4.0])
        y = np.array([1.0, 3.0, 5.0])
        sigma = np.array([2, 0, 1])
        xi = construct_xi(x, sigma, y)
        np.testing.assert_array_equal(plan_permutation(xi(x), xi(y)), sigma)

    def test_not_a_bijection(self):
        with pytest.raises(InvalidInputError):
            construct_xi([0.0, 1.0], [0, 0], [2.0, 3.0])

    def test_duplicate_nodes(self):
        with pytest.raises(DegenerateInputError):
            construct_xi([0.0, 0.0], [0, 1], [2.0, 3.0])

    def test_conflicting_shared_node(self):
        # x_0 = y_0 but x_0 must reach y_1
        with pytest.raises(DegenerateInputError):
            construct_xi([0.0, 1.0], [1, 0], [0.0, 2.0])
