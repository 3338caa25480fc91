import numpy as np
import pytest

from gsgw.exceptions.exceptions import InvalidInputError, UnsupportedMarginalsError
from gsgw.schemas.measures import DiscreteMeasure, PointCloud
from gsgw.schemas.solver import SlicerKind, SlicerRelation
from gsgw.services.baselines import brute_force_gw
from gsgw.services.measures import build_cost_matrix, gw_loss, uniform_measure
from gsgw.services.slicers import linear_slicer_pair
from gsgw.services.solver import ablation_grid, soft_loss_and_grad, solve, solve_point_clouds
from gsgw.services import autodiff as ad


class TestSolve:
    def test_self_match_reaches_zero(self, cloud_3d, tiny_solver_config):
        result = solve_point_clouds(cloud_3d, cloud_3d, tiny_solver_config)
        assert result.best_loss == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(result.best_plan.plan, np.eye(6) / 6)

    def test_two_point_instance(self, two_point_costs, tiny_solver_config):
        Cx, Cy = two_point_costs
        mu = uniform_measure(PointCloud(np.array([[0.0], [1.0]])))
        nu = uniform_measure(PointCloud(np.array([[0.0], [2.0]])))
        assert solve(mu, nu, Cx, Cy, tiny_solver_config).best_loss == pytest.approx(0.5)

    def test_bounded_below_by_exhaustive_search(self, rng, tiny_solver_config):
        X = PointCloud(rng.standard_normal((5, 2)))
        Y = PointCloud(rng.standard_normal((5, 3)))
        result = solve_point_clouds(X, Y, tiny_solver_config)
        exact = brute_force_gw(build_cost_matrix(X), build_cost_matrix(Y))
        assert result.best_loss >= exact.best_loss - 1e-12

    def test_loss_matches_reported_plan(self, cloud_2d, cloud_3d, tiny_solver_config):
        result = solve_point_clouds(cloud_2d, cloud_3d, tiny_solver_config)
        Cx, Cy = build_cost_matrix(cloud_2d), build_cost_matrix(cloud_3d)
        assert result.best_loss == pytest.approx(gw_loss(Cx, Cy, result.best_plan), rel=1e-12)
        assert result.best_plan.marginal_error() < 1e-12
        assert len(result.restart_losses) == tiny_solver_config.restarts
        assert result.best_loss == min(result.restart_losses)

    def test_rectangular_instance(self, rng, tiny_solver_config):
        X = PointCloud(rng.standard_normal((7, 2)))
        Y = PointCloud(rng.standard_normal((4, 3)))
        result = solve_point_clouds(X, Y, tiny_solver_config)
        assert result.best_plan.shape == (7, 4)
        assert result.best_plan.marginal_error() < 1e-12

    def test_seeded_runs_are_identical(self, cloud_2d, cloud_3d, tiny_solver_config):
        first = solve_point_clouds(cloud_2d, cloud_3d, tiny_solver_config)
        second = solve_point_clouds(cloud_2d, cloud_3d, tiny_solver_config)
        assert first.best_loss == second.best_loss
        assert [p.loss for p in first.loss_trace] == [p.loss for p in second.loss_trace]
        np.testing.assert_array_equal(first.best_plan.plan, second.best_plan.plan)

    def test_trace_follows_schedule(self, cloud_2d, cloud_3d, tiny_solver_config):
        trace = solve_point_clouds(cloud_2d, cloud_3d, tiny_solver_config).loss_trace
        assert [p.step for p in trace] == list(range(tiny_solver_config.steps))
        assert trace[0].tau == 1.0
        assert trace[-1].tau == 0.1

    def test_non_uniform_weights(self, cloud_2d, tiny_solver_config):
        weights = np.array([0.5, 0.1, 0.1, 0.1, 0.1, 0.1])
        mu = DiscreteMeasure(cloud_2d, weights)
        C = build_cost_matrix(cloud_2d)
        with pytest.raises(UnsupportedMarginalsError):
            solve(mu, uniform_measure(cloud_2d), C, C, tiny_solver_config)

    def test_source_must_not_exceed_target_dimension(self, cloud_2d, cloud_3d, tiny_solver_config):
        with pytest.raises(InvalidInputError):
            solve_point_clouds(cloud_3d, cloud_2d, tiny_solver_config)


class TestSoftLoss:
    def test_gradient_matches_finite_differences(self, rng):
        X, Y = rng.standard_normal((4, 2)), rng.standard_normal((4, 3))
        Cx, Cy = build_cost_matrix(PointCloud(X)), build_cost_matrix(PointCloud(Y))
        pair = linear_slicer_pair(2, 3, seed=1)
        pair = pair.with_params(pair.params + 0.3 * rng.standard_normal(pair.params.shape[0]))

        def fn(theta):
            return soft_loss_and_grad(pair, theta, X, Y, Cx, Cy, tau=0.5)

        assert ad.grad_check(fn, pair.params) < 1e-4


@pytest.mark.slow
class TestAblation:
    def test_all_four_cells(self, cloud_2d, cloud_3d, tiny_solver_config):
        Cx, Cy = build_cost_matrix(cloud_2d), build_cost_matrix(cloud_3d)
        cells = ablation_grid(uniform_measure(cloud_2d), uniform_measure(cloud_3d), Cx, Cy, tiny_solver_config)
        assert set(cells) == {(k, r) for k in SlicerKind for r in SlicerRelation}
        assert all(cell.geodesic_error is None for cell in cells.values())
