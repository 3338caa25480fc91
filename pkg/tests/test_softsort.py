import numpy as np
import pytest

from gsgw.exceptions.exceptions import InvalidInputError
from gsgw.schemas.solver import AnnealSchedule, AnnealShape
from gsgw.services import autodiff as ad
from gsgw.services.measures import build_cost_matrix, gw_loss, gw_loss_tape
from gsgw.services.monotone_plan import hard_plan, stable_argsort
from gsgw.services.softsort import anneal, soft_perm, soft_perm_tape, soft_plan, soft_plan_tape
from gsgw.schemas.measures import PointCloud


class TestSoftPerm:
    def test_columns_sum_to_one(self, rng):
        P = soft_perm(rng.standard_normal(8), tau=0.5).matrix
        np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(P >= 0)

    def test_cold_limit_is_sorting_matrix(self):
        values = np.array([0.7, -2.0, 3.1, 1.4])
        P = soft_perm(values, tau=1e-3).matrix
        np.testing.assert_allclose(P, stable_argsort(values).perm_matrix, atol=1e-9)

    def test_exact_ties_stay_finite(self):
        P = soft_perm(np.zeros(4), tau=1e-4).matrix
        assert np.all(np.isfinite(P))
        np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)

    def test_single_value(self):
        np.testing.assert_allclose(soft_perm([5.0], tau=0.1).matrix, [[1.0]])

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_temperature_must_be_positive(self, tau):
        with pytest.raises(InvalidInputError):
            soft_perm([0.0, 1.0], tau=tau)

    def test_non_finite_values(self):
        with pytest.raises(InvalidInputError):
            soft_perm([0.0, np.inf], tau=0.1)

    def test_tape_matches_numpy(self, rng):
        values = rng.standard_normal(5)
        tape = ad.Tape()
        P = soft_perm_tape(tape.leaf(values[:, None]), tau=0.3)
        np.testing.assert_allclose(P.data, soft_perm(values, tau=0.3).matrix, atol=1e-12)


class TestSoftPlan:
    def test_cold_limit_is_hard_plan(self):
        s = np.array([3.0, 0.0, 1.0, 2.0])
        t = np.array([10.0, 30.0, 20.0])
        np.testing.assert_allclose(soft_plan(s, t, tau=1e-3).plan, hard_plan(s, t).plan, atol=1e-9)

    def test_marginals_near_uniform(self):
        s = np.array([4.0, 1.0, 3.0, 0.0, 2.0])
        t = np.array([2.0, 0.0, 1.0])
        plan = soft_plan(s, t, tau=0.1)
        assert plan.marginal_error() < 1e-6

    def test_gradient_through_loss(self, rng):
        Cx = build_cost_matrix(PointCloud(rng.standard_normal((4, 2))))
        Cy = build_cost_matrix(PointCloud(rng.standard_normal((3, 3))))

        def build(tape, theta):
            return gw_loss_tape(Cx, Cy, soft_plan_tape(theta[0:4], theta[4:7], tau=0.5, rounds=5))

        def fn(theta):
            value, grad = ad.value_and_grad(build, theta.reshape(-1, 1))
            return value, grad.reshape(-1)

        theta = rng.standard_normal(7)
        value, _ = fn(theta)
        assert value == pytest.approx(gw_loss(Cx, Cy, soft_plan(theta[:4], theta[4:], tau=0.5, rounds=5)), rel=1e-10)
        assert ad.grad_check(fn, theta) < 1e-4


class TestAnneal:
    def test_exponential_endpoints(self):
        schedule = AnnealSchedule(alpha_start=1.0, alpha_end=0.01, steps=5)
        assert anneal(schedule, 0) == 1.0
        assert anneal(schedule, 4) == 0.01
        assert anneal(schedule, 2) == pytest.approx(0.1)

    def test_linear(self):
        schedule = AnnealSchedule(alpha_start=1.0, alpha_end=0.5, steps=3, shape=AnnealShape.LINEAR)
        assert anneal(schedule, 1) == pytest.approx(0.75)

    def test_monotone(self):
        schedule = AnnealSchedule(alpha_start=2.0, alpha_end=0.03, steps=50)
        values = [anneal(schedule, k) for k in range(50)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_single_step(self):
        assert anneal(AnnealSchedule(alpha_start=0.2, alpha_end=0.2, steps=1), 0) == 0.2

    def test_step_out_of_range(self):
        with pytest.raises(InvalidInputError):
            anneal(AnnealSchedule(alpha_start=1.0, alpha_end=0.1, steps=3), 3)

    def test_rising_schedule_rejected(self):
        with pytest.raises(ValueError):
            AnnealSchedule(alpha_start=0.1, alpha_end=1.0, steps=3)
