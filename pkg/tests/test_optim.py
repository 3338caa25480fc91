import numpy as np
import pytest

from gsgw.exceptions.exceptions import NumericError, ShapeError
from gsgw.schemas.solver import OptimizerKind
from gsgw.services.optim import AdamState, adam_step, clip_by_global_norm, warmup_lr


class TestWarmup:
    def test_linear_ramp(self):
        assert [warmup_lr(1.0, k, 4) for k in range(5)] == [0.25, 0.5, 0.75, 1.0, 1.0]

    def test_no_warmup(self):
        assert warmup_lr(0.1, 0, 0) == 0.1


class TestClipping:
    def test_large_gradient_rescaled(self):
        grads, norm = clip_by_global_norm(np.array([3.0, 4.0]), 1.0)
        assert norm == 5.0
        np.testing.assert_allclose(grads, [0.6, 0.8])

    def test_small_gradient_untouched(self):
        grads = np.array([0.1, 0.2])
        clipped, _ = clip_by_global_norm(grads, 1.0)
        assert clipped is grads


class TestAdamStep:
    def test_first_step_moves_by_lr(self):
        params, state = adam_step(np.zeros(3), np.array([0.5, -2.0, 0.1]), AdamState.zeros(3), 0.01, 10.0)
        np.testing.assert_allclose(params, [-0.01, 0.01, -0.01], rtol=1e-6)
        assert state.step == 1

    def test_minimizes_quadratic(self):
        target = np.array([1.0, -2.0, 0.5])
        params, state = np.zeros(3), AdamState.zeros(3)
        for _ in range(2000):
            params, state = adam_step(params, 2.0 * (params - target), state, 0.05, 10.0)
        np.testing.assert_allclose(params, target, atol=2e-2)

    def test_adamw_decays_weights(self):
        params = np.array([1.0, 1.0])
        plain, _ = adam_step(params, np.zeros(2), AdamState.zeros(2), 0.1, 1.0, OptimizerKind.ADAM, 0.5)
        decayed, _ = adam_step(params, np.zeros(2), AdamState.zeros(2), 0.1, 1.0, OptimizerKind.ADAMW, 0.5)
        np.testing.assert_array_equal(plain, params)
        np.testing.assert_allclose(decayed, 0.95)

    def test_non_finite_gradient(self):
        with pytest.raises(NumericError):
            adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2), 0.1, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1, 1.0)
