import numpy as np
import pytest

from iblab.optim import (
    central_difference,
    gradient_descent,
    gradient_error,
    projected_gradient_norm,
    projected_newton,
)


def quadratic(x):
    return float(np.sum((x - 3.0) ** 2)), 2 * (x - 3.0)


class TestFiniteDifference:
    def test_central_difference(self):
        grad = central_difference(lambda x: float(np.sum(x**3)), np.array([1.0, 2.0]))
        np.testing.assert_allclose(grad, [3.0, 12.0], rtol=1e-8)

    def test_gradient_error_small_for_correct_gradient(self):
        error = gradient_error(
            lambda x: quadratic(x)[0], lambda x: quadratic(x)[1], np.array([0.5, -1.0])
        )
        assert error < 1e-8

    def test_gradient_error_large_for_wrong_gradient(self):
        error = gradient_error(lambda x: quadratic(x)[0], lambda x: x, np.array([0.5, -1.0]))
        assert error > 1.0


class TestGradientDescent:
    def test_minimises_quadratic(self):
        result = gradient_descent(quadratic, np.zeros(3), lr=0.4, tol=1e-14)
        assert result.converged
        np.testing.assert_allclose(result.x, 3.0, atol=1e-6)

    def test_trace_is_non_increasing(self):
        result = gradient_descent(quadratic, np.zeros(2), lr=10.0)
        assert np.all(np.diff(result.trace) <= 0)
        assert result.trace[0] == pytest.approx(18.0)

    def test_projection(self):
        result = gradient_descent(
            lambda x: (float(np.sum((x + 1.0) ** 2)), 2 * (x + 1.0)),
            np.ones(2),
            lower=0.0,
            tol=1e-10,
            criterion="gradient",
        )
        assert result.converged
        np.testing.assert_allclose(result.x, 0.0, atol=1e-12)

    def test_start_is_projected(self):
        result = gradient_descent(quadratic, np.array([-5.0]), lower=0.0, max_iter=1)
        assert result.trace[0] == pytest.approx(9.0)

    def test_max_iter(self):
        result = gradient_descent(quadratic, np.zeros(2), lr=1e-3, tol=1e-16, max_iter=3)
        assert not result.converged
        assert result.n_iter == 3
        assert len(result.trace) == 4

    def test_stalled_line_search_is_not_converged(self, caplog):
        # Every point but the start is worse, so no step passes the Armijo test.
        start = np.zeros(2)
        result = gradient_descent(
            lambda x: (0.0 if np.array_equal(x, start) else 1.0, np.ones(2)),
            start,
            tol=1e-12,
            criterion="gradient",
        )
        assert not result.converged
        assert "stalled" in caplog.text

    def test_barzilai_borwein_steps_grow_past_lr(self):
        # Curvature 1e-4: capped steps of 1.0 would need about 1e5 iterations.
        def flat(x):
            return float(0.5e-4 * np.sum((x - 50.0) ** 2)), 1e-4 * (x - 50.0)

        result = gradient_descent(
            flat, np.zeros(2), lr=1.0, tol=1e-12, max_iter=200, criterion="gradient", bb=True
        )
        assert result.converged
        np.testing.assert_allclose(result.x, 50.0, atol=1e-6)


def test_projected_gradient_norm():
    x = np.array([0.0, 2.0])
    grad = np.array([3.0, -0.5])
    assert projected_gradient_norm(x, grad, lower=0.0) == pytest.approx(0.5)
    assert projected_gradient_norm(x, grad) == pytest.approx(3.0)


class TestProjectedNewton:
    @staticmethod
    def func(x):
        # Minimum at (2, 0) on x >= 0: the second coordinate is held at the bound.
        target = np.array([2.0, -1.0])
        return float(np.sum((x - target) ** 2 + 0.1 * x**4)), 2 * (x - target) + 0.4 * x**3

    @staticmethod
    def hess(x):
        return np.diag(2.0 + 1.2 * x**2)

    def test_reaches_bound_constrained_minimum(self):
        result = projected_newton(self.func, self.hess, np.array([0.5, 0.5]), tol=1e-12)
        assert result.converged
        assert result.x[1] == 0.0
        assert projected_gradient_norm(result.x, self.func(result.x)[1], 0.0) < 1e-12

    def test_indefinite_hessian_stops(self):
        result = projected_newton(
            self.func, lambda x: -np.eye(2), np.array([0.5, 0.5]), tol=1e-12
        )
        assert not result.converged
        assert result.n_iter == 1
        np.testing.assert_array_equal(result.x, [0.5, 0.5])
