"""Small numerical helpers shared by the optimisers."""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np
from attrs import frozen
from numpy.typing import NDArray
from scipy import linalg

__all__ = [
    "central_difference",
    "gradient_error",
    "DescentResult",
    "gradient_descent",
    "projected_gradient_norm",
    "projected_newton",
]

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]


def central_difference(
    func: Callable[[Vector], float], x: Vector, step: float = 1e-5
) -> Vector:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        base = np.zeros_like(x)
        base.flat[i] = step
        grad.flat[i] = (func(x + base) - func(x - base)) / (2 * step)
    return grad


def gradient_error(
    func: Callable[[Vector], float],
    grad: Callable[[Vector], Vector],
    x: Vector,
    step: float = 1e-5,
) -> float:
    """Max-norm difference between an analytic and a finite-difference gradient."""
    numeric = central_difference(func, x, step)
    return float(np.max(np.abs(numeric - grad(x)), initial=0.0))


@frozen
class DescentResult:
    """Result of `gradient_descent`.

    Attributes:
        x: The best point seen.
        value: The objective at `x`.
        trace: Accepted objective values, starting at the initial point.
        converged: Whether the stopping criterion was met before max_iter.
        n_iter: Number of iterations run.
    """

    x: Vector
    value: float
    trace: list[float]
    converged: bool
    n_iter: int


def gradient_descent(
    func: Callable[[Vector], tuple[float, Vector]],
    x0: Vector,
    *,
    lr: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    lower: float | None = None,
    armijo: float = 1e-4,
    criterion: str = "value",
    bb: bool = False,
) -> DescentResult:
    """Gradient descent with backtracking line search.

    Each step starts from twice the last accepted step (at most `lr`) and is
    halved until the Armijo condition holds. With `bb`, the trial step is the
    Barzilai-Borwein step sᵀs / sᵀy of the last move instead, and `lr` is
    only the first trial step. With `lower` set, iterates are clipped to
    `x >= lower` after every step (projected gradient descent) and the Armijo
    condition uses the projected step.

    Args:
        func: Returns the objective and its gradient.
        x0: Starting point.
        lr: Largest step size, or the first step with `bb`.
        tol: Stopping tolerance.
        max_iter: Maximum number of iterations.
        lower: Optional lower bound for every coordinate.
        armijo: Sufficient-decrease constant.
        criterion: "value" stops when the accepted objective changes by less
            than `tol`; "gradient" stops when the (projected) gradient mapping
            has max-norm below `tol`.
        bb: Use Barzilai-Borwein trial steps.

    Returns:
        DescentResult: `converged` is False when max_iter is reached or the
        line search stalls before the criterion is met.
    """

    def project(x: Vector) -> Vector:
        return np.maximum(x, lower) if lower is not None else x

    x = project(np.asarray(x0, dtype=np.float64).copy())
    value, grad = func(x)
    trace = [value]
    step = lr
    prev: tuple[Vector, Vector] | None = None
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if criterion == "gradient" and projected_gradient_norm(x, grad, lower) < tol:
            converged = True
            break
        step = _trial_step(x, grad, prev, step, lr) if bb else min(2 * step, lr)
        while True:
            candidate = project(x - step * grad)
            cand_value, cand_grad = func(candidate)
            decrease = armijo * float(np.dot(grad.ravel(), (x - candidate).ravel()))
            if np.isfinite(cand_value) and cand_value <= value - decrease:
                break
            step /= 2
            if step < 1e-20:
                logger.warning("Line search stalled after %d iterations.", n_iter)
                return DescentResult(x, value, trace, False, n_iter)
        change = value - cand_value
        prev = (x, grad)
        x, value, grad = candidate, cand_value, cand_grad
        trace.append(value)
        if criterion == "value" and change < tol:
            converged = True
            break
    if not converged:
        logger.warning("Gradient descent stopped at max_iter=%d.", max_iter)
    return DescentResult(x, value, trace, converged, n_iter)


def _trial_step(
    x: Vector, grad: Vector, prev: tuple[Vector, Vector] | None, step: float, lr: float
) -> float:
    if prev is None:
        return lr
    s = (x - prev[0]).ravel()
    y = (grad - prev[1]).ravel()
    sy = float(np.dot(s, y))
    if sy <= 0:
        return min(2 * step, 1e10)
    return float(np.clip(np.dot(s, s) / sy, 1e-10, 1e10))


def projected_gradient_norm(x: Vector, grad: Vector, lower: float | None = None) -> float:
    """Max-norm of the projected gradient mapping x - P(x - grad)."""
    moved = x - grad if lower is None else np.maximum(x - grad, lower)
    return float(np.max(np.abs(x - moved), initial=0.0))


def projected_newton(
    func: Callable[[Vector], tuple[float, Vector]],
    hess: Callable[[Vector], NDArray[np.float64]],
    x0: Vector,
    *,
    lower: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> DescentResult:
    """Refine a bound-constrained stationary point with Newton steps.

    Steps are taken on the free coordinates (above `lower`, or at it with a
    negative gradient) and accepted while the projected gradient norm keeps
    falling, so the iteration does not depend on objective differences below
    floating-point resolution. It stops without converging when the free
    Hessian is not positive definite.
    """
    x = np.maximum(np.asarray(x0, dtype=np.float64).copy(), lower)
    value, grad = func(x)
    trace = [value]
    norm = projected_gradient_norm(x, grad, lower)
    n_iter = 0
    while norm >= tol and n_iter < max_iter:
        n_iter += 1
        free = (x > lower) | (grad < 0)
        try:
            factor = linalg.cho_factor(hess(x)[np.ix_(free, free)])
        except linalg.LinAlgError:
            logger.debug("Newton refinement stopped at an indefinite Hessian.")
            break
        candidate = x.copy()
        candidate[free] -= linalg.cho_solve(factor, grad[free])
        candidate = np.maximum(candidate, lower)
        cand_value, cand_grad = func(candidate)
        cand_norm = projected_gradient_norm(candidate, cand_grad, lower)
        if not cand_norm < norm:
            break
        x, value, grad, norm = candidate, cand_value, cand_grad, cand_norm
        trace.append(value)
    return DescentResult(x, value, trace, norm < tol, n_iter)
