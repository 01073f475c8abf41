"""The Gaussian information bottleneck and its sparse (diagonal) variant.

For jointly Gaussian (X, Y) the optimal encoder is a noisy linear projection
T = A·X + ξ with ξ ~ N(0, I), and the objective becomes

    I(X;T) - β·I(T;Y) = (1-β)/2·ln|AΣ_XAᵀ + I| + β/2·ln|AΣ_{X|Y}Aᵀ + I|.

The analytic solution is built from the left eigenvectors of Σ_{X|Y}Σ_X⁻¹.
The variant Σ_{X|Y}Σ_Y⁻¹ that is sometimes quoted is not defined when
dim X ≠ dim Y; the numerical optimiser `gib_numeric` agrees with Σ_{X|Y}Σ_X⁻¹.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import pandas as pd
from attrs import field, frozen
from numpy.typing import NDArray
from scipy import linalg, optimize

from iblab import gaussian_core as gc
from iblab.gaussian_core import DegenerateCovariance, GaussianError, GaussianJoint
from iblab.optim import gradient_descent, gradient_error, projected_newton

__all__ = [
    "GibSolution",
    "SparseGibSolution",
    "ComplexEigenvalue",
    "projected_joint",
    "gib_objective",
    "gib_gradient",
    "gib_eigen",
    "canonical_correlations",
    "gib_analytic",
    "gib_numeric",
    "gib_curve",
    "sparse_objective",
    "sparse_gib",
    "logdet_identity_gap",
]

logger = logging.getLogger(__name__)

EIG_CLAMP = 1e-10
# Projected-gradient level at which sparse GIB hands over to Newton steps.
COARSE_TOL = 1e-7
TIE_TOL = 1e-12


class ComplexEigenvalue(GaussianError):
    """Raised when the GIB eigenproblem returns non-real eigenvalues."""


@frozen
class GibSolution:
    """A Gaussian IB encoder T = A·X + ξ with identity noise.

    Attributes:
        a: Projection matrix, (dim T x dim X).
        beta: Trade-off parameter.
        i_xt: I(X;T) in nats.
        i_ty: I(T;Y) in nats.
        critical_betas: Ascending critical β values of the joint.
        objective: I(X;T) - β·I(T;Y).
        gradient_error: Max gradient error at `a`, when checked.
    """

    a: NDArray[np.float64] = field(eq=False)
    beta: float
    i_xt: float
    i_ty: float
    critical_betas: list[float]
    objective: float
    gradient_error: float | None = None

    @property
    def noise_cov(self) -> NDArray[np.float64]:
        return np.eye(self.a.shape[0])

    @property
    def rank(self) -> int:
        return int(np.sum(np.any(self.a != 0.0, axis=1)))


def _xy_covs(joint: GaussianJoint, x: str, y: str) -> tuple[NDArray, NDArray]:
    sigma_x = joint.sub_cov(x)
    sigma_x_y = gc.conditional(joint, x, y).cov
    return sigma_x, sigma_x_y


def projected_joint(
    joint: GaussianJoint,
    a: NDArray[np.float64],
    x: str = "X",
    y: str = "Y",
    t: str = "T",
    noise_cov: NDArray[np.float64] | None = None,
) -> GaussianJoint:
    """The joint over (X, Y, T) when T = A·X + ξ, ξ ~ N(0, noise_cov).

    The noise covariance defaults to the identity.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    base = joint.marginal([x, y])
    sigma_x = base.sub_cov(x)
    if a.shape[1] != sigma_x.shape[0]:
        raise ValueError(f"A has {a.shape[1]} columns but X has dimension {sigma_x.shape[0]}.")
    d_t = a.shape[0]
    noise = np.eye(d_t) if noise_cov is None else np.atleast_2d(noise_cov)
    cross = a @ base.sub_cov(x, [x, y])  # Cov(T, (X, Y))
    cov = np.block(
        [
            [base.cov, cross.T],
            [cross, a @ sigma_x @ a.T + noise],
        ]
    )
    return GaussianJoint([*base.blocks, (t, d_t)], 0.5 * (cov + cov.T))


def gib_objective(
    joint: GaussianJoint, a: NDArray[np.float64], beta: float, x: str = "X", y: str = "Y"
) -> float:
    """I(X;AX+ξ) - β·I(AX+ξ;Y) with ξ ~ N(0, I)."""
    full = projected_joint(joint, a, x, y, "T")
    return gc.mutual_information(full, x, "T") - beta * gc.mutual_information(full, "T", y)


def _objective_and_grad(
    a: NDArray[np.float64], sigma_x: NDArray, sigma_x_y: NDArray, beta: float
) -> tuple[float, NDArray[np.float64]]:
    eye = np.eye(a.shape[0])
    m_x = a @ sigma_x @ a.T + eye
    m_xy = a @ sigma_x_y @ a.T + eye
    value = 0.5 * (1 - beta) * gc.logdet(m_x) + 0.5 * beta * gc.logdet(m_xy)
    grad = (1 - beta) * np.linalg.solve(m_x, a @ sigma_x) + beta * np.linalg.solve(
        m_xy, a @ sigma_x_y
    )
    return value, grad


def gib_gradient(
    joint: GaussianJoint, a: NDArray[np.float64], beta: float, x: str = "X", y: str = "Y"
) -> NDArray[np.float64]:
    """Analytic gradient of `gib_objective` with respect to A."""
    sigma_x, sigma_x_y = _xy_covs(joint, x, y)
    return _objective_and_grad(np.atleast_2d(a), sigma_x, sigma_x_y, beta)[1]


def gib_eigen(
    joint: GaussianJoint, x: str = "X", y: str = "Y"
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenvalues (ascending) and left eigenvectors of Σ_{X|Y}Σ_X⁻¹.

    Solved as the symmetric-definite problem Σ_{X|Y}v = λΣ_X v, so the
    eigenvalues are real and the eigenvectors (columns) satisfy vᵀΣ_X v = 1.

    Raises:
        ComplexEigenvalue: If the unsymmetrised matrix has eigenvalues with
            imaginary part above 1e-10, which signals bad conditioning.
        DegenerateCovariance: If Σ_X or Σ_{X|Y} is not positive definite.
    """
    sigma_x, sigma_x_y = _xy_covs(joint, x, y)
    gc.logdet(sigma_x)
    direct = np.linalg.eigvals(sigma_x_y @ np.linalg.inv(sigma_x))
    if np.max(np.abs(direct.imag), initial=0.0) > EIG_CLAMP:
        raise ComplexEigenvalue("Σ_{X|Y}Σ_X⁻¹ has complex eigenvalues.")
    try:
        lam, vecs = linalg.eigh(sigma_x_y, sigma_x)
    except linalg.LinAlgError:
        raise DegenerateCovariance("Σ_X is not positive definite.") from None
    lam = np.where(np.abs(lam) < EIG_CLAMP, 0.0, lam)
    lam = np.where(np.abs(lam - 1.0) < EIG_CLAMP, 1.0, lam)
    if lam.min() <= 0:
        raise DegenerateCovariance("Σ_{X|Y} is singular; X is a deterministic function of Y.")
    return np.clip(lam, 0.0, 1.0), vecs


def canonical_correlations(joint: GaussianJoint, x: str = "X", y: str = "Y") -> NDArray[np.float64]:
    """Canonical correlations of X and Y, matched to `gib_eigen` order.

    The GIB eigenvalues are λ_i = 1 - ρ_i², so the most correlated canonical
    direction is the first to switch on.
    """
    lam, _ = gib_eigen(joint, x, y)
    return np.sqrt(1.0 - lam)


def _critical(lam: NDArray[np.float64]) -> list[float]:
    with np.errstate(divide="ignore"):
        return [float(1.0 / (1.0 - v)) if v < 1.0 else float("inf") for v in lam]


def _solution(
    joint: GaussianJoint,
    a: NDArray[np.float64],
    beta: float,
    critical: list[float],
    x: str,
    y: str,
    grad_err: float | None = None,
) -> GibSolution:
    full = projected_joint(joint, a, x, y, "T")
    i_xt = gc.mutual_information(full, x, "T")
    i_ty = gc.mutual_information(full, "T", y)
    return GibSolution(a, beta, i_xt, i_ty, critical, i_xt - beta * i_ty, grad_err)


def gib_analytic(joint: GaussianJoint, beta: float, x: str = "X", y: str = "Y") -> GibSolution:
    """The analytic GIB encoder.

    Row i of A is α_i·v_iᵀ when β > β_i = 1/(1-λ_i), and zero otherwise, with
    α_i = sqrt((β(1-λ_i) - 1) / (λ_i·v_iᵀΣ_X v_i)).
    At β equal to a critical value the row stays zero.
    """
    lam, vecs = gib_eigen(joint, x, y)
    sigma_x = joint.sub_cov(x)
    critical = _critical(lam)
    a = np.zeros((lam.size, lam.size))
    for i, (lam_i, beta_i) in enumerate(zip(lam, critical)):
        if beta > beta_i:
            v = vecs[:, i]
            r = float(v @ sigma_x @ v)
            alpha = np.sqrt((beta * (1.0 - lam_i) - 1.0) / (lam_i * r))
            a[i] = alpha * v
    return _solution(joint, a, beta, critical, x, y)


def gib_numeric(
    joint: GaussianJoint,
    beta: float,
    t_dim: int | None = None,
    seed: int = 0,
    tol: float = 1e-10,
    n_starts: int = 8,
    x: str = "X",
    y: str = "Y",
) -> GibSolution:
    """Minimise the GIB objective over A directly, as an oracle.

    BFGS on the analytic gradient from `n_starts` starts, start k drawn with
    seed `seed + k`; the best result is returned with the gradient checked
    against central differences there.
    """
    sigma_x, sigma_x_y = _xy_covs(joint, x, y)
    d_x = sigma_x.shape[0]
    t_dim = d_x if t_dim is None else t_dim
    if t_dim < 1:
        raise ValueError(f"t_dim must be at least 1, got {t_dim}.")
    shape = (t_dim, d_x)

    def fun(flat):
        value, grad = _objective_and_grad(flat.reshape(shape), sigma_x, sigma_x_y, beta)
        return value, grad.ravel()

    best = None
    for k in range(n_starts):
        rng = np.random.default_rng(seed + k)
        x0 = rng.normal(scale=1.0, size=t_dim * d_x)
        res = optimize.minimize(fun, x0, jac=True, method="BFGS", options={"gtol": tol})
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    a = best.x.reshape(shape)
    err = gradient_error(lambda v: fun(v)[0], lambda v: fun(v)[1], best.x)
    if err > 1e-5:
        logger.warning("GIB gradient check failed: max error %.2e.", err)
    critical = _critical(gib_eigen(joint, x, y)[0])
    return _solution(joint, a, beta, critical, x, y, err)


def gib_curve(joint: GaussianJoint, betas: Sequence[float], x: str = "X", y: str = "Y") -> pd.DataFrame:
    """The analytic information curve: columns beta, i_xt, i_ty, rank."""
    rows = []
    for beta in betas:
        sol = gib_analytic(joint, beta, x, y)
        rows.append((beta, sol.i_xt, sol.i_ty, sol.rank))
    return pd.DataFrame(rows, columns=["beta", "i_xt", "i_ty", "rank"])


@frozen
class SparseGibSolution:
    """A diagonal GIB encoder T = D^{1/2}·X + ξ.

    Attributes:
        d: Non-negative diagonal entries d_i = a_i².
        beta: Trade-off parameter.
        i_xt: I(X;T) in nats.
        i_ty: I(T;Y) in nats.
        objective: Value of the sparse objective at `d`.
        kkt_residual: Max violation of the KKT conditions at `d`.
        converged: Whether the projected descent met its tolerance.
    """

    d: NDArray[np.float64] = field(eq=False)
    beta: float
    i_xt: float
    i_ty: float
    objective: float
    kkt_residual: float
    converged: bool

    @property
    def a(self) -> NDArray[np.float64]:
        return np.diag(np.sqrt(self.d))

    @property
    def rank(self) -> int:
        return int(np.sum(self.d > 0))


def _sparse_value_grad(
    d: NDArray[np.float64], sigma_x: NDArray, sigma_x_y: NDArray, beta: float
) -> tuple[float, NDArray[np.float64]]:
    eye = np.eye(d.size)
    # ln|AΣAᵀ + I| = ln|ΣD + I| for A = D^{1/2}
    m_x = sigma_x * d[None, :] + eye
    m_xy = sigma_x_y * d[None, :] + eye
    value = 0.5 * (1 - beta) * np.linalg.slogdet(m_x)[1] + 0.5 * beta * np.linalg.slogdet(m_xy)[1]
    grad = 0.5 * (1 - beta) * np.diag(np.linalg.solve(m_x, sigma_x)) + 0.5 * beta * np.diag(
        np.linalg.solve(m_xy, sigma_x_y)
    )
    return float(value), grad


def _sparse_hessian(
    d: NDArray[np.float64], sigma_x: NDArray, sigma_x_y: NDArray, beta: float
) -> NDArray[np.float64]:
    eye = np.eye(d.size)
    # ∂²/∂d_i∂d_j ln|ΣD + I| = -M_ij·M_ji with M = (ΣD + I)⁻¹Σ
    m_x = np.linalg.solve(sigma_x * d[None, :] + eye, sigma_x)
    m_xy = np.linalg.solve(sigma_x_y * d[None, :] + eye, sigma_x_y)
    return -0.5 * (1 - beta) * m_x * m_x.T - 0.5 * beta * m_xy * m_xy.T


def sparse_objective(
    joint: GaussianJoint, d: NDArray[np.float64], beta: float, x: str = "X", y: str = "Y"
) -> float:
    """The GIB objective restricted to diagonal projections, as a function of d."""
    sigma_x, sigma_x_y = _xy_covs(joint, x, y)
    return _sparse_value_grad(np.asarray(d, dtype=np.float64), sigma_x, sigma_x_y, beta)[0]


def _kkt_residual(d: NDArray[np.float64], grad: NDArray[np.float64]) -> float:
    active = d > 0
    return float(
        max(
            np.max(np.abs(grad[active]), initial=0.0),
            np.max(-grad[~active], initial=0.0),
        )
    )


def sparse_gib(
    joint: GaussianJoint,
    beta: float,
    tol: float = 1e-10,
    seed: int = 0,
    n_starts: int = 8,
    max_iter: int = 50_000,
    x: str = "X",
    y: str = "Y",
) -> SparseGibSolution:
    """Minimise the GIB objective over non-negative diagonal D.

    Projected gradient descent with Barzilai-Borwein steps brings every start
    to a projected gradient below `max(tol, COARSE_TOL)`; Newton steps on the
    free entries then refine it to `tol`. Starts are log-uniform in
    [1e-3, 10] per entry, drawn with seed `seed + k`.
    """
    sigma_x, sigma_x_y = _xy_covs(joint, x, y)
    if sigma_x.shape[0] != sigma_x_y.shape[0]:
        raise ValueError("Sparse GIB needs dim T = dim X.")
    n = sigma_x.shape[0]

    def func(d):
        return _sparse_value_grad(d, sigma_x, sigma_x_y, beta)

    def hess(d):
        return _sparse_hessian(d, sigma_x, sigma_x_y, beta)

    best = None
    for k in range(n_starts):
        rng = np.random.default_rng(seed + k)
        d0 = 10.0 ** rng.uniform(-3.0, 1.0, size=n)
        coarse = gradient_descent(
            func,
            d0,
            lr=1.0,
            tol=max(tol, COARSE_TOL),
            max_iter=max_iter,
            lower=0.0,
            criterion="gradient",
            bb=True,
        )
        res = projected_newton(func, hess, coarse.x, lower=0.0, tol=tol)
        # Values equal to rounding count as ties; a converged run wins a tie.
        if (
            best is None
            or res.value < best.value - TIE_TOL
            or (res.value <= best.value + TIE_TOL and res.converged and not best.converged)
        ):
            best = res
    assert best is not None
    d = best.x
    _, grad = func(d)
    full = projected_joint(joint, np.diag(np.sqrt(d)), x, y, "T")
    return SparseGibSolution(
        d=d,
        beta=beta,
        i_xt=gc.mutual_information(full, x, "T"),
        i_ty=gc.mutual_information(full, "T", y),
        objective=best.value,
        kkt_residual=_kkt_residual(d, grad),
        converged=best.converged,
    )


def logdet_identity_gap(a: NDArray[np.float64], sigma: NDArray[np.float64]) -> float:
    """|ln|AΣAᵀ + I| - ln|ΣAᵀA + I||, zero for any A and positive definite Σ."""
    a = np.atleast_2d(a)
    left = np.linalg.slogdet(a @ sigma @ a.T + np.eye(a.shape[0]))[1]
    right = np.linalg.slogdet(sigma @ a.T @ a + np.eye(sigma.shape[0]))[1]
    return float(abs(left - right))
