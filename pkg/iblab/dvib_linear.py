"""The variational information bottleneck with linear-Gaussian maps.

The encoder is T = A·X + ξ with ξ ~ N(0, diag(exp(s))) and the decoder is
Y | T ~ N(B·T, diag(exp(u))). Every term of the objective

    E_X KL(P(T|X) || P(T)) - β·(E log P_dec(Y|T) + H(Y))

is a closed form of the second moments, so training is deterministic
gradient descent on analytic gradients.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from attrs import field, frozen
from numpy.typing import NDArray
from scipy import special, stats
from tqdm import tqdm

from iblab import gaussian_core as gc
from iblab.gaussian_core import GaussianConditional, GaussianJoint
from iblab.gaussian_ib import projected_joint
from iblab.optim import gradient_descent, gradient_error

__all__ = [
    "LinearDvibParams",
    "DvibTerms",
    "DvibResult",
    "ConstantColumn",
    "NonFiniteInput",
    "dvib_objective",
    "dvib_gradient",
    "dvib_train",
    "dvib_curve",
    "copula_transform",
]

logger = logging.getLogger(__name__)

LOGVAR_MIN = float(np.log(1e-8))
LOGVAR_MAX = float(np.log(1e8))
PRIORS = ("marginal", "standard")
GRAD_CHECK_TOL = 1e-5
LOG_2PI = float(np.log(2 * np.pi))


class ConstantColumn(ValueError):
    """Raised when a data column has a single distinct value."""


class NonFiniteInput(ValueError):
    """Raised when data contain NaN or infinite values."""


def _to_matrix(value: Any) -> NDArray[np.float64]:
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def _to_vector(value: Any) -> NDArray[np.float64]:
    return np.atleast_1d(np.asarray(value, dtype=np.float64)).ravel()


@frozen
class LinearDvibParams:
    """Parameters of the linear-Gaussian encoder and decoder.

    Attributes:
        enc_weight: A, (dim T x dim X).
        enc_logvar: Log noise variances of T | X, length dim T.
        dec_weight: B, (dim Y x dim T).
        dec_logvar: Log noise variances of Y | T, length dim Y.
    """

    enc_weight: NDArray[np.float64] = field(converter=_to_matrix, eq=False)
    enc_logvar: NDArray[np.float64] = field(converter=_to_vector, eq=False)
    dec_weight: NDArray[np.float64] = field(converter=_to_matrix, eq=False)
    dec_logvar: NDArray[np.float64] = field(converter=_to_vector, eq=False)

    def __attrs_post_init__(self):
        t_dim = self.enc_weight.shape[0]
        if self.enc_logvar.shape != (t_dim,):
            raise ValueError(f"enc_logvar must have length {t_dim}.")
        if self.dec_weight.shape[1] != t_dim:
            raise ValueError(f"dec_weight must have {t_dim} columns.")
        if self.dec_logvar.shape != (self.dec_weight.shape[0],):
            raise ValueError(f"dec_logvar must have length {self.dec_weight.shape[0]}.")
        for name in ("enc_logvar", "dec_logvar"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries.")

    @property
    def t_dim(self) -> int:
        return self.enc_weight.shape[0]

    @property
    def x_dim(self) -> int:
        return self.enc_weight.shape[1]

    @property
    def y_dim(self) -> int:
        return self.dec_weight.shape[0]

    @property
    def enc_cov(self) -> NDArray[np.float64]:
        return np.diag(np.exp(np.clip(self.enc_logvar, LOGVAR_MIN, LOGVAR_MAX)))

    @property
    def dec_cov(self) -> NDArray[np.float64]:
        return np.diag(np.exp(np.clip(self.dec_logvar, LOGVAR_MIN, LOGVAR_MAX)))

    def encoder(self) -> GaussianConditional:
        return GaussianConditional(self.enc_weight, self.enc_cov)

    def decoder(self) -> GaussianConditional:
        return GaussianConditional(self.dec_weight, self.dec_cov)

    def to_vector(self) -> NDArray[np.float64]:
        return np.concatenate(
            [
                self.enc_weight.ravel(),
                self.enc_logvar,
                self.dec_weight.ravel(),
                self.dec_logvar,
            ]
        )

    @classmethod
    def from_vector(
        cls, theta: NDArray[np.float64], x_dim: int, y_dim: int, t_dim: int
    ) -> LinearDvibParams:
        a, s, b, u = _unpack(theta, x_dim, y_dim, t_dim)
        return cls(a, s, b, u)

    @classmethod
    def initial(
        cls, x_dim: int, y_dim: int, t_dim: int, seed: int, y_var: NDArray[np.float64]
    ) -> LinearDvibParams:
        """Random weights N(0, 0.5²), unit encoder noise, decoder noise Var Y."""
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(scale=0.5, size=(t_dim, x_dim)),
            np.zeros(t_dim),
            rng.normal(scale=0.5, size=(y_dim, t_dim)),
            np.log(np.asarray(y_var, dtype=np.float64)),
        )


def _unpack(
    theta: NDArray[np.float64], x_dim: int, y_dim: int, t_dim: int
) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    cuts = np.cumsum([t_dim * x_dim, t_dim, y_dim * t_dim])
    a, s, b, u = np.split(np.asarray(theta, dtype=np.float64), cuts)
    return a.reshape(t_dim, x_dim), s, b.reshape(y_dim, t_dim), u


class DvibTerms(NamedTuple):
    value: float
    i_xt: float
    i_ty_bound: float


class _Moments(NamedTuple):
    sigma_x: NDArray[np.float64]
    sigma_xy: NDArray[np.float64]
    sigma_y: NDArray[np.float64]
    h_y: float


def _moments(joint: GaussianJoint, x: str, y: str) -> _Moments:
    return _Moments(
        joint.sub_cov(x), joint.sub_cov(x, y), joint.sub_cov(y), gc.entropy(joint, y)
    )


def _check_prior(prior: str) -> None:
    if prior not in PRIORS:
        raise ValueError(f"Unknown prior '{prior}', expected one of {PRIORS}.")


def dvib_objective(
    params: LinearDvibParams,
    joint: GaussianJoint,
    beta: float,
    prior: str = "marginal",
    drop_hy: bool = False,
    x: str = "X",
    y: str = "Y",
) -> DvibTerms:
    """Evaluate the objective and its two terms on the exact second moments.

    The rate term is E_X KL(P(T|X) || P(T)) with the induced marginal P(T)
    when `prior` is "marginal" (this equals I(X;T)), or E_X KL(P(T|X) || N(0, I))
    when it is "standard". The bound term is E log P_dec(Y|T) under the coupling
    in which T is drawn from the encoder given X, plus H(Y) unless `drop_hy`.

    Raises:
        DegenerateCovariance: If an implied covariance is not positive definite.
    """
    _check_prior(prior)
    if params.x_dim != joint.block_dim(x) or params.y_dim != joint.block_dim(y):
        raise ValueError("Parameter dimensions do not match the joint.")
    full = projected_joint(joint, params.enc_weight, x, y, "T", noise_cov=params.enc_cov)
    if prior == "marginal":
        i_xt = gc.mutual_information(full, x, "T")
    else:
        sigma_t = full.sub_cov("T")
        i_xt = 0.5 * (
            float(np.trace(sigma_t)) - params.t_dim - gc.logdet(params.enc_cov)
        )
    bound = gc.expected_log_density(full, params.decoder(), target=y, given="T")
    if not drop_hy:
        bound += gc.entropy(joint, y)
    return DvibTerms(i_xt - beta * bound, i_xt, bound)


def _value_and_grad(
    theta: NDArray[np.float64],
    dims: tuple[int, int, int],
    moments: _Moments,
    beta: float,
    prior: str,
) -> tuple[float, NDArray[np.float64]]:
    a, s, b, u = _unpack(theta, *dims)
    sigma_x, sigma_xy, sigma_y, h_y = moments
    s_in = (s >= LOGVAR_MIN) & (s <= LOGVAR_MAX)
    u_in = (u >= LOGVAR_MIN) & (u <= LOGVAR_MAX)
    psi = np.exp(np.clip(s, LOGVAR_MIN, LOGVAR_MAX))
    phi_inv = np.exp(-np.clip(u, LOGVAR_MIN, LOGVAR_MAX))

    sigma_t = a @ sigma_x @ a.T + np.diag(psi)
    cross = a @ sigma_xy  # Cov(T, Y)
    resid = sigma_y - b @ cross - cross.T @ b.T + b @ sigma_t @ b.T

    if prior == "marginal":
        i_xt = 0.5 * gc.logdet(sigma_t) - 0.5 * float(np.sum(np.log(psi)))
        t_inv = np.linalg.inv(sigma_t)
        g_a = t_inv @ a @ sigma_x
        g_s = 0.5 * np.diag(t_inv) * psi - 0.5
    else:
        i_xt = 0.5 * (float(np.trace(sigma_t)) - psi.size - float(np.sum(np.log(psi))))
        g_a = a @ sigma_x
        g_s = 0.5 * (psi - 1.0)

    ell = -0.5 * (
        b.shape[0] * LOG_2PI
        + float(np.sum(np.log(1.0 / phi_inv)))
        + float(np.sum(np.diag(resid) * phi_inv))
    )
    weighted_b = phi_inv[:, None] * b  # Φ⁻¹B
    gram = b.T @ weighted_b  # BᵀΦ⁻¹B
    l_b = phi_inv[:, None] * (cross.T - b @ sigma_t)
    l_u = -0.5 * (1.0 - np.diag(resid) * phi_inv)
    l_a = weighted_b.T @ sigma_xy.T - gram @ a @ sigma_x
    l_s = -0.5 * np.diag(gram) * psi

    value = i_xt - beta * (ell + h_y)
    grad = np.concatenate(
        [
            (g_a - beta * l_a).ravel(),
            (g_s - beta * l_s) * s_in,
            (-beta * l_b).ravel(),
            (-beta * l_u) * u_in,
        ]
    )
    return float(value), grad


def dvib_gradient(
    params: LinearDvibParams,
    joint: GaussianJoint,
    beta: float,
    prior: str = "marginal",
    x: str = "X",
    y: str = "Y",
) -> NDArray[np.float64]:
    """Analytic gradient of the objective, flattened like `to_vector`."""
    _check_prior(prior)
    dims = (params.x_dim, params.y_dim, params.t_dim)
    return _value_and_grad(params.to_vector(), dims, _moments(joint, x, y), beta, prior)[1]


@frozen
class DvibResult:
    """Result of `dvib_train`.

    Attributes:
        params: The trained parameters.
        beta: Trade-off parameter.
        i_xt: Rate term at `params`.
        i_ty_bound: Bound term at `params`.
        value: Objective at `params`.
        trace: Objective after every accepted step.
        converged: Whether the objective change fell below the tolerance.
        grad_error_init: Max gradient error at the starting point.
        grad_error_final: Max gradient error at `params`.
    """

    params: LinearDvibParams
    beta: float
    i_xt: float
    i_ty_bound: float
    value: float
    trace: list[float]
    converged: bool
    grad_error_init: float
    grad_error_final: float

    @property
    def gradient_ok(self) -> bool:
        return max(self.grad_error_init, self.grad_error_final) < GRAD_CHECK_TOL


def dvib_train(
    joint: GaussianJoint,
    beta: float,
    t_dim: int | None = None,
    seed: int = 0,
    lr: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 20_000,
    prior: str = "marginal",
    drop_hy: bool = False,
    x: str = "X",
    y: str = "Y",
) -> DvibResult:
    """Train the linear DVIB by gradient descent with backtracking.

    The analytic gradient is checked against central differences at the start
    and at the returned point; a failed check is logged, not raised.

    Args:
        joint: Gaussian joint covering X and Y.
        beta: Trade-off parameter.
        t_dim: Dimension of T, dim X by default.
        seed: Seed of the random initial weights.
        lr: Largest step size.
        tol: Stop when the objective changes by less than this.
        max_iter: Maximum number of descent steps.
        prior: "marginal" or "standard", see `dvib_objective`.
        drop_hy: Report the bound term without H(Y).

    Returns:
        DvibResult: The trained parameters and their information coordinates.
    """
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}.")
    _check_prior(prior)
    x_dim, y_dim = joint.block_dim(x), joint.block_dim(y)
    t_dim = x_dim if t_dim is None else t_dim
    if t_dim < 1:
        raise ValueError(f"t_dim must be at least 1, got {t_dim}.")
    dims = (x_dim, y_dim, t_dim)
    moments = _moments(joint, x, y)

    def func(theta):
        return _value_and_grad(theta, dims, moments, beta, prior)

    def value_only(theta):
        return func(theta)[0]

    def grad_only(theta):
        return func(theta)[1]

    start = LinearDvibParams.initial(x_dim, y_dim, t_dim, seed, np.diag(moments.sigma_y))
    theta0 = start.to_vector()
    err_init = gradient_error(value_only, grad_only, theta0)
    res = gradient_descent(func, theta0, lr=lr, tol=tol, max_iter=max_iter)
    err_final = gradient_error(value_only, grad_only, res.x)
    if max(err_init, err_final) >= GRAD_CHECK_TOL:
        logger.warning(
            "DVIB gradient check failed: max error %.2e at start, %.2e at end.",
            err_init,
            err_final,
        )
    params = LinearDvibParams.from_vector(res.x, *dims)
    terms = dvib_objective(params, joint, beta, prior, drop_hy, x, y)
    logger.debug("DVIB beta=%g finished after %d steps.", beta, res.n_iter)
    return DvibResult(
        params=params,
        beta=beta,
        i_xt=terms.i_xt,
        i_ty_bound=terms.i_ty_bound,
        value=terms.value,
        trace=res.trace,
        converged=res.converged,
        grad_error_init=err_init,
        grad_error_final=err_final,
    )


def dvib_curve(
    joint: GaussianJoint,
    betas: Sequence[float],
    t_dim: int | None = None,
    seed: int = 0,
    **kwargs: Any,
) -> pd.DataFrame:
    """Train at every β from the same seed.

    Returns:
        pd.DataFrame: Columns beta, i_xt, i_ty_bound, converged.
    """
    rows = []
    for beta in tqdm(betas, desc="beta", disable=None):
        res = dvib_train(joint, beta, t_dim, seed, **kwargs)
        rows.append((beta, res.i_xt, res.i_ty_bound, res.converged))
    return pd.DataFrame(rows, columns=["beta", "i_xt", "i_ty_bound", "converged"])


def copula_transform(data: Any) -> NDArray[np.float64]:
    """Map every column to standard-normal quantiles of its empirical CDF.

    Each value becomes Φ⁻¹(r / (n + 1)) where r is its average rank in the
    column, so the output depends on the data only through the ranks.

    Args:
        data: An (n, d) array or DataFrame; a 1-D input is one column.

    Returns:
        NDArray: The transformed (n, d) array.

    Raises:
        NonFiniteInput: If any value is NaN or infinite.
        ConstantColumn: If a column has a single distinct value.
    """
    values = np.asarray(data, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if n < 2:
        raise ValueError(f"Need at least 2 rows, got {n}.")
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput("Data contain NaN or infinite values.")
    for j in range(values.shape[1]):
        if np.all(values[:, j] == values[0, j]):
            raise ConstantColumn(f"Column {j} is constant.")
    ranks = stats.rankdata(values, method="average", axis=0)
    return special.ndtri(ranks / (n + 1))
