"""Seeded Monte-Carlo cross-checks of the closed-form information quantities.

Every estimator samples from a known density and averages a closed-form
log-density, so the only error is sampling noise. Generators are NumPy's
PCG64 (`numpy.random.default_rng`); independent streams come from
`numpy.random.SeedSequence(seed).spawn`.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
from attrs import frozen
from numpy.typing import NDArray
from scipy import stats

from iblab import gaussian_core as gc
from iblab.decomposition import ZeroProbability, decompose_discrete, decompose_gaussian
from iblab.discrete_ib import DiscreteJoint, check_pmf, discrete_mi
from iblab.gaussian_core import BlockSet, GaussianConditional, GaussianJoint

__all__ = [
    "McEstimate",
    "UnsupportedPair",
    "mc_kl",
    "mc_entropy",
    "mc_expected_log_density",
    "mc_bound_term",
    "validation_block",
    "discrete_validation_block",
    "child_seeds",
]

logger = logging.getLogger(__name__)

DEFAULT_N = 200_000


class UnsupportedPair(TypeError):
    """Raised when the two distributions of a KL estimate are of different kinds."""


@frozen
class McEstimate:
    """A Monte-Carlo mean with its standard error.

    Attributes:
        value: The estimate in nats.
        std_error: Sample standard deviation over sqrt(n).
        n: Sample count.
        seed: Seed of the generator.
    """

    value: float
    std_error: float
    n: int
    seed: int

    def agrees_with(self, target: float, k: float = 3.0) -> bool:
        """Whether `target` is within k standard errors of the estimate."""
        return abs(self.value - target) <= k * self.std_error + 1e-12


def _estimate(values: NDArray[np.float64], seed: int) -> McEstimate:
    n = values.size
    return McEstimate(float(values.mean()), float(values.std(ddof=1) / np.sqrt(n)), n, seed)


def _check_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"Need at least 2 samples, got {n}.")


def child_seeds(seed: int, k: int) -> list[int]:
    """k independent integer seeds derived from one seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(k)]


def _gaussian_samples(cov: NDArray[np.float64], n: int, rng: np.random.Generator) -> NDArray:
    # Eigen square root also covers semidefinite covariances.
    lam, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(lam, 0.0, None))
    return rng.standard_normal((n, cov.shape[0])) @ root.T


def _logpdf(cov: NDArray[np.float64], values: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.atleast_1d(stats.multivariate_normal(mean=np.zeros(cov.shape[0]), cov=cov).logpdf(values))


def _as_discrete(value: Any) -> NDArray[np.float64] | None:
    if isinstance(value, DiscreteJoint):
        return value.pmf
    if isinstance(value, np.ndarray):
        check_pmf(value)
        return value
    return None


def mc_kl(p: Any, q: Any, n: int = DEFAULT_N, seed: int = 0) -> McEstimate:
    """Estimate D(p || q) by sampling from p.

    Both arguments are GaussianJoints over the same blocks, or both are
    discrete pmfs (DiscreteJoint or arrays of the same shape).

    Raises:
        UnsupportedPair: If p and q are of different kinds.
        ZeroProbability: If q is zero where p samples.
    """
    _check_n(n)
    rng = np.random.default_rng(seed)
    if isinstance(p, GaussianJoint) and isinstance(q, GaussianJoint):
        if p.blocks != q.blocks:
            raise ValueError(f"Block layouts differ: {p.blocks} vs {q.blocks}.")
        samples = _gaussian_samples(p.cov, n, rng)
        return _estimate(_logpdf(p.cov, samples) - _logpdf(q.cov, samples), seed)
    p_pmf, q_pmf = _as_discrete(p), _as_discrete(q)
    if p_pmf is None or q_pmf is None:
        raise UnsupportedPair(
            f"Cannot compare {type(p).__name__} with {type(q).__name__}."
        )
    if p_pmf.shape != q_pmf.shape:
        raise ValueError(f"pmf shapes differ: {p_pmf.shape} vs {q_pmf.shape}.")
    flat_p, flat_q = p_pmf.ravel(), q_pmf.ravel()
    if np.any((flat_p > 0) & (flat_q <= 0)):
        raise ZeroProbability("q is zero where p has mass.")
    idx = rng.choice(flat_p.size, size=n, p=flat_p / flat_p.sum())
    return _estimate(np.log(flat_p[idx]) - np.log(flat_q[idx]), seed)


def mc_entropy(joint: GaussianJoint, blocks: BlockSet, n: int = DEFAULT_N, seed: int = 0) -> McEstimate:
    """Estimate the differential entropy of `blocks` as -E log p."""
    _check_n(n)
    cov = joint.sub_cov(blocks)
    samples = _gaussian_samples(cov, n, np.random.default_rng(seed))
    return _estimate(-_logpdf(cov, samples), seed)


def mc_expected_log_density(
    second_moments: GaussianJoint,
    decoder: GaussianConditional,
    target: BlockSet = "Y",
    given: BlockSet = "T",
    n: int = DEFAULT_N,
    seed: int = 0,
) -> McEstimate:
    """Estimate E log N(target; R·given, S) with (target, given) drawn from `second_moments`."""
    _check_n(n)
    idx = np.concatenate([second_moments.indices(target), second_moments.indices(given)])
    d_target = second_moments.block_dim(target)
    cov = second_moments.cov[np.ix_(idx, idx)]
    samples = _gaussian_samples(cov, n, np.random.default_rng(seed))
    residual = samples[:, :d_target] - samples[:, d_target:] @ decoder.regression.T
    return _estimate(_logpdf(decoder.cov, residual), seed)


def mc_bound_term(
    joint: GaussianJoint,
    n: int = DEFAULT_N,
    seed: int = 0,
    x: str = "X",
    y: str = "Y",
    t: str = "T",
) -> McEstimate:
    """Estimate E_X E_{Y|X} E_{T|X} log P(Y|T) + H(Y).

    X is drawn from its marginal, then Y and T are drawn from their
    conditionals given X on separate streams. H(Y) is added in closed form.

    Raises:
        DegenerateCovariance: If a needed conditional is singular.
    """
    _check_n(n)
    x_seed, y_seed, t_seed = child_seeds(seed, 3)
    xs = _gaussian_samples(joint.sub_cov(x), n, np.random.default_rng(x_seed))
    y_given_x = gc.conditional(joint, y, x)
    t_given_x = gc.conditional(joint, t, x)
    ys = xs @ y_given_x.regression.T + _gaussian_samples(
        y_given_x.cov, n, np.random.default_rng(y_seed)
    )
    ts = xs @ t_given_x.regression.T + _gaussian_samples(
        t_given_x.cov, n, np.random.default_rng(t_seed)
    )
    decoder = gc.conditional(joint, y, t)
    log_dec = _logpdf(decoder.cov, ys - ts @ decoder.regression.T)
    est = _estimate(log_dec, seed)
    return McEstimate(est.value + gc.entropy(joint, y), est.std_error, n, seed)


def _check(name: str, closed: float, est: McEstimate) -> dict[str, Any]:
    return {
        "quantity": name,
        "closed_form": closed,
        "mc_value": est.value,
        "std_error": est.std_error,
        "n": est.n,
        "seed": est.seed,
        "within_3se": est.agrees_with(closed),
    }


def validation_block(
    joint: GaussianJoint,
    n: int = DEFAULT_N,
    seed: int = 0,
    x: str = "X",
    y: str = "Y",
    t: str = "T",
) -> dict[str, Any]:
    """Check the closed forms of a joint against Monte Carlo.

    Covers I(X;Y), L(X;Y) and H(Y); when T is present also I(T;Y),
    I(Y;T|X), L(Y;T|X) and the decomposition bound term. Each check runs on
    its own child seed.

    Returns:
        dict: `n`, `seed`, `passed` and the list of `checks`.
    """
    has_t = t in joint.names
    seeds = iter(child_seeds(seed, 7 if has_t else 3))
    xy = joint.marginal([x, y])
    xy_product = gc.product_coupling(xy, x, y)
    checks = [
        _check("I(X;Y)", gc.mutual_information(joint, x, y), mc_kl(xy, xy_product, n, next(seeds))),
        _check("L(X;Y)", gc.lautum_information(joint, x, y), mc_kl(xy_product, xy, n, next(seeds))),
        _check("H(Y)", gc.entropy(joint, y), mc_entropy(joint, y, n, next(seeds))),
    ]
    if has_t:
        full = joint.marginal([x, y, t])
        ty = joint.marginal([t, y])
        coupling = gc.product_coupling(full, y, t, x)
        report = decompose_gaussian(full, x=x, y=y, t=t)
        checks += [
            _check(
                "I(T;Y)",
                report.i_ty_exact,
                mc_kl(ty, gc.product_coupling(ty, t, y), n, next(seeds)),
            ),
            _check("I(Y;T|X)", report.cmi, mc_kl(full, coupling, n, next(seeds))),
            _check("L(Y;T|X)", report.clautum, mc_kl(coupling, full, n, next(seeds))),
            _check("bound_term", report.bound_term, mc_bound_term(full, n, next(seeds), x, y, t)),
        ]
    passed = all(c["within_3se"] for c in checks)
    if not passed:
        logger.warning("Monte-Carlo validation disagrees with a closed form.")
    return {"n": n, "seed": seed, "passed": passed, "checks": checks}


def discrete_validation_block(pmf: Any, n: int = DEFAULT_N, seed: int = 0) -> dict[str, Any]:
    """The discrete counterpart of `validation_block` for a pmf indexed [x, y] or [x, y, t].

    Covers I(X;Y); for a three-way pmf also I(Y;T|X) and L(Y;T|X).
    """
    p = np.asarray(pmf, dtype=np.float64)
    check_pmf(p)
    seeds = iter(child_seeds(seed, 3 if p.ndim == 3 else 1))
    p_xy = p.sum(axis=2) if p.ndim == 3 else p
    product = np.outer(p_xy.sum(axis=1), p_xy.sum(axis=0))
    checks = [_check("I(X;Y)", discrete_mi(p_xy), mc_kl(p_xy, product, n, next(seeds)))]
    if p.ndim == 3:
        report = decompose_discrete(p)
        p_x = p.sum(axis=(1, 2))
        coupling = np.divide(
            p_xy[:, :, None] * p.sum(axis=1)[:, None, :],
            p_x[:, None, None],
            out=np.zeros_like(p),
            where=p_x[:, None, None] > 0,
        )
        checks += [
            _check("I(Y;T|X)", report.cmi, mc_kl(p, coupling, n, next(seeds))),
            _check("L(Y;T|X)", report.clautum, mc_kl(coupling, p, n, next(seeds))),
        ]
    passed = all(c["within_3se"] for c in checks)
    if not passed:
        logger.warning("Monte-Carlo validation disagrees with a closed form.")
    return {"n": n, "seed": seed, "passed": passed, "checks": checks}
