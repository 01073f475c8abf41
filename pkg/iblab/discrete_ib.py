"""The information bottleneck for finite alphabets.

The encoder p(t|x) is found by Blahut-Arimoto-style self-consistent updates,

    p(t|x) ∝ p(t) · exp(-β · D_KL(p(y|x) || p(y|t))),

with p(t) and p(y|t) recomputed from the current encoder every round. The
joint over (X, Y, T) is always p(x,y)·p(t|x), so T - X - Y holds by
construction.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from itertools import product
from typing import Any

import numpy as np
import pandas as pd
from attrs import field, frozen
from numpy.typing import NDArray
from scipy import optimize, special
from tqdm import tqdm

__all__ = [
    "DiscreteJoint",
    "DiscreteEncoder",
    "BaResult",
    "InvalidPmf",
    "entropy",
    "discrete_mi",
    "information_plane",
    "ib_functional",
    "induced_joint",
    "ba_solve",
    "info_curve_discrete",
    "oracle_minimum",
]

logger = logging.getLogger(__name__)

PMF_TOL = 1e-12
FROZEN_CLUSTER = 1e-300
INIT_NOISE = 0.01


class InvalidPmf(ValueError):
    """Raised when an array is not a valid probability table."""


def _to_array(value: Any) -> NDArray[np.float64]:
    return np.asarray(value, dtype=np.float64)


def check_pmf(pmf: NDArray[np.float64], name: str = "pmf") -> None:
    """Check non-negativity and unit mass."""
    if not np.all(np.isfinite(pmf)):
        raise InvalidPmf(f"{name} has non-finite entries.")
    if np.any(pmf < 0):
        raise InvalidPmf(f"{name} has negative entries.")
    if abs(pmf.sum() - 1.0) > PMF_TOL:
        raise InvalidPmf(f"{name} sums to {pmf.sum()!r}, not 1.")


@frozen
class DiscreteJoint:
    """A joint pmf p(x, y) with rows indexed by x and columns by y."""

    pmf: NDArray[np.float64] = field(converter=_to_array, eq=False)

    @pmf.validator
    def _check(self, attribute, value):
        if value.ndim != 2:
            raise InvalidPmf(f"Joint pmf must be a matrix, got {value.ndim} dimensions.")
        check_pmf(value, "Joint pmf")
        if np.any(value.sum(axis=1) == 0) or np.any(value.sum(axis=0) == 0):
            raise InvalidPmf("Every symbol must have positive marginal probability.")

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> DiscreteJoint:
        return cls(df.to_numpy(dtype=np.float64))

    @property
    def p_x(self) -> NDArray[np.float64]:
        return self.pmf.sum(axis=1)

    @property
    def p_y(self) -> NDArray[np.float64]:
        return self.pmf.sum(axis=0)

    @property
    def p_y_given_x(self) -> NDArray[np.float64]:
        return self.pmf / self.p_x[:, None]

    @property
    def x_card(self) -> int:
        return self.pmf.shape[0]


@frozen
class DiscreteEncoder:
    """A stochastic encoder p(t|x); row x is the distribution of T given x."""

    pmf: NDArray[np.float64] = field(converter=_to_array, eq=False)

    @pmf.validator
    def _check(self, attribute, value):
        if value.ndim != 2:
            raise InvalidPmf("Encoder must be a matrix.")
        if np.any(value < 0) or not np.all(np.isfinite(value)):
            raise InvalidPmf("Encoder has negative or non-finite entries.")
        if np.max(np.abs(value.sum(axis=1) - 1.0)) > PMF_TOL:
            raise InvalidPmf("Encoder rows must sum to 1.")

    @property
    def t_card(self) -> int:
        return self.pmf.shape[1]

    @classmethod
    def perturbed(
        cls, base: NDArray[np.float64], rng: np.random.Generator
    ) -> DiscreteEncoder:
        """`base` plus uniform noise of magnitude 0.01, renormalised."""
        noisy = base + INIT_NOISE * rng.random(base.shape)
        return cls(noisy / noisy.sum(axis=1, keepdims=True))

    @classmethod
    def initial(cls, x_card: int, t_card: int, seed: int) -> DiscreteEncoder:
        """A uniform encoder perturbed by seeded noise.

        The exactly uniform encoder is a fixed point of the updates at every β,
        so it is never used as a starting point.
        """
        rng = np.random.default_rng(seed)
        return cls.perturbed(np.full((x_card, t_card), 1.0 / t_card), rng)


def entropy(pmf: Any) -> float:
    """Shannon entropy in nats, with 0·ln 0 = 0."""
    pmf = _to_array(pmf)
    return float(-special.xlogy(pmf, pmf).sum())


def discrete_mi(pmf: Any) -> float:
    """Mutual information of a two-way joint pmf, in nats."""
    pmf = _to_array(pmf)
    if pmf.ndim != 2:
        raise InvalidPmf("Mutual information needs a two-way pmf.")
    check_pmf(pmf)
    p_a = pmf.sum(axis=1, keepdims=True)
    p_b = pmf.sum(axis=0, keepdims=True)
    value = (
        special.xlogy(pmf, pmf).sum()
        - special.xlogy(p_a, p_a).sum()
        - special.xlogy(p_b, p_b).sum()
    )
    return float(max(value, 0.0)) if value > -PMF_TOL else float(value)


def information_plane(joint: DiscreteJoint, enc: DiscreteEncoder) -> tuple[float, float]:
    """Return (I(X;T), I(T;Y)) for the encoder under T - X - Y."""
    _check_shapes(joint, enc)
    p_xt = joint.p_x[:, None] * enc.pmf
    p_ty = enc.pmf.T @ joint.pmf
    return discrete_mi(p_xt), discrete_mi(p_ty)


def ib_functional(joint: DiscreteJoint, enc: DiscreteEncoder, beta: float) -> float:
    """I(X;T) - β·I(T;Y) with p(t,y) = Σ_x p(x,y)·p(t|x)."""
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}.")
    i_xt, i_ty = information_plane(joint, enc)
    return i_xt - beta * i_ty


def induced_joint(joint: DiscreteJoint, enc: DiscreteEncoder) -> NDArray[np.float64]:
    """The three-way pmf p(x, y, t) = p(x, y)·p(t|x), indexed [x, y, t]."""
    _check_shapes(joint, enc)
    return joint.pmf[:, :, None] * enc.pmf[:, None, :]


def _check_shapes(joint: DiscreteJoint, enc: DiscreteEncoder) -> None:
    if enc.pmf.shape[0] != joint.x_card:
        raise InvalidPmf(
            f"Encoder has {enc.pmf.shape[0]} rows but X has {joint.x_card} symbols."
        )


@frozen
class BaResult:
    """Outcome of a Blahut-Arimoto run.

    Attributes:
        encoder: The final encoder.
        trace: The functional after each update, starting at the initial encoder.
        converged: Whether successive functional change dropped below tol.
        beta: The trade-off parameter.
        i_xt: I(X;T) at the final encoder.
        i_ty: I(T;Y) at the final encoder.
    """

    encoder: DiscreteEncoder
    trace: list[float]
    converged: bool
    beta: float
    i_xt: float
    i_ty: float

    @property
    def functional(self) -> float:
        return self.trace[-1]


def _ba_step(
    joint: DiscreteJoint, q_t_x: NDArray[np.float64], beta: float
) -> NDArray[np.float64]:
    p_x = joint.p_x
    p_y_x = joint.p_y_given_x
    q_xt = p_x[:, None] * q_t_x
    q_t = q_xt.sum(axis=0)
    active = q_t > FROZEN_CLUSTER
    q_y_t = (q_xt[:, active].T @ p_y_x) / q_t[active, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        # D_KL(p(y|x) || q(y|t)), shape X x T_active
        dist = (
            special.xlogy(p_y_x, p_y_x).sum(axis=1)[:, None]
            - special.xlogy(p_y_x[:, None, :], q_y_t[None, :, :]).sum(axis=-1)
        )
        logits = np.log(q_t[active])[None, :] - beta * dist
    new = np.zeros_like(q_t_x)
    new[:, active] = special.softmax(logits, axis=1)
    return new


def _ba_run(
    joint: DiscreteJoint,
    init: DiscreteEncoder,
    beta: float,
    tol: float,
    max_iter: int,
) -> BaResult:
    enc = init
    trace = [ib_functional(joint, enc, beta)]
    converged = False
    for it in range(max_iter):
        q_t_x = _ba_step(joint, enc.pmf, beta)
        # Rows are re-normalised to absorb rounding before validation.
        enc = DiscreteEncoder(q_t_x / q_t_x.sum(axis=1, keepdims=True))
        trace.append(ib_functional(joint, enc, beta))
        if abs(trace[-2] - trace[-1]) < tol:
            converged = True
            break
    logger.debug("BA at beta=%g stopped after %d rounds (converged=%s).", beta, it + 1, converged)
    i_xt, i_ty = information_plane(joint, enc)
    return BaResult(enc, trace, converged, beta, i_xt, i_ty)


def ba_solve(
    joint: DiscreteJoint,
    t_card: int,
    beta: float,
    init: DiscreteEncoder | int = 0,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    n_init: int = 1,
) -> BaResult:
    """Minimise I(X;T) - β·I(T;Y) over encoders with `t_card` clusters.

    Args:
        joint: The data distribution p(x, y).
        t_card: Number of clusters of T.
        beta: Trade-off parameter, β ≥ 0.
        init: A starting encoder, or a seed for a perturbed uniform encoder.
        tol: Stop when the functional changes by less than this.
        max_iter: Maximum number of update rounds.
        n_init: Number of seeded starts (seed, seed+1, ...) when `init` is a
            seed; the run with the lowest final functional is returned.

    Returns:
        BaResult: Non-convergence is reported with `converged=False`.
    """
    if t_card < 1:
        raise ValueError(f"t_card must be at least 1, got {t_card}.")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}.")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1.")
    if isinstance(init, DiscreteEncoder):
        if init.t_card != t_card:
            raise InvalidPmf(f"Initial encoder has {init.t_card} clusters, not {t_card}.")
        starts = [init]
    else:
        starts = [DiscreteEncoder.initial(joint.x_card, t_card, init + i) for i in range(n_init)]
    results = [_ba_run(joint, start, beta, tol, max_iter) for start in starts]
    best = min(results, key=lambda r: r.functional)
    if not best.converged:
        logger.warning("BA did not converge within %d rounds at beta=%g.", max_iter, beta)
    return best


def info_curve_discrete(
    joint: DiscreteJoint,
    t_card: int,
    betas: Sequence[float],
    seed: int = 0,
    *,
    warm_start: bool = True,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    n_init: int = 1,
) -> pd.DataFrame:
    """Sweep β and solve the IB at each point.

    With `warm_start`, each β starts from the previous β's encoder plus the
    seeded perturbation, since a collapsed encoder is a fixed point.

    Returns:
        pd.DataFrame: Columns beta, i_xt, i_ty, converged.
    """
    if list(betas) != sorted(betas):
        raise ValueError("betas must be sorted in ascending order.")
    rng = np.random.default_rng(seed)
    rows = []
    previous: DiscreteEncoder | None = None
    for beta in tqdm(betas, desc="beta", disable=None):
        init: DiscreteEncoder | int
        if warm_start and previous is not None:
            init = DiscreteEncoder.perturbed(previous.pmf, rng)
        else:
            init = seed
        result = ba_solve(joint, t_card, beta, init, tol, max_iter, n_init=n_init)
        previous = result.encoder
        rows.append((beta, result.i_xt, result.i_ty, result.converged))
    return pd.DataFrame(rows, columns=["beta", "i_xt", "i_ty", "converged"])


def _softmax_encoder(logits: NDArray[np.float64], shape: tuple[int, int]) -> DiscreteEncoder:
    probs = special.softmax(logits.reshape(shape), axis=1)
    return DiscreteEncoder(probs / probs.sum(axis=1, keepdims=True))


def oracle_minimum(
    joint: DiscreteJoint, t_card: int, beta: float, resolution: float = 1e-3
) -> float:
    """Brute-force minimum of the IB functional.

    For |X| = |T| = 2 the encoder simplex is a square and is searched on a
    grid of the given resolution. Otherwise every deterministic encoder is
    evaluated and refined by L-BFGS over softmax logits.
    """
    x_card = joint.x_card
    if x_card == 2 and t_card == 2:
        return _grid_oracle_binary(joint, beta, resolution)
    shape = (x_card, t_card)
    best = ib_functional(joint, DiscreteEncoder(np.full(shape, 1.0 / t_card)), beta)

    def objective(logits):
        return ib_functional(joint, _softmax_encoder(logits, shape), beta)

    for assignment in product(range(t_card), repeat=x_card):
        hard = np.zeros(shape)
        hard[np.arange(x_card), assignment] = 1.0
        best = min(best, ib_functional(joint, DiscreteEncoder(hard), beta))
        res = optimize.minimize(objective, 4.0 * hard.ravel(), method="L-BFGS-B")
        best = min(best, float(res.fun))
    return best


def _grid_oracle_binary(joint: DiscreteJoint, beta: float, resolution: float) -> float:
    grid = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    row_b = np.stack([grid, 1 - grid], axis=-1)

    def mi(p):
        p_a = p.sum(axis=-1, keepdims=True)
        p_b = p.sum(axis=-2, keepdims=True)
        return (
            special.xlogy(p, p).sum(axis=(-2, -1))
            - special.xlogy(p_a, p_a).sum(axis=(-2, -1))
            - special.xlogy(p_b, p_b).sum(axis=(-2, -1))
        )

    best = np.inf
    for a in grid:
        # enc[k, x, t]: row 0 fixed at (a, 1-a), row 1 runs over the grid.
        enc = np.stack([np.broadcast_to([a, 1 - a], row_b.shape), row_b], axis=1)
        p_xt = joint.p_x[None, :, None] * enc
        p_ty = np.einsum("kxt,xy->kty", enc, joint.pmf)
        best = min(best, float((mi(p_xt) - beta * mi(p_ty)).min()))
    return best
