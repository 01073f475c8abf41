"""The decomposition of I(T;Y) into a decoder bound and two Markov gaps.

Under the coupling P(X)P(Y|X)P(T|X), in which T and Y are conditionally
independent given X,

    I(T;Y) = [E log P(Y|T) + H(Y)] + I(Y;T|X) + L(Y;T|X) + residual,

where the residual vanishes whenever X ⟂ Y | T. The two gap terms measure how
far the joint is from T - X - Y; the residual measures how far it is from
X - T - Y.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import pandas as pd
from attrs import asdict, frozen
from numpy.typing import NDArray
from scipy import special, stats

from iblab import gaussian_core as gc
from iblab.discrete_ib import check_pmf, discrete_mi, entropy as discrete_entropy
from iblab.gaussian_core import GaussianConditional, GaussianJoint
from iblab.sem_lab import LinearGaussianSem, build_joint

__all__ = [
    "DecompositionReport",
    "ZeroProbability",
    "decompose_gaussian",
    "decompose_discrete",
    "violation_profile",
    "discretize_gaussian",
]

logger = logging.getLogger(__name__)


class ZeroProbability(ValueError):
    """Raised when a log needs a probability that is zero."""


@frozen
class DecompositionReport:
    """All terms of the I(T;Y) decomposition, in nats.

    Attributes:
        bound_term: E_X E_{Y|X} E_{T|X} log P(Y|T) + H(Y).
        cmi: I(Y;T|X).
        clautum: L(Y;T|X).
        h_y: H(Y).
        i_ty_exact: I(T;Y).
        residual: i_ty_exact - bound_term - cmi - clautum, signed.
        identity_gap: The per-X identity between the two expectations of
            log P(Y|T,X) and cmi + clautum, averaged over X; zero for every joint.
        decoder_gap: E_T KL(P(Y|T) || Q(Y|T)) when a decoder Q is supplied.
    """

    bound_term: float
    cmi: float
    clautum: float
    h_y: float
    i_ty_exact: float
    residual: float
    identity_gap: float = 0.0
    decoder_gap: float = 0.0

    @property
    def txy_violation(self) -> float:
        return self.cmi + self.clautum

    @property
    def xty_violation(self) -> float:
        return abs(self.residual)

    def to_dict(self) -> dict[str, float]:
        data = asdict(self)
        data["txy_violation"] = self.txy_violation
        data["xty_violation"] = self.xty_violation
        return data


def decompose_gaussian(
    joint: GaussianJoint,
    decoder: GaussianConditional | None = None,
    x: str = "X",
    y: str = "Y",
    t: str = "T",
) -> DecompositionReport:
    """Decompose I(T;Y) for a Gaussian joint over (X, Y, T).

    Args:
        joint: The joint covering blocks x, y and t.
        decoder: A decoder of Y given T to use in the bound term instead of
            the true conditional of the joint.

    Raises:
        DegenerateCovariance: If a needed covariance is singular.
        UnknownBlock: If a block is missing.
    """
    h_y = gc.entropy(joint, y)
    i_ty = gc.mutual_information(joint, t, y)
    cmi = gc.conditional_mutual_information(joint, y, t, x)
    clautum = gc.conditional_lautum(joint, y, t, x)
    coupling = gc.product_coupling(joint, y, t, x)

    true_decoder = gc.conditional(joint, y, t)
    decoder_gap = 0.0
    if decoder is not None:
        decoder_gap = gc.expected_log_density(joint, true_decoder, y, t) - gc.expected_log_density(
            joint, decoder, y, t
        )
    else:
        decoder = true_decoder
    bound = gc.expected_log_density(coupling, decoder, y, t) + h_y

    full_decoder = gc.conditional(joint, y, [t, x])
    identity_gap = (
        gc.expected_log_density(joint, full_decoder, y, [t, x])
        - gc.expected_log_density(coupling, full_decoder, y, [t, x])
        - cmi
        - clautum
    )
    return DecompositionReport(
        bound_term=bound,
        cmi=cmi,
        clautum=clautum,
        h_y=h_y,
        i_ty_exact=i_ty,
        residual=i_ty - bound - cmi - clautum,
        identity_gap=identity_gap,
        decoder_gap=decoder_gap,
    )


def _divide(num: NDArray[np.float64], den: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def decompose_discrete(pmf: Any, smoothing: float = 0.0) -> DecompositionReport:
    """Decompose I(T;Y) for a pmf indexed [x, y, t] by exhaustive summation.

    Args:
        pmf: A 3-D probability table p(x, y, t).
        smoothing: When positive, add this to every entry and renormalise.

    Raises:
        InvalidPmf: If the table is not a valid 3-D pmf.
        ZeroProbability: If the coupling P(X)P(Y|X)P(T|X) puts mass where the
            joint has none, so L(Y;T|X) is infinite.
    """
    p = np.asarray(pmf, dtype=np.float64)
    check_pmf(p)
    if p.ndim != 3:
        raise ValueError(f"Expected a 3-D pmf over (x, y, t), got {p.ndim} dimensions.")
    if smoothing < 0:
        raise ValueError(f"smoothing must be non-negative, got {smoothing}.")
    if smoothing > 0:
        p = (p + smoothing) / (p + smoothing).sum()

    p_x = p.sum(axis=(1, 2))
    p_xy = p.sum(axis=2)
    p_xt = p.sum(axis=1)
    p_yt = p.sum(axis=0)
    p_y = p_yt.sum(axis=1)
    p_t = p_yt.sum(axis=0)

    coupling = _divide(p_xy[:, :, None] * p_xt[:, None, :], p_x[:, None, None])
    if np.any((coupling > 0) & (p <= 0)):
        raise ZeroProbability(
            "The joint is zero where P(x)P(y|x)P(t|x) is not; use smoothing."
        )

    h_y = discrete_entropy(p_y)
    i_ty = discrete_mi(p_yt)
    cmi = float(special.rel_entr(p, coupling).sum())
    clautum = float(special.rel_entr(coupling, p).sum())
    y_given_t = _divide(p_yt, p_t[None, :])
    bound = float(special.xlogy(coupling.sum(axis=0), y_given_t).sum()) + h_y

    y_given_tx = _divide(p, p_xt[:, None, :])
    identity_gap = (
        float(special.xlogy(p, y_given_tx).sum())
        - float(special.xlogy(coupling, y_given_tx).sum())
        - cmi
        - clautum
    )
    return DecompositionReport(
        bound_term=bound,
        cmi=cmi,
        clautum=clautum,
        h_y=h_y,
        i_ty_exact=i_ty,
        residual=i_ty - bound - cmi - clautum,
        identity_gap=identity_gap,
    )


def violation_profile(
    sem: LinearGaussianSem, edge: str | tuple[str, str], grid: Sequence[float]
) -> pd.DataFrame:
    """Sweep one edge coefficient and decompose the joint at every value.

    Args:
        sem: The base model.
        edge: The swept edge, as "T->Y" or ("T", "Y").
        grid: Coefficient values.

    Returns:
        pd.DataFrame: Columns param, txy_violation, xty_violation, i_ty_exact.
    """
    if isinstance(edge, str):
        u, _, v = edge.partition("->")
        edge = (u.strip(), v.strip())
    rows = []
    for value in grid:
        report = decompose_gaussian(build_joint(sem.with_coefficient(edge, value)))
        rows.append((value, report.txy_violation, report.xty_violation, report.i_ty_exact))
    return pd.DataFrame(rows, columns=["param", "txy_violation", "xty_violation", "i_ty_exact"])


def discretize_gaussian(
    joint: GaussianJoint,
    points: int,
    span: float = 4.0,
    x: str = "X",
    y: str = "Y",
    t: str = "T",
) -> NDArray[np.float64]:
    """Discretise a Gaussian with 1-D blocks on a regular grid.

    Each axis gets `points` equally spaced values over ±span standard
    deviations; the pmf is the density at the grid nodes, normalised.

    Returns:
        NDArray: A pmf indexed [x, y, t].
    """
    names = [x, y, t]
    if any(joint.block_dim(name) != 1 for name in names):
        raise ValueError("Grid discretisation needs 1-D blocks.")
    if points < 2:
        raise ValueError(f"Need at least 2 points per axis, got {points}.")
    cov = joint.sub_cov(names)
    axes = [np.linspace(-span, span, points) * np.sqrt(cov[i, i]) for i in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    density = stats.multivariate_normal(mean=np.zeros(3), cov=cov).pdf(grid)
    return density / density.sum()
