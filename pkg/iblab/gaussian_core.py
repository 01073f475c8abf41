"""Closed-form information quantities of zero-mean multivariate normals.

All quantities are in nats. A `GaussianJoint` is a covariance matrix over named
variable blocks (e.g. X, Y and T); every operation addresses blocks by name and
accepts either a single name or a sequence of names.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from attrs import field, frozen
from numpy.typing import NDArray
from scipy import linalg

__all__ = [
    "GaussianJoint",
    "GaussianConditional",
    "GaussianError",
    "DegenerateCovariance",
    "SingularConditioningBlock",
    "UnknownBlock",
    "InvalidCovariance",
    "logdet",
    "gaussian_kl",
    "conditional",
    "entropy",
    "conditional_entropy",
    "mutual_information",
    "lautum_information",
    "conditional_mutual_information",
    "conditional_lautum",
    "product_coupling",
    "expected_log_density",
]

logger = logging.getLogger(__name__)

LOG_2PI_E = float(np.log(2 * np.pi * np.e))

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
MIN_EIGENVALUE = 1e-12
JITTER = 1e-10


class GaussianError(Exception):
    """Base class for numerical failures on Gaussian models."""


class DegenerateCovariance(GaussianError):
    """Raised when a covariance that must be positive definite is not."""


class SingularConditioningBlock(DegenerateCovariance):
    """Raised when the covariance of a conditioning block cannot be inverted."""


class UnknownBlock(GaussianError, KeyError):
    """Raised when a block name is not part of the joint."""


class InvalidCovariance(GaussianError, ValueError):
    """Raised when a GaussianJoint violates its construction invariants."""


BlockSet = str | Sequence[str]


def _as_names(blocks: BlockSet) -> tuple[str, ...]:
    if isinstance(blocks, str):
        return (blocks,)
    return tuple(blocks)


def _to_matrix(value: Any) -> NDArray[np.float64]:
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def _to_blocks(value: Iterable[Sequence[Any]]) -> tuple[tuple[str, int], ...]:
    return tuple((str(name), int(dim)) for name, dim in value)


def _check_psd(value: NDArray[np.float64], what: str) -> None:
    if not np.all(np.isfinite(value)):
        raise InvalidCovariance(f"{what} has non-finite entries.")
    if np.max(np.abs(value - value.T), initial=0.0) > SYMMETRY_TOL:
        raise InvalidCovariance(f"{what} is not symmetric.")
    if np.linalg.eigvalsh(value).min() < -PSD_TOL:
        raise InvalidCovariance(f"{what} is not positive semidefinite.")


@frozen
class GaussianJoint:
    """A zero-mean multivariate normal over named blocks.

    Attributes:
        blocks: Ordered (name, dimension) pairs.
        cov: The joint covariance, ordered as `blocks`.
    """

    blocks: tuple[tuple[str, int], ...] = field(converter=_to_blocks)
    cov: NDArray[np.float64] = field(converter=_to_matrix, eq=False)

    @blocks.validator
    def _check_blocks(self, attribute, value):
        names = [name for name, _ in value]
        if len(set(names)) != len(names):
            raise InvalidCovariance(f"Block names must be unique, got {names}.")
        if any(dim < 1 for _, dim in value):
            raise InvalidCovariance(f"Block dimensions must be positive, got {value}.")

    @cov.validator
    def _check_cov(self, attribute, value):
        total = sum(dim for _, dim in self.blocks)
        if value.shape != (total, total):
            raise InvalidCovariance(
                f"Covariance shape {value.shape} does not match blocks of "
                f"total dimension {total}."
            )
        _check_psd(value, "Covariance")

    @classmethod
    def from_blocks(
        cls, names: Sequence[str], cov: Any, dims: Sequence[int] | None = None
    ) -> GaussianJoint:
        """Build a joint from block names, with unit dimensions by default."""
        dims = dims if dims is not None else [1] * len(names)
        return cls(list(zip(names, dims)), cov)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.blocks)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def block_dim(self, blocks: BlockSet) -> int:
        return len(self.indices(blocks))

    def indices(self, blocks: BlockSet) -> NDArray[np.int64]:
        """Return the coordinate indices of the given blocks, in the given order."""
        offsets: dict[str, tuple[int, int]] = {}
        start = 0
        for name, dim in self.blocks:
            offsets[name] = (start, start + dim)
            start += dim
        result: list[int] = []
        for name in _as_names(blocks):
            if name not in offsets:
                raise UnknownBlock(f"Unknown block '{name}', expected one of {self.names}.")
            lo, hi = offsets[name]
            result.extend(range(lo, hi))
        return np.array(result, dtype=np.int64)

    def sub_cov(self, rows: BlockSet, cols: BlockSet | None = None) -> NDArray[np.float64]:
        """Return the covariance between two block sets."""
        cols = rows if cols is None else cols
        return self.cov[np.ix_(self.indices(rows), self.indices(cols))]

    def marginal(self, blocks: BlockSet) -> GaussianJoint:
        """Return the marginal over `blocks`, ordered as given."""
        names = _as_names(blocks)
        dims = dict(self.blocks)
        for name in names:
            if name not in dims:
                raise UnknownBlock(f"Unknown block '{name}', expected one of {self.names}.")
        return GaussianJoint([(name, dims[name]) for name in names], self.sub_cov(names))

    def to_dict(self) -> dict[str, Any]:
        return {
            "blocks": [[name, dim] for name, dim in self.blocks],
            "cov": self.cov.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GaussianJoint:
        return cls(data["blocks"], data["cov"])

    def to_json(self) -> str:
        # `repr` of a Python float round-trips exactly.
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> GaussianJoint:
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_json_file(cls, filepath: str | Path) -> GaussianJoint:
        return cls.from_json(Path(filepath).read_text(encoding="utf8"))


@frozen
class GaussianConditional:
    """The Gaussian conditional of a target given a conditioning vector.

    The conditional mean is `regression @ g` and the covariance `cov` does not
    depend on the conditioning value.
    """

    regression: NDArray[np.float64] = field(converter=_to_matrix, eq=False)
    cov: NDArray[np.float64] = field(converter=_to_matrix, eq=False)

    @cov.validator
    def _check_cov(self, attribute, value):
        if value.shape[0] != value.shape[1] or value.shape[0] != self.regression.shape[0]:
            raise InvalidCovariance(
                f"Conditional covariance shape {value.shape} does not match "
                f"regression shape {self.regression.shape}."
            )
        _check_psd(value, "Conditional covariance")

    @property
    def target_dim(self) -> int:
        return self.regression.shape[0]

    @property
    def given_dim(self) -> int:
        return self.regression.shape[1]


def _cholesky(cov: NDArray[np.float64]) -> tuple[NDArray[np.float64], bool]:
    try:
        return linalg.cho_factor(cov, lower=True)
    except linalg.LinAlgError:
        raise DegenerateCovariance("Covariance is not positive definite.") from None


def logdet(cov: NDArray[np.float64]) -> float:
    """Log-determinant of a positive definite matrix via its Cholesky factor.

    Raises:
        DegenerateCovariance: If the matrix is not numerically positive definite.
    """
    cov = _to_matrix(cov)
    if cov.size == 0:
        return 0.0
    factor, _ = _cholesky(cov)
    diag = np.diag(factor)
    if np.any(diag <= 0):
        raise DegenerateCovariance("Covariance has a non-positive determinant.")
    return float(2.0 * np.sum(np.log(diag)))


def _solve(cov: NDArray[np.float64], rhs: NDArray[np.float64]) -> NDArray[np.float64]:
    return linalg.cho_solve(_cholesky(cov), rhs)


def gaussian_kl(p_cov: Any, q_cov: Any) -> float:
    """KL divergence D(N(0, p_cov) || N(0, q_cov)) in nats."""
    p_cov, q_cov = _to_matrix(p_cov), _to_matrix(q_cov)
    k = p_cov.shape[0]
    trace = float(np.trace(_solve(q_cov, p_cov)))
    return 0.5 * (trace - k + logdet(q_cov) - logdet(p_cov))


def _repaired_conditioning_cov(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    """Apply the one-off jitter repair to a conditioning block covariance."""
    min_eig = float(np.linalg.eigvalsh(cov).min())
    if min_eig <= -PSD_TOL:
        raise SingularConditioningBlock(
            f"Conditioning covariance is indefinite (min eigenvalue {min_eig:.3e})."
        )
    if min_eig < MIN_EIGENVALUE:
        logger.info("Adding jitter %.1e to a near-singular conditioning block.", JITTER)
        cov = cov + JITTER * np.eye(cov.shape[0])
        min_eig += JITTER
        if min_eig <= MIN_EIGENVALUE:
            raise SingularConditioningBlock(
                "Conditioning covariance is singular beyond jitter repair."
            )
    return cov


def _check_disjoint(*block_sets: tuple[str, ...]) -> None:
    seen: set[str] = set()
    for names in block_sets:
        overlap = seen.intersection(names)
        if overlap:
            raise ValueError(f"Block sets must be disjoint, {sorted(overlap)} repeated.")
        seen.update(names)


def conditional(joint: GaussianJoint, target: BlockSet, given: BlockSet) -> GaussianConditional:
    """The conditional distribution of `target` given `given`.

    Returns the regression Σ_tg Σ_g⁻¹ and the Schur complement
    Σ_t − Σ_tg Σ_g⁻¹ Σ_gt.

    Raises:
        UnknownBlock: For names not in the joint.
        SingularConditioningBlock: If Σ_g cannot be inverted after jitter repair.
    """
    target_names, given_names = _as_names(target), _as_names(given)
    if not target_names:
        raise ValueError("Target block set must be nonempty.")
    _check_disjoint(target_names, given_names)
    s_t = joint.sub_cov(target_names)
    if not given_names:
        return GaussianConditional(np.zeros((s_t.shape[0], 0)), s_t)
    s_g = _repaired_conditioning_cov(joint.sub_cov(given_names))
    s_gt = joint.sub_cov(given_names, target_names)
    regression = _solve(s_g, s_gt).T
    cov = s_t - regression @ s_gt
    return GaussianConditional(regression, 0.5 * (cov + cov.T))


def entropy(joint: GaussianJoint, blocks: BlockSet) -> float:
    """Differential entropy ½·log((2πe)^n |Σ|) of the given blocks, in nats."""
    cov = joint.sub_cov(blocks)
    return 0.5 * (cov.shape[0] * LOG_2PI_E + logdet(cov))


def conditional_entropy(joint: GaussianJoint, blocks: BlockSet, given: BlockSet) -> float:
    """H(blocks | given) from the Schur complement covariance."""
    cov = conditional(joint, blocks, given).cov
    return 0.5 * (cov.shape[0] * LOG_2PI_E + logdet(cov))


def _split_mi(cov: NDArray[np.float64], n_a: int) -> float:
    return 0.5 * (logdet(cov[:n_a, :n_a]) + logdet(cov[n_a:, n_a:]) - logdet(cov))


def _split_lautum(cov: NDArray[np.float64], n_a: int) -> float:
    product = cov.copy()
    product[:n_a, n_a:] = 0.0
    product[n_a:, :n_a] = 0.0
    return gaussian_kl(product, cov)


def mutual_information(joint: GaussianJoint, a: BlockSet, b: BlockSet) -> float:
    """I(a;b) = ½·ln(|Σ_a||Σ_b| / |Σ_ab|)."""
    a_names, b_names = _as_names(a), _as_names(b)
    _check_disjoint(a_names, b_names)
    return _split_mi(joint.sub_cov(a_names + b_names), joint.block_dim(a_names))


def lautum_information(joint: GaussianJoint, a: BlockSet, b: BlockSet) -> float:
    """L(a;b) = D(P(a)P(b) || P(a,b)), the reversed-orientation KL."""
    a_names, b_names = _as_names(a), _as_names(b)
    _check_disjoint(a_names, b_names)
    return _split_lautum(joint.sub_cov(a_names + b_names), joint.block_dim(a_names))


def conditional_mutual_information(
    joint: GaussianJoint, a: BlockSet, b: BlockSet, given: BlockSet
) -> float:
    """I(a;b|given).

    Conditional covariances of a Gaussian do not depend on the conditioning
    value, so this is the mutual information of the Schur complement.
    """
    a_names, b_names, g_names = _as_names(a), _as_names(b), _as_names(given)
    _check_disjoint(a_names, b_names, g_names)
    cov = conditional(joint, a_names + b_names, g_names).cov
    return _split_mi(cov, joint.block_dim(a_names))


def conditional_lautum(
    joint: GaussianJoint, a: BlockSet, b: BlockSet, given: BlockSet
) -> float:
    """L(a;b|given) = E_g D(P(a|g)P(b|g) || P(a,b|g)).

    Gaussian-only shortcut: both conditionals share the conditional mean, so
    the KL reduces to covariances and is the same for every conditioning value.
    The general averaged form lives in `decomposition.decompose_discrete`.
    """
    a_names, b_names, g_names = _as_names(a), _as_names(b), _as_names(given)
    _check_disjoint(a_names, b_names, g_names)
    cov = conditional(joint, a_names + b_names, g_names).cov
    return _split_lautum(cov, joint.block_dim(a_names))


def product_coupling(
    joint: GaussianJoint, a: BlockSet, b: BlockSet, given: BlockSet = ()
) -> GaussianJoint:
    """The coupling P(g)P(a|g)P(b|g), as a joint over the same blocks.

    Only Cov(a, b) changes: it becomes Σ_ag Σ_g⁻¹ Σ_gb, the covariance of the
    two conditional means. With an empty `given` this is the product of the
    marginals of a and b.
    """
    a_names, b_names, g_names = _as_names(a), _as_names(b), _as_names(given)
    _check_disjoint(a_names, b_names, g_names)
    ia, ib = joint.indices(a_names), joint.indices(b_names)
    cov = joint.cov.copy()
    if g_names:
        reg_a = conditional(joint, a_names, g_names).regression
        cross = reg_a @ joint.sub_cov(g_names, b_names)
    else:
        cross = np.zeros((len(ia), len(ib)))
    cov[np.ix_(ia, ib)] = cross
    cov[np.ix_(ib, ia)] = cross.T
    return GaussianJoint(joint.blocks, cov)


def expected_log_density(
    second_moments: GaussianJoint,
    decoder: GaussianConditional,
    target: BlockSet = "Y",
    given: BlockSet = "T",
) -> float:
    """E log N(target; R·given, S) under the supplied second moments.

    The expectation of the Gaussian log-density is a quadratic form, so it is
    exact given Σ_target, Σ_given and their cross covariance.

    Args:
        second_moments: Any joint covering the target and given blocks.
        decoder: Conditional of the target given the `given` blocks.
        target: Target block names, default "Y".
        given: Conditioning block names, default "T".

    Raises:
        DegenerateCovariance: If the decoder covariance is not positive definite.
    """
    t_names, g_names = _as_names(target), _as_names(given)
    s_yy = second_moments.sub_cov(t_names)
    reg = decoder.regression
    if reg.shape != (s_yy.shape[0], second_moments.block_dim(g_names) if g_names else 0):
        raise ValueError(
            f"Decoder regression shape {reg.shape} does not match the blocks."
        )
    if g_names:
        s_gy = second_moments.sub_cov(g_names, t_names)
        s_gg = second_moments.sub_cov(g_names)
        residual = s_yy - reg @ s_gy - s_gy.T @ reg.T + reg @ s_gg @ reg.T
    else:
        residual = s_yy
    d = s_yy.shape[0]
    quad = float(np.trace(_solve(decoder.cov, residual)))
    return -0.5 * (d * np.log(2 * np.pi) + logdet(decoder.cov) + quad)
