"""Linear-Gaussian structural equation models on the IB vertices.

Every vertex v is generated as v = Σ_{u in pa(v)} C_vu·u + η_v with
η_v ~ N(0, N_v), which gives exact Gaussian joints over (X, Y, T) for any DAG.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
from attrs import evolve, field, frozen
from numpy.typing import NDArray

from iblab.gaussian_core import GaussianJoint
from iblab.graph_models import VERTICES, Dag, Vertex

__all__ = [
    "LinearGaussianSem",
    "InvalidSem",
    "build_joint",
    "implied_covariance",
    "sample",
    "random_sem",
    "scenario",
    "SCENARIOS",
]

COEF_RANGE = (0.3, 1.5)
NOISE_VAR_RANGE = (0.5, 2.0)


class InvalidSem(ValueError):
    """Raised when a structural equation model violates its invariants."""


def _to_dims(value: Mapping[Any, int]) -> dict[Vertex, int]:
    return {Vertex(k): int(v) for k, v in value.items()}


def _to_coeffs(value: Mapping[Any, Any]) -> dict[tuple[Vertex, Vertex], NDArray[np.float64]]:
    return {
        (Vertex(u), Vertex(v)): np.atleast_2d(np.asarray(c, dtype=np.float64))
        for (u, v), c in value.items()
    }


def _to_noise(value: Mapping[Any, Any]) -> dict[Vertex, NDArray[np.float64]]:
    return {Vertex(k): np.atleast_2d(np.asarray(c, dtype=np.float64)) for k, c in value.items()}


@frozen
class LinearGaussianSem:
    """A linear-Gaussian SEM on a Dag over {X, Y, T}.

    Attributes:
        dag: The causal structure.
        dims: Dimension of each vertex.
        coeffs: For each edge u->v, a (dim v x dim u) coefficient matrix.
        noise_cov: Positive definite noise covariance of each vertex.
    """

    dag: Dag
    dims: dict[Vertex, int] = field(converter=_to_dims)
    coeffs: dict[tuple[Vertex, Vertex], NDArray[np.float64]] = field(
        converter=_to_coeffs, eq=False
    )
    noise_cov: dict[Vertex, NDArray[np.float64]] = field(converter=_to_noise, eq=False)

    def __attrs_post_init__(self):
        if set(self.dims) != set(VERTICES) or any(d < 1 for d in self.dims.values()):
            raise InvalidSem(f"Every vertex needs a positive dimension, got {self.dims}.")
        if set(self.coeffs) != set(self.dag.edges):
            raise InvalidSem("Coefficient matrices must exist exactly for the DAG edges.")
        for (u, v), coef in self.coeffs.items():
            if coef.shape != (self.dims[v], self.dims[u]):
                raise InvalidSem(
                    f"Coefficient {u}->{v} has shape {coef.shape}, "
                    f"expected {(self.dims[v], self.dims[u])}."
                )
        if set(self.noise_cov) != set(VERTICES):
            raise InvalidSem("Every vertex needs a noise covariance.")
        for v, cov in self.noise_cov.items():
            if cov.shape != (self.dims[v], self.dims[v]):
                raise InvalidSem(f"Noise covariance of {v} has shape {cov.shape}.")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise InvalidSem(f"Noise covariance of {v} is not symmetric.")
            if np.linalg.eigvalsh(cov).min() <= 0:
                raise InvalidSem(f"Noise covariance of {v} is not positive definite.")

    @classmethod
    def unit(
        cls, dag: Dag, coef: float = 1.0, coefs: Mapping[str, float] | None = None
    ) -> LinearGaussianSem:
        """A 1-D SEM with unit noise variances and scalar coefficients.

        Args:
            dag: The structure.
            coef: Coefficient used for every edge.
            coefs: Per-edge overrides keyed like "X->T".
        """
        coefs = coefs or {}
        coeffs = {(u, v): [[coefs.get(f"{u}->{v}", coef)]] for u, v in dag.edges}
        return cls(
            dag,
            {v: 1 for v in VERTICES},
            coeffs,
            {v: [[1.0]] for v in VERTICES},
        )

    def with_coefficient(self, edge: tuple[str, str], value: float) -> LinearGaussianSem:
        """Return a copy with every entry of one edge's coefficient set to `value`."""
        key = (Vertex(edge[0]), Vertex(edge[1]))
        if key not in self.coeffs:
            raise InvalidSem(f"Edge {key[0]}->{key[1]} is not in the SEM.")
        coeffs = dict(self.coeffs)
        coeffs[key] = np.full_like(coeffs[key], value)
        return evolve(self, coeffs=coeffs)

    @property
    def offsets(self) -> dict[Vertex, slice]:
        """Slices of each vertex in the stacked (X, Y, T) vector."""
        result: dict[Vertex, slice] = {}
        start = 0
        for v in VERTICES:
            result[v] = slice(start, start + self.dims[v])
            start += self.dims[v]
        return result

    @property
    def total_dim(self) -> int:
        return sum(self.dims.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "dims": {v.value: self.dims[v] for v in VERTICES},
            "edges": [
                {"from": u, "to": v, "coef": self.coeffs[(Vertex(u), Vertex(v))].tolist()}
                for u, v in self.dag.to_list()
            ],
            "noise_cov": {v.value: self.noise_cov[v].tolist() for v in VERTICES},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> LinearGaussianSem:
        """Build a SEM from its JSON document.

        The document has `dims` (vertex -> int, default 1), `edges` (a list of
        {"from", "to", "coef"}) and `noise_cov` (vertex -> matrix, default
        identity).
        """
        try:
            dims = {v.value: 1 for v in VERTICES}
            dims.update(data.get("dims", {}))
            edges = data.get("edges", [])
            dag = Dag([(e["from"], e["to"]) for e in edges])
            coeffs = {(e["from"], e["to"]): e["coef"] for e in edges}
            noise = {v: np.eye(d).tolist() for v, d in dims.items()}
            noise.update(data.get("noise_cov", {}))
        except (KeyError, TypeError, AttributeError) as e:
            raise InvalidSem(f"Malformed SEM document: {e!r}.") from None
        return cls(dag, dims, coeffs, noise)

    @classmethod
    def from_json_file(cls, filepath: str | Path) -> LinearGaussianSem:
        return cls.from_dict(json.loads(Path(filepath).read_text(encoding="utf8")))


def _loadings(sem: LinearGaussianSem) -> dict[Vertex, NDArray[np.float64]]:
    """Each vertex as a linear map of the stacked noise vector, in topological order."""
    offsets = sem.offsets
    loadings: dict[Vertex, NDArray[np.float64]] = {}
    for v in sem.dag.topological_order():
        load = np.zeros((sem.dims[v], sem.total_dim))
        load[:, offsets[v]] = np.eye(sem.dims[v])
        for u in sem.dag.parents(v):
            load += sem.coeffs[(u, v)] @ loadings[u]
        loadings[v] = load
    return loadings


def _noise_block(sem: LinearGaussianSem) -> NDArray[np.float64]:
    noise = np.zeros((sem.total_dim, sem.total_dim))
    for v, sl in sem.offsets.items():
        noise[sl, sl] = sem.noise_cov[v]
    return noise


def _joint_from_cov(sem: LinearGaussianSem, cov: NDArray[np.float64]) -> GaussianJoint:
    cov = 0.5 * (cov + cov.T)
    return GaussianJoint([(v.value, sem.dims[v]) for v in VERTICES], cov)


def build_joint(sem: LinearGaussianSem) -> GaussianJoint:
    """The exact joint over (X, Y, T) implied by the SEM.

    Noise is propagated through the structural equations in topological order.
    """
    loadings = _loadings(sem)
    stacked = np.vstack([loadings[v] for v in VERTICES])
    return _joint_from_cov(sem, stacked @ _noise_block(sem) @ stacked.T)


def implied_covariance(sem: LinearGaussianSem) -> GaussianJoint:
    """The same joint as `build_joint` through (I-W)^-1 N (I-W)^-T."""
    offsets = sem.offsets
    weights = np.zeros((sem.total_dim, sem.total_dim))
    for (u, v), coef in sem.coeffs.items():
        weights[offsets[v], offsets[u]] = coef
    inv = np.linalg.inv(np.eye(sem.total_dim) - weights)
    return _joint_from_cov(sem, inv @ _noise_block(sem) @ inv.T)


def sample(sem: LinearGaussianSem, n: int, seed: int) -> NDArray[np.float64]:
    """Draw n samples, columns ordered as the blocks of `build_joint`.

    Standard-normal noise is scaled by the Cholesky factor of each noise
    covariance and pushed through the equations in topological order.
    """
    if n < 1:
        raise ValueError(f"Sample size must be at least 1, got {n}.")
    rng = np.random.default_rng(seed)
    offsets = sem.offsets
    values: dict[Vertex, NDArray[np.float64]] = {}
    # Draw noise in fixed vertex order so the stream does not depend on the DAG.
    noise = {
        v: rng.standard_normal((n, sem.dims[v])) @ np.linalg.cholesky(sem.noise_cov[v]).T
        for v in VERTICES
    }
    for v in sem.dag.topological_order():
        value = noise[v].copy()
        for u in sem.dag.parents(v):
            value += values[u] @ sem.coeffs[(u, v)].T
        values[v] = value
    out = np.empty((n, sem.total_dim))
    for v in VERTICES:
        out[:, offsets[v]] = values[v]
    return out


def random_sem(
    dag: Dag, seed: int, dims: Mapping[str, int] | int = 1
) -> LinearGaussianSem:
    """A SEM with generic coefficients.

    Coefficient entries are uniform on [0.3, 1.5] with a random sign; noise
    covariances are diagonal with variances uniform on [0.5, 2.0].
    """
    rng = np.random.default_rng(seed)
    if isinstance(dims, int):
        dims = {v.value: dims for v in VERTICES}
    vdims = _to_dims(dims)
    coeffs = {}
    for u, v in sorted(dag.edges, key=lambda e: (VERTICES.index(e[0]), VERTICES.index(e[1]))):
        shape = (vdims[v], vdims[u])
        magnitude = rng.uniform(*COEF_RANGE, size=shape)
        coeffs[(u, v)] = magnitude * rng.choice([-1.0, 1.0], size=shape)
    noise = {v: np.diag(rng.uniform(*NOISE_VAR_RANGE, size=vdims[v])) for v in VERTICES}
    return LinearGaussianSem(dag, vdims, coeffs, noise)


SCENARIOS: dict[str, str] = {
    "chain_txy": "X->T, X->Y",
    "chain_xty": "X->T, T->Y",
    "confounded": "X->T, X->Y, T->Y",
    # Inadmissible: Y feeds T directly. Used as a negative control.
    "y_into_t": "X->T, Y->T",
}


def scenario(name: str, coef: float = 1.0) -> LinearGaussianSem:
    """One of the named unit-noise, 1-D test-bed SEMs."""
    if name not in SCENARIOS:
        raise InvalidSem(f"Unknown scenario '{name}', expected one of {sorted(SCENARIOS)}.")
    return LinearGaussianSem.unit(Dag.from_string(SCENARIOS[name]), coef=coef)
