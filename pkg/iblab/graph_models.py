"""Directed graphical models of the information bottleneck over {X, Y, T}."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator
from itertools import combinations, permutations, product

from attrs import field, frozen

__all__ = [
    "Vertex",
    "Dag",
    "MarkovClass",
    "Classification",
    "IbModel",
    "InvalidDag",
    "d_separated",
    "classify",
    "enumerate_all_dags",
    "admissible_ib_dags",
    "is_admissible",
    "ib_model_listing",
]


class InvalidDag(ValueError):
    """Raised when an edge set is not a DAG on {X, Y, T}."""


class Vertex(str, enum.Enum):
    X = "X"
    Y = "Y"
    T = "T"

    def __str__(self) -> str:
        return self.value


VERTICES = (Vertex.X, Vertex.Y, Vertex.T)

Edge = tuple[Vertex, Vertex]


def _to_edges(value: Iterable[tuple[str, str]]) -> frozenset[Edge]:
    return frozenset((Vertex(u), Vertex(v)) for u, v in value)


def _has_cycle(edges: frozenset[Edge]) -> bool:
    children: dict[Vertex, set[Vertex]] = {v: set() for v in VERTICES}
    for u, v in edges:
        children[u].add(v)

    def reaches(start: Vertex, goal: Vertex, visited: frozenset[Vertex]) -> bool:
        for nxt in children[start]:
            if nxt == goal or (nxt not in visited and reaches(nxt, goal, visited | {nxt})):
                return True
        return False

    return any(reaches(v, v, frozenset({v})) for v in VERTICES)


@frozen
class Dag:
    """A directed acyclic graph on the labeled vertices X, Y and T."""

    edges: frozenset[Edge] = field(factory=frozenset, converter=_to_edges)

    @edges.validator
    def _check_edges(self, attribute, value):
        for u, v in value:
            if u == v:
                raise InvalidDag(f"Self-loop on {u}.")
            if (v, u) in value:
                raise InvalidDag(f"Edges {u}->{v} and {v}->{u} form a 2-cycle.")
        if _has_cycle(value):
            raise InvalidDag(f"Edge set {self._format(value)} contains a cycle.")

    @classmethod
    def from_string(cls, text: str) -> Dag:
        """Parse a comma-separated edge list such as "X->T, T->Y"."""
        edges = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            u, _, v = part.partition("->")
            edges.append((u.strip(), v.strip()))
        return cls(edges)

    @staticmethod
    def _format(edges: Iterable[Edge]) -> str:
        ordered = sorted(edges, key=lambda e: (VERTICES.index(e[0]), VERTICES.index(e[1])))
        return ", ".join(f"{u}->{v}" for u, v in ordered) or "(empty)"

    def __str__(self) -> str:
        return self._format(self.edges)

    def has_edge(self, u: Vertex | str, v: Vertex | str) -> bool:
        return (Vertex(u), Vertex(v)) in self.edges

    def adjacent(self, u: Vertex | str, v: Vertex | str) -> bool:
        return self.has_edge(u, v) or self.has_edge(v, u)

    def parents(self, v: Vertex | str) -> list[Vertex]:
        return [u for u in VERTICES if (u, Vertex(v)) in self.edges]

    def children(self, v: Vertex | str) -> list[Vertex]:
        return [w for w in VERTICES if (Vertex(v), w) in self.edges]

    def descendants(self, v: Vertex | str) -> set[Vertex]:
        result: set[Vertex] = set()
        stack = self.children(v)
        while stack:
            w = stack.pop()
            if w not in result:
                result.add(w)
                stack.extend(self.children(w))
        return result

    def topological_order(self) -> list[Vertex]:
        order: list[Vertex] = []
        remaining = list(VERTICES)
        while remaining:
            for v in remaining:
                if all(p in order for p in self.parents(v)):
                    order.append(v)
                    remaining.remove(v)
                    break
        return order

    def to_list(self) -> list[list[str]]:
        ordered = sorted(self.edges, key=lambda e: (VERTICES.index(e[0]), VERTICES.index(e[1])))
        return [[u.value, v.value] for u, v in ordered]


class MarkovClass(str, enum.Enum):
    """The defining Markov assumption of an IB model."""

    CHAIN_TXY = "T-X-Y"
    CHAIN_XTY = "X-T-Y"
    OTHER = "Other"

    def __str__(self) -> str:
        return self.value


def _paths(dag: Dag, a: Vertex, b: Vertex) -> Iterator[list[Vertex]]:
    """All simple undirected paths from a to b."""
    others = [v for v in VERTICES if v not in (a, b)]
    for k in range(len(others) + 1):
        for middle in permutations(others, k):
            path = [a, *middle, b]
            if all(dag.adjacent(u, v) for u, v in zip(path, path[1:])):
                yield path


def _blocked(dag: Dag, path: list[Vertex], given: set[Vertex]) -> bool:
    for prev, mid, nxt in zip(path, path[1:], path[2:]):
        collider = dag.has_edge(prev, mid) and dag.has_edge(nxt, mid)
        if collider:
            if mid not in given and not (dag.descendants(mid) & given):
                return True
        elif mid in given:
            return True
    return False


def d_separated(
    dag: Dag, a: Vertex | str, b: Vertex | str, given: Iterable[Vertex | str] = ()
) -> bool:
    """Whether every path between a and b is blocked given `given`.

    Chains and forks are blocked by conditioning on the middle vertex;
    a collider blocks unless it or one of its descendants is conditioned on.
    """
    a, b = Vertex(a), Vertex(b)
    given_set = {Vertex(v) for v in given}
    if a == b:
        raise ValueError("d-separation needs two distinct vertices.")
    if a in given_set or b in given_set:
        raise ValueError("The separated vertices must not be in the conditioning set.")
    return all(_blocked(dag, path, given_set) for path in _paths(dag, a, b))


@frozen
class Classification:
    """Markov class of a DAG, with the full set of chains it satisfies."""

    markov_class: MarkovClass
    chains: frozenset[MarkovClass]

    @property
    def both_chains(self) -> bool:
        return len(self.chains) == 2


def classify(dag: Dag) -> Classification:
    """Place a DAG in its Markov column of the standard listing.

    A DAG satisfying both chains goes to the T-X-Y column; `both_chains`
    keeps that information.
    """
    chains: set[MarkovClass] = set()
    if d_separated(dag, Vertex.T, Vertex.Y, [Vertex.X]):
        chains.add(MarkovClass.CHAIN_TXY)
    if d_separated(dag, Vertex.X, Vertex.Y, [Vertex.T]):
        chains.add(MarkovClass.CHAIN_XTY)
    if MarkovClass.CHAIN_TXY in chains:
        markov_class = MarkovClass.CHAIN_TXY
    elif chains:
        markov_class = MarkovClass.CHAIN_XTY
    else:
        markov_class = MarkovClass.OTHER
    return Classification(markov_class, frozenset(chains))


def enumerate_all_dags() -> list[Dag]:
    """All 25 labeled DAGs on {X, Y, T}."""
    pairs = list(combinations(VERTICES, 2))
    dags: list[Dag] = []
    # Each unordered pair is absent, forward or backward.
    for states in product((None, 0, 1), repeat=len(pairs)):
        edges = [
            (u, v) if state == 0 else (v, u)
            for (u, v), state in zip(pairs, states)
            if state is not None
        ]
        try:
            dags.append(Dag(edges))
        except InvalidDag:
            continue
    return dags


def is_admissible(dag: Dag) -> bool:
    """Whether a DAG is an admissible information bottleneck model.

    T must not depend directly on Y, and the DAG must not make T independent
    of X or of Y (unshielded colliders T->Y<-X and T->X<-Y, or T cut off).
    """
    if dag.has_edge(Vertex.Y, Vertex.T):
        return False
    if d_separated(dag, Vertex.T, Vertex.X):
        return False
    if d_separated(dag, Vertex.T, Vertex.Y):
        return False
    return True


def admissible_ib_dags() -> list[tuple[Dag, MarkovClass]]:
    """The admissible DAG models with their Markov class, grouped by class."""
    order = list(MarkovClass)
    result = [(dag, classify(dag).markov_class) for dag in enumerate_all_dags() if is_admissible(dag)]
    return sorted(result, key=lambda item: order.index(item[1]))


@frozen
class IbModel:
    """One entry of the standard listing of IB models.

    Attributes:
        edges: The printed edges, as (from, to) vertex names.
        column: The Markov column the entry is listed under.
        is_dag: Whether the printed edge set is acyclic.
    """

    edges: tuple[tuple[str, str], ...]
    column: MarkovClass
    is_dag: bool

    def to_dag(self) -> Dag | None:
        return Dag(self.edges) if self.is_dag else None

    def __str__(self) -> str:
        return ", ".join(f"{u}->{v}" for u, v in self.edges)


_LISTED_MODELS = {
    MarkovClass.CHAIN_TXY: [
        "T->X, X->Y",
        "X->T, X->Y",
        "X->T, Y->X",
    ],
    MarkovClass.CHAIN_XTY: [
        "X->T, T->Y",
        "T->X, T->Y",
    ],
    MarkovClass.OTHER: [
        "T->X, X->Y, T->Y",
        "X->T, X->Y, T->Y",
        "T->X, Y->X, T->Y",
        "Y->X, T->Y",
        "X->T, Y->X, T->Y",
    ],
}


def ib_model_listing() -> list[IbModel]:
    """The ten IB models of the standard listing, column by column.

    The fifth "Other" entry (T<-X<-Y with the curved T->Y arrow) is the
    directed cycle Y->X->T->Y; it is kept and flagged with `is_dag=False`.
    """
    models: list[IbModel] = []
    for column, entries in _LISTED_MODELS.items():
        for text in entries:
            edges = tuple(
                tuple(s.strip() for s in part.split("->")) for part in text.split(",")
            )
            try:
                Dag(edges)
                is_dag = True
            except InvalidDag:
                is_dag = False
            models.append(IbModel(edges, column, is_dag))  # type: ignore[arg-type]
    return models
