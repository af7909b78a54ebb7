"""Finite metric graphs, induced subgraphs and standard graph families.

Edges are identified with intervals ``[0, l_e]`` oriented from the initial
vertex to the terminal vertex. Loops and multi-edges are allowed; a loop
contributes two incidences to the degree of its vertex.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InputError, ResourceError

# Upper limit for nu * l**nu in lattice constructions.
LATTICE_SIZE_CAP = 2_000_000
FIBONACCI_GENERATION_CAP = 30


@dataclass(frozen=True)
class Edge:
    id: int
    init: int
    term: int
    length: float


@dataclass(frozen=True)
class MetricGraph:
    """The triple (V, E, G): vertex ids, oriented edges with lengths, embedding."""

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    embedding: Mapping[int, tuple[int, ...]] | None = None
    _edge_index: dict = field(init=False, repr=False, compare=False)
    _incidence: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vertices = tuple(sorted(set(self.vertices)))
        if len(vertices) != len(self.vertices):
            raise InputError("duplicate vertex ids")
        edges = tuple(sorted(self.edges, key=lambda e: e.id))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        vset = set(vertices)
        index = {}
        incidence = {v: [] for v in vertices}
        for e in edges:
            if e.id in index:
                raise InputError(f"duplicate edge id {e.id}")
            if e.init not in vset or e.term not in vset:
                raise InputError(f"edge {e.id} has an undeclared endpoint")
            if not (e.length > 0 and math.isfinite(e.length)):
                raise InputError(f"edge {e.id} has non-positive length {e.length}")
            index[e.id] = e
            incidence[e.init].append((e.id, 0))
            incidence[e.term].append((e.id, 1))
        isolated = [v for v, inc in incidence.items() if not inc]
        if isolated:
            raise InputError(f"isolated vertices are not allowed: {isolated[:5]}")
        object.__setattr__(self, "_edge_index", index)
        object.__setattr__(
            self, "_incidence", {v: tuple(sorted(inc)) for v, inc in incidence.items()}
        )

    def edge(self, edge_id: int) -> Edge:
        try:
            return self._edge_index[edge_id]
        except KeyError:
            raise InputError(f"unknown edge id {edge_id}") from None

    @property
    def edge_ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges)

    def incidences(self, v: int) -> tuple[tuple[int, int], ...]:
        """Edge ends ``(edge_id, side)`` at ``v`` in ascending edge-id order.

        ``side`` is 0 for the initial end (coordinate 0), 1 for the terminal end.
        """
        return self._incidence[v]

    def degree(self, v: int) -> int:
        return len(self._incidence[v])

    def volume(self) -> float:
        return math.fsum(e.length for e in self.edges)


@dataclass(frozen=True)
class InducedSubgraph:
    """Edge subset ``edges`` of ``parent`` with its interior/boundary/exterior partition."""

    parent: MetricGraph
    edges: frozenset[int]
    interior: frozenset[int]
    boundary: frozenset[int]
    exterior: frozenset[int]

    @property
    def vertices(self) -> frozenset[int]:
        return self.interior | self.boundary

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[int]:
        return sorted(self.edges)

    def incidences(self, v: int) -> tuple[tuple[int, int], ...]:
        return tuple(inc for inc in self.parent.incidences(v) if inc[0] in self.edges)

    def degree(self, v: int) -> int:
        """Degree of ``v`` in the subgraph (0 for exterior vertices)."""
        return len(self.incidences(v))

    def volume(self) -> float:
        return volume(self)

    def complement(self) -> "InducedSubgraph":
        return induced_subgraph(self.parent, set(self.parent.edge_ids) - self.edges)

    def as_graph(self) -> MetricGraph:
        """The metric graph ``G_Lambda`` built from the subgraph alone."""
        emb = None
        if self.parent.embedding is not None:
            emb = {v: self.parent.embedding[v] for v in self.vertices}
        return MetricGraph(
            tuple(self.vertices),
            tuple(self.parent.edge(e) for e in self.edges),
            emb,
        )


def induced_subgraph(graph: MetricGraph, edges: Iterable[int]) -> InducedSubgraph:
    lam = frozenset(edges)
    for e in lam:
        graph.edge(e)
    interior, boundary, exterior = set(), set(), set()
    for v in graph.vertices:
        inside = sum(1 for e, _ in graph.incidences(v) if e in lam)
        if inside == graph.degree(v):
            interior.add(v)
        elif inside == 0:
            exterior.add(v)
        else:
            boundary.add(v)
    return InducedSubgraph(graph, lam, frozenset(interior), frozenset(boundary), frozenset(exterior))


def full_subgraph(graph: MetricGraph) -> InducedSubgraph:
    return induced_subgraph(graph, graph.edge_ids)


def volume(sub: InducedSubgraph) -> float:
    """Sum of edge lengths over the subgraph's edges."""
    return math.fsum(sub.parent.edge(e).length for e in sub.edges)


# ---------------------------------------------------------------------------
# constructors


def build_lattice_graph(nu: int, l: int, cap: int = LATTICE_SIZE_CAP) -> tuple[MetricGraph, frozenset[int]]:
    """Unit-edge Z^nu grid on the box [-1, l+1]^nu together with the window Lambda_l.

    An edge belongs to Lambda_l iff its open interior lies in (0, l)^nu, so
    ``|Lambda_l| = nu * l * (l-1)**(nu-1)``. The surrounding layer makes every
    vertex of the window's induced subgraph have full degree 2*nu in the
    parent graph.
    """
    if nu < 1 or l < 2:
        raise InputError("lattice needs nu >= 1 and l >= 2")
    if nu * l**nu > cap:
        raise ResourceError(f"lattice nu={nu}, l={l} exceeds size cap {cap}")
    side = range(-1, l + 2)
    coords = list(itertools.product(side, repeat=nu))
    vid = {x: i for i, x in enumerate(coords)}
    edges = []
    window = set()
    for x in coords:
        for k in range(nu):
            y = x[:k] + (x[k] + 1,) + x[k + 1 :]
            if y not in vid:
                continue
            eid = len(edges)
            edges.append(Edge(eid, vid[x], vid[y], 1.0))
            if 0 <= x[k] <= l - 1 and all(1 <= x[j] <= l - 1 for j in range(nu) if j != k):
                window.add(eid)
    graph = MetricGraph(tuple(vid.values()), tuple(edges), {i: x for x, i in vid.items()})
    return graph, frozenset(window)


def path_graph(lengths: Sequence[float]) -> MetricGraph:
    """Chain v0 - v1 - ... - vn with edge i joining v_i and v_{i+1}."""
    if not lengths:
        raise InputError("path needs at least one edge")
    edges = tuple(Edge(i, i, i + 1, float(x)) for i, x in enumerate(lengths))
    return MetricGraph(tuple(range(len(lengths) + 1)), edges)


def fibonacci_word(generations: int) -> str:
    if generations < 1:
        raise InputError("generations must be >= 1")
    if generations > FIBONACCI_GENERATION_CAP:
        raise ResourceError(f"generations > {FIBONACCI_GENERATION_CAP}")
    word = "a"
    for _ in range(generations - 1):
        word = "".join("ab" if c == "a" else "a" for c in word)
    return word


def build_named_graph(kind: str, **params) -> MetricGraph:
    """Analytic fixtures and the aperiodic substitution chain.

    kinds: ``interval(l)``, ``loop(l)``, ``star(K, l)``, ``path(lengths)``,
    ``fibonacci_chain(generations, lengths=(a, b))``.
    """
    if kind == "interval":
        return path_graph([_positive(params.get("l", math.pi), "l")])
    if kind == "loop":
        return MetricGraph((0,), (Edge(0, 0, 0, _positive(params.get("l", 2 * math.pi), "l")),))
    if kind == "star":
        K = int(params.get("K", 3))
        length = _positive(params.get("l", 1.0), "l")
        if K < 1:
            raise InputError("star needs K >= 1")
        # centre is vertex 0, tips 1..K; edges point from centre outwards
        edges = tuple(Edge(i, 0, i + 1, length) for i in range(K))
        return MetricGraph(tuple(range(K + 1)), edges)
    if kind == "path":
        return path_graph([_positive(x, "length") for x in params["lengths"]])
    if kind == "fibonacci_chain":
        a, b = params.get("lengths", (1.0, (1 + math.sqrt(5)) / 2))
        word = fibonacci_word(int(params.get("generations", 5)))
        table = {"a": _positive(a, "a"), "b": _positive(b, "b")}
        return path_graph([table[c] for c in word])
    raise InputError(f"unknown graph kind {kind!r}")


def _positive(x, name):
    x = float(x)
    if not x > 0:
        raise InputError(f"{name} must be positive")
    return x


# ---------------------------------------------------------------------------
# text format


def dumps_graph(graph: MetricGraph) -> str:
    """``vertex <id> [coords...]`` and ``edge <id> <init> <term> <length>`` lines."""
    lines = []
    for v in graph.vertices:
        coords = ""
        if graph.embedding is not None and v in graph.embedding:
            coords = "".join(f" {c}" for c in graph.embedding[v])
        lines.append(f"vertex {v}{coords}")
    for e in graph.edges:
        lines.append(f"edge {e.id} {e.init} {e.term} {e.length!r}")
    return "\n".join(lines) + "\n"


def loads_graph(text: str) -> MetricGraph:
    vertices, edges, embedding = [], [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "vertex":
                v = int(tok[1])
                vertices.append(v)
                if len(tok) > 2:
                    embedding[v] = tuple(int(c) for c in tok[2:])
            elif tok[0] == "edge" and len(tok) == 5:
                edges.append(Edge(int(tok[1]), int(tok[2]), int(tok[3]), float(tok[4])))
            else:
                raise ValueError(tok[0])
        except (ValueError, IndexError):
            raise InputError(f"line {lineno}: cannot parse {raw!r}") from None
    return MetricGraph(tuple(vertices), tuple(edges), embedding or None)
