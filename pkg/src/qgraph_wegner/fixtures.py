"""Analytic oracle spectra and randomized fixtures for the inequality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alloy import PiecewiseConstant
from .assembly import DiscretizedOperator, assemble
from .conditions import ConditionFamily, standard_condition, uniform_family
from .errors import InputError
from .graph import MetricGraph, build_lattice_graph, build_named_graph, full_subgraph, path_graph


def oracle_spectrum(kind: str, count: int, **params) -> np.ndarray:
    """Lowest ``count`` eigenvalues of the free fixtures with multiplicity.

    interval: Dirichlet ends, ``(n pi / l)^2``. loop: ``(2 pi n / l)^2``, n >= 1
    doubly. star: Dirichlet tips, Kirchhoff centre; ``k l = (m + 1/2) pi``
    simple and ``k l = m pi`` with multiplicity K - 1.
    """
    out: list[float] = []
    if kind == "interval":
        length = float(params.get("l", math.pi))
        out = [(n * math.pi / length) ** 2 for n in range(1, count + 1)]
    elif kind == "loop":
        length = float(params.get("l", 2 * math.pi))
        out = [0.0]
        n = 1
        while len(out) < count:
            out += [(2 * math.pi * n / length) ** 2] * 2
            n += 1
    elif kind == "star":
        K = int(params.get("K", 3))
        length = float(params.get("l", 1.0))
        m = 0
        while len(out) < count:
            out.append(((m + 0.5) * math.pi / length) ** 2)
            out += [((m + 1) * math.pi / length) ** 2] * (K - 1)
            m += 1
    else:
        raise InputError(f"no oracle for {kind!r}")
    return np.array(sorted(out)[:count])


def oracle_fixture(kind: str, **params) -> tuple[MetricGraph, ConditionFamily]:
    """Graph and vertex conditions matching :func:`oracle_spectrum`."""
    g = build_named_graph(kind, **params)
    if kind == "interval":
        return g, uniform_family(g, "dirichlet")
    if kind == "loop":
        return g, uniform_family(g, "kirchhoff")
    if kind == "star":
        fam = ConditionFamily({v: standard_condition("dirichlet", 1, vertex=v) for v in g.vertices if v})
        fam[0] = standard_condition("kirchhoff", g.degree(0), vertex=0)
        return g, fam
    raise InputError(f"no oracle for {kind!r}")


def random_profile(rng: np.random.Generator, length: float, bound: float, pieces: int = 3,
                   signed: bool = True) -> PiecewiseConstant:
    cuts = np.sort(rng.uniform(0.0, length, size=pieces - 1))
    breaks = np.concatenate([[0.0], cuts, [length]])
    lo = -bound if signed else 0.0
    return PiecewiseConstant(breaks, rng.uniform(lo, bound, size=pieces))


def random_graph(rng: np.random.Generator) -> MetricGraph:
    kind = rng.integers(4)
    if kind == 0:
        return path_graph(rng.uniform(0.5, 2.0, size=int(rng.integers(2, 6))).tolist())
    if kind == 1:
        return build_named_graph("star", K=int(rng.integers(2, 5)), l=float(rng.uniform(0.5, 1.5)))
    if kind == 2:
        return build_named_graph("fibonacci_chain", generations=int(rng.integers(2, 5)),
                                 lengths=(float(rng.uniform(0.5, 1.0)), float(rng.uniform(1.0, 1.7))))
    return build_lattice_graph(2, 2)[0]


def random_family(rng: np.random.Generator, graph: MetricGraph) -> ConditionFamily:
    kinds = ("kirchhoff", "kirchhoff", "dirichlet", "neumann_decoupled", "delta")
    fam = ConditionFamily()
    for v in graph.vertices:
        k = kinds[int(rng.integers(len(kinds)))]
        fam[v] = standard_condition(k, graph.degree(v), float(rng.uniform(-1.0, 2.0)), vertex=v)
    return fam


@dataclass
class SsfFixture:
    graph: MetricGraph
    family: ConditionFamily
    window: tuple[int, ...]
    W1: dict
    W2: dict


def random_ssf_fixture(rng: np.random.Generator, bound: float = 4.0) -> SsfFixture:
    """Random graph, conditions, window and potentials with supp(W2 - W1) inside the window."""
    g = random_graph(rng)
    fam = random_family(rng, g)
    ids = list(g.edge_ids)
    k = int(rng.integers(1, len(ids) + 1))
    window = tuple(sorted(int(e) for e in rng.choice(ids, size=k, replace=False)))
    W1 = {e: random_profile(rng, g.edge(e).length, bound / 2) for e in ids}
    W2 = dict(W1)
    for e in window:
        W2[e] = W1[e] + random_profile(rng, g.edge(e).length, bound / 2)
    return SsfFixture(g, fam, window, W1, W2)


def random_operator(rng: np.random.Generator, max_dofs: int = 2000, bound: float = 4.0) -> DiscretizedOperator:
    """Random graph, conditions and potentials with a mesh giving at most ``max_dofs`` unknowns.

    The target size is log-uniform in [50, max_dofs], so small and large systems both occur.
    """
    g = random_graph(rng)
    fam = random_family(rng, g)
    W = {e.id: random_profile(rng, e.length, bound) for e in g.edges}
    target = int(math.exp(rng.uniform(math.log(min(50, max_dofs)), math.log(max_dofs))))
    h = max(g.volume() / target, 1e-3)
    op = assemble(full_subgraph(g), fam, None, None, h, extra=W)
    while op.n_dofs > max_dofs:
        h *= 1.1
        op = assemble(full_subgraph(g), fam, None, None, h, extra=W)
    return op
