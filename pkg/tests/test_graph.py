import math

import pytest
from hypothesis import given, strategies as st

from qgraph_wegner.errors import InputError, ResourceError
from qgraph_wegner.graph import (
    Edge,
    MetricGraph,
    build_lattice_graph,
    build_named_graph,
    dumps_graph,
    fibonacci_word,
    full_subgraph,
    induced_subgraph,
    loads_graph,
    path_graph,
)


@pytest.mark.parametrize("nu,l", [(1, 2), (1, 8), (2, 2), (2, 4), (3, 3)])
def test_window_size_formula(nu, l):
    g, window = build_lattice_graph(nu, l)
    assert len(window) == nu * l * (l - 1) ** (nu - 1)
    assert all(g.edge(e).length == 1.0 for e in window)


def test_lattice_partition_2d():
    g, window = build_lattice_graph(2, 4)
    sub = induced_subgraph(g, window)
    assert len(g.edges) == 84
    assert (len(sub.interior), len(sub.boundary)) == (9, 12)
    assert sub.interior | sub.boundary | sub.exterior == frozenset(g.vertices)
    # every window edge touches only interior or boundary vertices
    for e in window:
        ed = g.edge(e)
        assert {ed.init, ed.term} <= sub.vertices


def test_window_boundary_in_one_dimension():
    g, window = build_lattice_graph(1, 8)
    sub = induced_subgraph(g, window)
    assert len(sub.boundary) == 2
    assert sub.volume() == 8.0
    for v in sub.boundary:
        assert sub.degree(v) == 1 and g.degree(v) == 2


def test_lattice_cap():
    with pytest.raises(ResourceError):
        build_lattice_graph(3, 50, cap=1000)


def test_named_fixtures():
    star = build_named_graph("star", K=4, l=0.5)
    assert star.degree(0) == 4 and all(star.degree(v) == 1 for v in range(1, 5))
    loop = build_named_graph("loop", l=3.0)
    assert loop.degree(0) == 2 and loop.volume() == 3.0
    assert build_named_graph("interval").volume() == pytest.approx(math.pi)


def test_fibonacci_chain():
    assert fibonacci_word(5) == "abaababa"
    g = build_named_graph("fibonacci_chain", generations=5)
    assert len(g.edges) == 8
    assert g.volume() == pytest.approx(9.854101966249685, rel=1e-15)
    with pytest.raises(ResourceError):
        fibonacci_word(40)


@pytest.mark.parametrize(
    "make",
    [
        lambda: MetricGraph((0, 1), (Edge(0, 0, 1, 0.0),)),
        lambda: MetricGraph((0, 1), (Edge(0, 0, 2, 1.0),)),
        lambda: MetricGraph((0, 1, 2), (Edge(0, 0, 1, 1.0),)),
        lambda: MetricGraph((0, 1), (Edge(0, 0, 1, 1.0), Edge(0, 1, 0, 1.0))),
        lambda: build_named_graph("star", K=0),
        lambda: build_named_graph("hexagon"),
    ],
)
def test_invalid_graphs(make):
    with pytest.raises(InputError):
        make()


def test_text_round_trip():
    g, _ = build_lattice_graph(2, 3)
    h = loads_graph(dumps_graph(g))
    assert h.vertices == g.vertices and h.edges == g.edges
    assert dict(h.embedding) == dict(g.embedding)


def test_text_errors_carry_line_numbers():
    with pytest.raises(InputError, match="line 2"):
        loads_graph("vertex 0\nedge x 0 1\n")


def test_complement_and_full():
    g = path_graph([1.0, 2.0, 3.0])
    sub = induced_subgraph(g, [1])
    comp = sub.complement()
    assert comp.edges == frozenset({0, 2})
    assert full_subgraph(g).boundary == frozenset()
    assert sub.as_graph().volume() == 2.0


@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=12), st.data())
def test_partition_property(lengths, data):
    g = path_graph(lengths)
    edges = data.draw(st.sets(st.sampled_from(g.edge_ids)))
    sub = induced_subgraph(g, edges)
    assert sub.interior.isdisjoint(sub.boundary)
    assert sub.interior | sub.boundary | sub.exterior == frozenset(g.vertices)
    assert sub.volume() == pytest.approx(sum(lengths[e] for e in edges))
    for v in sub.boundary:
        assert 0 < sub.degree(v) < g.degree(v)
