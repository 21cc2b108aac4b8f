from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graphsc.errors import GraphParseError, ParameterError
from graphsc.graphs import (
    FeedbackGraph,
    GraphSequence,
    MissingSelfLoopWarning,
    disjoint_cliques,
    generate_graph,
    parse_generator_spec,
    parse_graph_file,
    resolve_graphs,
    serialize_graph,
    union_graph,
)
from strategies import graphs


def test_mab_and_clique():
    g = generate_graph("mab", 5)
    assert all(g.out_neighbors[i] == {i} for i in range(5))
    assert g.is_mab()
    g = generate_graph("clique", 3)
    assert all(s == {0, 1, 2} for s in g.out_neighbors)
    assert g.is_clique()


def test_erdos_zero_is_mab():
    assert generate_graph("erdos", 4, {"p": 0.0}, seed=3) == generate_graph("mab", 4)
    assert generate_graph("erdos", 4, {"p": 1.0}, seed=3) == generate_graph("clique", 4)


@pytest.mark.parametrize("kind,K,params", [("mab", 0, {}), ("erdos", 3, {"p": 1.5}), ("erdos", 3, {"p": -0.1}), ("nope", 3, {})])
def test_generator_rejects_bad_parameters(kind, K, params):
    with pytest.raises(ParameterError):
        generate_graph(kind, K, params)


@given(st.integers(1, 12), st.floats(0, 1), st.integers(0, 2**31))
def test_erdos_is_pure_and_has_self_loops(K, p, seed):
    a = generate_graph("erdos", K, {"p": p}, seed)
    b = generate_graph("erdos", K, {"p": p}, seed)
    assert a == b
    assert all(i in a.out_neighbors[i] for i in range(K))
    sym = generate_graph("erdos-symmetric", K, {"p": p}, seed)
    assert sym.is_symmetric()


def test_constructor_forces_self_loops_and_checks_indices():
    g = FeedbackGraph(2, (frozenset({1}), frozenset()))
    assert g.out_neighbors == (frozenset({0, 1}), frozenset({1}))
    with pytest.raises(ParameterError):
        FeedbackGraph(2, (frozenset({2}), frozenset()))


def test_adjacency_orientation():
    g = FeedbackGraph.from_edges(3, [(0, 2)])
    A = g.adjacency
    # column i sums the players that reveal i
    assert A[0, 2] == 1 and A[2, 0] == 0
    assert np.array_equal(np.diag(A), np.ones(3))


@pytest.mark.parametrize("K,alpha", [(25, 5), (10, 3), (7, 7), (6, 1)])
def test_disjoint_cliques(K, alpha):
    g = disjoint_cliques(K, alpha)
    comps = {frozenset(s) for s in g.out_neighbors}
    assert len(comps) == alpha
    assert g.is_symmetric()


def test_disjoint_cliques_impossible_split():
    assert len({frozenset(s) for s in disjoint_cliques(10, 4).out_neighbors}) == 4
    with pytest.raises(ParameterError):
        disjoint_cliques(9, 4)  # blocks of 3 leave only three groups


def test_parse_example():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        g = parse_graph_file("K 2\n0 -> 1\n")
    assert g.num_actions == 2
    assert g.out_neighbors == (frozenset({0, 1}), frozenset({1}))
    assert any(issubclass(w.category, MissingSelfLoopWarning) for w in rec)


def test_parse_undirected_sugar_comments_whitespace():
    with pytest.warns(MissingSelfLoopWarning):
        g = parse_graph_file("# header\n  K   3  \n0 -- 2   # both ways\n\n1->1\n")
    assert g.out_neighbors[0] == {0, 2} and g.out_neighbors[2] == {0, 2}


@pytest.mark.parametrize(
    "text,line",
    [
        ("K 2\n0 -> 5\n", 2),
        ("K 2\nK 3\n", 2),
        ("K 2\n0 => 1\n", 2),
        ("0 -> 1\nK 2\n", 1),
        ("# c\nK 3\n\n1 -> x\n", 4),
    ],
)
def test_parse_errors_name_line(text, line):
    with pytest.raises(GraphParseError) as exc:
        parse_graph_file(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_serialize_mab():
    text = serialize_graph(generate_graph("mab", 3))
    assert text == "K 3\n0 -> 0\n1 -> 1\n2 -> 2\n"


@given(graphs(max_K=10))
def test_round_trip(g):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert parse_graph_file(serialize_graph(g)) == g


def test_union_examples():
    G = generate_graph("erdos", 6, {"p": 0.4}, seed=1)
    assert union_graph(GraphSequence.fixed(G, 4)) == G
    assert union_graph([generate_graph("mab", 4), generate_graph("clique", 4)]) == generate_graph("clique", 4)
    u = union_graph([FeedbackGraph.from_edges(2, [(0, 1)]), FeedbackGraph.from_edges(2, [(1, 0)])])
    assert u.edges() == [(0, 1), (1, 0)]
    with pytest.raises(ParameterError):
        union_graph([])


@given(st.lists(graphs(min_K=4, max_K=4), min_size=1, max_size=4), st.randoms())
def test_union_order_free(gs, rnd):
    shuffled = list(gs)
    rnd.shuffle(shuffled)
    assert union_graph(gs) == union_graph(shuffled)
    if len(gs) > 1:
        assert union_graph([union_graph(gs[:1]), union_graph(gs[1:])]) == union_graph(gs)


def test_sequence_kinds():
    g = generate_graph("cycle", 4)
    assert GraphSequence.fixed(g, 3).kind == "fixed-directed"
    assert GraphSequence.fixed(generate_graph("cycle-symmetric", 4), 3).kind == "fixed-symmetric"
    assert GraphSequence.fixed(generate_graph("mab", 4), 3).kind == "mab"
    assert GraphSequence.fixed(generate_graph("clique", 4), 3).kind == "clique"
    with pytest.raises(ParameterError):
        GraphSequence((g, generate_graph("mab", 4)), "fixed-directed")
    with pytest.raises(ParameterError):
        GraphSequence((g, generate_graph("mab", 5)), "time-varying")
    with pytest.raises(ParameterError):
        GraphSequence((g,), "mab")


def test_blocks_layout():
    a, b = generate_graph("mab", 3), generate_graph("clique", 3)
    seq = GraphSequence.blocks([a, b], 5)
    assert [x is b for x in seq] == [False, False, False, True, True]
    assert len(seq.unique_graphs) == 2


def test_generator_spec_and_resolve(tmp_path):
    g = parse_generator_spec("cliques:K=25,alpha=5")
    assert g == disjoint_cliques(25, 5)
    path = tmp_path / "g.txt"
    path.write_text("K 3\n0 -> 1\n0 -> 0\n1 -> 1\n2 -> 2\n")
    seq = resolve_graphs([str(path)], 4)
    assert seq.T == 4 and seq.unique_graphs[0].edges() == [(0, 1)]
    with pytest.raises(ParameterError):
        parse_generator_spec("erdos:p=0.3")
