import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klauskit.errors import NoPerfectMatching, ParseError, ZeroState
from klauskit.graph import (BI, MONO, ColoredGraph, EdgeKey, coloring_weight, coloring_weights,
                            double_factorial, edge_slots, enumerate_pairings, graph_from_json,
                            graph_to_dot, graph_to_json, graph_to_state, matchings_for_coloring)


def E(i, j, a, b):
    return EdgeKey(i, j, a, b)


def brute_pairings(n):
    """All partitions of range(n) into pairs, by filtering every permutation."""
    found = set()
    for perm in itertools.permutations(range(n)):
        pairs = frozenset(frozenset(perm[k:k + 2]) for k in range(0, n, 2))
        found.add(pairs)
    return found


@pytest.mark.parametrize("n,count", [(2, 1), (4, 3), (6, 15), (8, 105)])
def test_pairing_counts(n, count):
    pairings = enumerate_pairings(n)
    assert len(pairings) == count == double_factorial(n - 1)
    assert len(set(pairings)) == count


@pytest.mark.parametrize("n", [2, 4, 6])
def test_pairings_match_permutation_oracle(n):
    ours = {frozenset(frozenset(p) for p in pm) for pm in enumerate_pairings(n)}
    assert ours == brute_pairings(n)


def test_four_vertex_pairings():
    assert set(enumerate_pairings(4)) == {((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))}


def test_odd_vertex_count_rejected():
    with pytest.raises(NoPerfectMatching):
        enumerate_pairings(5)


def test_edge_slot_counts():
    assert len(edge_slots(4, 2, BI)) == 24
    assert len(edge_slots(6, 3, MONO)) == 45
    assert ColoredGraph.complete(6, 3, MONO).max_edges == 45


@pytest.mark.parametrize("n,d", [(2, 2), (4, 2), (4, 3), (6, 2)])
def test_complete_graph_counts(n, d):
    g = ColoredGraph.complete(n, d)
    per = [len(matchings_for_coloring(g, c)) for c in itertools.product(range(d), repeat=n)]
    assert set(per) == {double_factorial(n - 1)}
    assert sum(per) == d ** n * double_factorial(n - 1)


def test_coloring_with_two_matchings():
    # vertices a..f = 0..5
    w = [0.5, 1.5 + 1j, -2.0, 0.7j, 1.1]
    keys = [E(0, 1, 0, 0), E(2, 3, 0, 0), E(4, 5, 1, 1), E(0, 2, 0, 0), E(1, 3, 0, 0)]
    g = ColoredGraph(6, 2, dict(zip(keys, w)))
    c = (0, 0, 0, 0, 1, 1)
    pms = matchings_for_coloring(g, c)
    assert len(pms) == 2
    assert {frozenset(p) for p in pms} == {frozenset(keys[:3]), frozenset([keys[3], keys[4], keys[2]])}
    assert coloring_weight(g, c) == pytest.approx(w[0] * w[1] * w[2] + w[3] * w[4] * w[2])


def test_empty_graph():
    g = ColoredGraph(4, 2)
    assert matchings_for_coloring(g, (0, 1, 0, 1)) == []
    assert coloring_weight(g, (0, 0, 0, 0)) == 0
    with pytest.raises(ZeroState):
        graph_to_state(g)


def test_d1_complete_weight():
    assert coloring_weight(ColoredGraph.complete(4, 1), (0, 0, 0, 0)) == 3


def test_single_pm_state():
    k = graph_to_state(ColoredGraph(4, 1, [E(0, 1, 0, 0), E(2, 3, 0, 0)]))
    assert k.amplitudes == {(0, 0, 0, 0): 1}


def test_ghz42_graph_state():
    g = ColoredGraph(4, 2, [E(0, 1, 0, 0), E(2, 3, 0, 0), E(0, 2, 1, 1), E(1, 3, 1, 1)])
    amps = graph_to_state(g).amplitudes
    assert set(amps) == {(0, 0, 0, 0), (1, 1, 1, 1)}
    for a in amps.values():
        assert a == pytest.approx(1 / math.sqrt(2))
    # oracle: scan all 16 colorings
    nonzero = {c for c in itertools.product(range(2), repeat=4) if coloring_weight(g, c) != 0}
    assert nonzero == {(0, 0, 0, 0), (1, 1, 1, 1)}


def test_graph_is_immutable():
    g = ColoredGraph.complete(2, 2)
    with pytest.raises(AttributeError):
        g.n = 4


def test_invalid_edges():
    with pytest.raises(ValueError):
        E(2, 1, 0, 0)
    with pytest.raises(ValueError):
        ColoredGraph(4, 2, [E(0, 1, 0, 2)])
    with pytest.raises(ValueError):
        ColoredGraph(4, 2, [E(0, 1, 0, 1)], MONO)
    with pytest.raises(ValueError):
        ColoredGraph(4, 2, {E(0, 1, 0, 0): float("nan")})


def test_json_round_trip_and_dot():
    g = ColoredGraph(4, 2, {E(0, 1, 0, 0): 1 - 2j, E(2, 3, 1, 0): 0.25})
    assert graph_from_json(graph_to_json(g)) == g
    dot = graph_to_dot(g, "g")
    assert dot.startswith("graph g {") and dot.count("--") == 2


def test_json_errors():
    with pytest.raises(ParseError):
        graph_from_json("{not json")
    g = graph_to_json(ColoredGraph(2, 2, [E(0, 1, 0, 0)]))
    with pytest.raises(ParseError):
        graph_from_json(g.replace('"d": 2', '"d": 2, "d": 3'))


# -- properties ----------------------------------------------------------------------

@st.composite
def random_graphs(draw, max_n=6, max_d=3):
    n = draw(st.sampled_from([k for k in (2, 4, 6) if k <= max_n]))
    d = draw(st.integers(1, max_d))
    slots = edge_slots(n, d, BI)
    mask = draw(st.lists(st.booleans(), min_size=len(slots), max_size=len(slots)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    edges = {e: complex(*rng.normal(size=2)) for e, keep in zip(slots, mask) if keep}
    return ColoredGraph(n, d, edges)


@given(random_graphs(max_n=4), st.data())
def test_matchings_equal_bruteforce_filter(g, data):
    c = data.draw(st.tuples(*[st.integers(0, g.d - 1)] * g.n))
    expected = []
    for pairing in enumerate_pairings(g.n):
        keys = tuple(E(i, j, c[i], c[j]) for i, j in pairing)
        if all(k in g for k in keys):
            expected.append(keys)
    assert matchings_for_coloring(g, c) == expected


@given(random_graphs())
def test_coloring_weights_match_per_coloring(g):
    fast = coloring_weights(g)
    for c in itertools.product(range(g.d), repeat=g.n):
        slow = coloring_weight(g, c)
        assert abs(fast.get(c, 0) - slow) < 1e-12


@given(random_graphs(), st.data())
def test_multilinearity(g, data):
    if len(g) == 0:
        return
    e = data.draw(st.sampled_from(sorted(g.edges)))
    h = g.scaled(e, 2.0)
    for c in itertools.product(range(g.d), repeat=g.n):
        uses = any(e in pm for pm in matchings_for_coloring(g, c))
        base = coloring_weight(g, c)
        if uses:
            through = sum(math.prod((g.edges[k] for k in pm), start=1 + 0j)
                          for pm in matchings_for_coloring(g, c) if e in pm)
            assert abs(coloring_weight(h, c) - (base + through)) < 1e-12
        else:
            assert coloring_weight(h, c) == base


@given(random_graphs())
def test_state_is_normalized(g):
    try:
        k = graph_to_state(g)
    except ZeroState:
        return
    assert abs(k.norm() - 1.0) < 1e-12
