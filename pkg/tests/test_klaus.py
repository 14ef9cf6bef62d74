import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from klauskit.errors import BudgetExceeded, InfeasibleTarget, ShapeError
from klauskit.graph import BI, MONO, ColoredGraph, EdgeKey, edge_slots, graph_to_state
from klauskit.klaus import (FIXED_TRUE, FREE, UNCLASSIFIED, EdgeClassifier, KlausConfig,
                            check_monochromatic_conjecture, klaus, klaus_opt, sat_check, symmetry_cases)
from klauskit.logic import TRUE, build_k
from klauskit.optimizer import OptimizerConfig, theseus
from klauskit.solution import DISPOSABLE, INDISPENSABLE, recompute_fidelity
from klauskit.state import Ket, fidelity, get_target, ghz

GHZ42_EXACT = [EdgeKey(0, 1, 0, 0), EdgeKey(2, 3, 0, 0), EdgeKey(0, 2, 1, 1), EdgeKey(1, 3, 1, 1)]


def all_subsets_satisfying(enc, edges):
    """Boolean vector over every subset of ``edges`` (bit k <-> edges[k]); vectorized K evaluation."""
    chk = enc.checker
    cols = np.array([enc.variables.id(e) - 1 for e in edges], dtype=np.int64)
    k = len(edges)
    bits = ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1).astype(bool)
    ok = np.zeros(2 ** k, dtype=bool)
    for start in range(0, 2 ** k, 4096):
        block = bits[start:start + 4096]
        present = np.zeros((len(block), len(enc.variables)), dtype=bool)
        present[:, cols] = block
        alive = present[:, chk.term_edges].all(axis=2).astype(np.int64)
        counts = np.zeros((len(block), len(chk.colorings)), dtype=np.int64)
        np.add.at(counts.T, chk.term_owner, alive.T)
        good = ~np.any(counts[:, chk.is_support] == 0, axis=1) & ~np.any(counts[:, ~chk.is_support] == 1, axis=1)
        ok[start:start + len(block)] = good
    return bits, ok


# -- examples ------------------------------------------------------------------------

def test_klaus_ghz42_four_edges():
    sol = klaus(ghz(4, 2), KlausConfig(seed=0))
    assert sol.edge_count == 4 and sol.fidelity == pytest.approx(1.0, abs=1e-6)
    assert sol.converged


def test_klaus_ghz63_mono_infeasible():
    with pytest.raises(InfeasibleTarget):
        klaus(ghz(6, 3), KlausConfig(mode=MONO))


def test_klaus_ghz43():
    sol = klaus(ghz(4, 3), KlausConfig(seed=1))
    assert sol.fidelity >= 0.999
    assert abs(recompute_fidelity(sol.graph, ghz(4, 3)) - sol.fidelity) < 1e-9


def test_odd_target_rejected():
    with pytest.raises(ValueError):
        klaus(Ket(3, 2, {(0, 0, 0): 1}))


def test_sat_check_examples():
    enc = build_k(ghz(4, 2))
    clf = EdgeClassifier(enc, sat_mode=FIXED_TRUE)
    assert sat_check(clf, EdgeKey(0, 1, 0, 1)) is True
    assert clf.status[EdgeKey(0, 1, 0, 1)] == UNCLASSIFIED
    small = EdgeClassifier(enc, GHZ42_EXACT, sat_mode=FIXED_TRUE)
    assert sat_check(small, EdgeKey(0, 1, 0, 0)) is False
    assert sat_check(small, EdgeKey(0, 1, 0, 0), mode=FREE) is False


def test_n2_without_forbidden_colorings():
    full = Ket(2, 2, {(a, b): 1 for a in range(2) for b in range(2)})
    enc = build_k(full)
    assert enc.obstruction_part == TRUE
    clf = EdgeClassifier(enc, sat_mode=FREE)
    assert clf.feasible()
    assert sat_check(clf, EdgeKey(0, 1, 0, 0)) is False  # every edge carries one support coloring


def test_sat_check_rejects_classified():
    enc = build_k(ghz(4, 2))
    clf = EdgeClassifier(enc, sat_mode=FREE)
    e = EdgeKey(0, 1, 0, 1)
    clf.classify(e)
    with pytest.raises(ValueError):
        clf.sat_check(e)


def test_klaus_opt_examples():
    cfg = KlausConfig(seed=0)
    g = ColoredGraph(4, 2, {e: 1.0 for e in GHZ42_EXACT})
    sol = klaus_opt(g, ghz(4, 2), cfg)
    assert set(sol.graph.edges) == set(GHZ42_EXACT)
    complete = ColoredGraph.complete(4, 2)
    via_opt = klaus_opt(complete, ghz(4, 2), cfg)
    direct = klaus(ghz(4, 2), cfg)
    assert via_opt.trace == direct.trace
    with pytest.raises(ShapeError):
        klaus_opt(g, ghz(6, 2), cfg)


def test_klaus_opt_from_theseus_ghz62():
    target = ghz(6, 2)
    start = theseus(target, OptimizerConfig(seed=0))
    sol = klaus_opt(start.graph, target, KlausConfig(seed=0))
    assert sol.edge_count <= start.edge_count and sol.fidelity >= 0.999


def test_fixed_true_falls_back_when_start_violates_k():
    # a start graph with one stray edge completing a single matching of a forbidden coloring
    g = ColoredGraph(4, 2, GHZ42_EXACT + [EdgeKey(2, 3, 0, 1)])
    enc = build_k(ghz(4, 2), BI, list(g.edges))
    assert not enc.checker.satisfied(enc.checker.mask(g.edges))
    sol = klaus_opt(g, ghz(4, 2), KlausConfig(seed=0, sat_mode=FIXED_TRUE))
    assert sol.sat_mode == FREE and any("free mode" in n for n in sol.notes)
    assert set(sol.graph.edges) == set(GHZ42_EXACT)


def test_fixed_true_cannot_reach_four_edges_on_ghz42():
    # every forbidden coloring of four vertices has three edge-disjoint matchings in the complete
    # graph, so one-edge-at-a-time removal keeping K true can never empty one without passing count 1
    for seed in range(5):
        sol = klaus(ghz(4, 2), KlausConfig(seed=seed, sat_mode=FIXED_TRUE))
        assert sum(v == INDISPENSABLE for _, v in sol.trace) > 4


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        check_monochromatic_conjecture(8, 4, time_limit=1e-3)


# -- conjecture checker --------------------------------------------------------------

def test_conjecture_42_matches_exhaustive():
    enc = build_k(ghz(4, 2), MONO)
    edges = enc.variables.edges
    assert len(edges) == 12
    bits, ok = all_subsets_satisfying(enc, edges)
    res = check_monochromatic_conjecture(4, 2)
    assert res.satisfiable == bool(ok.any())
    assert enc.checker.satisfied(enc.checker.mask(res.witness.edges))
    assert fidelity(ghz(4, 2), graph_to_state(res.witness)) >= 0  # it generates a state
    smallest = min(int(b.sum()) for b, good in zip(bits, ok) if good)
    assert smallest == 4


@pytest.mark.parametrize("n,d", [(4, 2), (4, 3), (6, 2), (6, 3)])
def test_symmetry_split_agrees_with_plain_solve(n, d):
    split = check_monochromatic_conjecture(n, d, symmetry=True)
    plain = check_monochromatic_conjecture(n, d, symmetry=False)
    assert split.status == plain.status
    assert plain.cases == 1


def test_conjecture_63_unsat():
    res = check_monochromatic_conjecture(6, 3)
    assert res.status == "UNSAT" and res.witness is None


def test_symmetry_cases_cover_pairings():
    # level one always pins color 0 to the first pairing
    assert symmetry_cases(6, 1) == [(0,)]
    two = symmetry_cases(6, 2)
    assert all(c[0] == 0 for c in two) and len(set(two)) == len(two)
    assert 1 < len(two) < 15


# -- invariants ----------------------------------------------------------------------

def test_monotone_progress_and_final_k():
    target = get_target("GHZ_4_3").ket
    sol = klaus(target, KlausConfig(seed=3))
    edges = [e for e, _ in sol.trace]
    assert len(edges) == len(set(edges)) == len(edge_slots(4, 3))
    enc = build_k(target)
    survivors = [e for e, v in sol.trace if v == INDISPENSABLE]
    assert enc.checker.satisfied(enc.checker.mask(survivors))


@pytest.mark.parametrize("mode,seed", [(MONO, 0), (MONO, 1), (MONO, 2), (BI, 0), (BI, 1)])
def test_free_mode_unsat_is_safe(mode, seed):
    target = ghz(4, 2)
    enc = build_k(target, mode)
    rng = np.random.default_rng(seed)
    if mode == MONO:
        allowed = list(enc.variables.edges)
    else:
        # a 14-edge start containing an exact solution keeps the subset oracle at 2^14
        extra = [e for e in enc.variables.edges if e not in GHZ42_EXACT]
        allowed = sorted(GHZ42_EXACT + [extra[k] for k in rng.choice(len(extra), 10, replace=False)])
    clf = EdgeClassifier(enc, allowed, sat_mode=FREE)
    assert clf.feasible()
    bits, ok = all_subsets_satisfying(enc, allowed)
    index = {e: k for k, e in enumerate(allowed)}
    order = [allowed[k] for k in rng.permutation(len(allowed))]
    for cand in order:
        verdict = clf.sat_check(cand)
        # oracle: subsets avoiding disposable edges and the candidate, containing indispensable ones
        fit = ok.copy()
        for e, s in clf.status.items():
            if s == DISPOSABLE or e == cand:
                fit &= ~bits[:, index[e]]
            elif s == INDISPENSABLE:
                fit &= bits[:, index[e]]
        assert verdict == bool(fit.any())
        clf.classify(cand)


def test_classification_trace_deterministic():
    for name in ["GHZ_4_3", "SRV_544"]:
        target = get_target(name).ket
        a = klaus(target, KlausConfig(seed=11))
        b = klaus(target, KlausConfig(seed=11))
        assert a.trace == b.trace and a.graph == b.graph


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from([FREE, FIXED_TRUE]))
def test_survivors_always_satisfy_k(seed, sat_mode):
    target = ghz(4, 2)
    enc = build_k(target)
    rng = np.random.default_rng(seed)
    allowed = [e for e in enc.variables.edges if rng.random() < 0.6 or e in GHZ42_EXACT]
    clf = EdgeClassifier(enc, allowed, sat_mode=sat_mode)
    if not clf.feasible():
        clf.sat_mode = FREE
    for e in sorted(allowed, key=lambda e: rng.random()):
        clf.classify(e)
    assert enc.checker.satisfied(enc.checker.mask(clf.survivors()))
