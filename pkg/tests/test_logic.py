import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klauskit.errors import IncompleteAssignment, UnsatisfiableByConstruction
from klauskit.graph import BI, MONO, EdgeKey, double_factorial
from klauskit.logic import (FALSE, TRUE, And, EdgeVariables, Not, Or, Var, build_k,
                            build_obstruction_clauses, build_state_clauses, evaluate, matching_table,
                            pm_conjunction, to_dimacs, tseitin, variables_of, varmap_from_json, varmap_json)
from klauskit.sat import import_dimacs, solve, verify_model
from klauskit.state import Ket, get_target, ghz

rng_seed = 1234


def E(i, j, a, b):
    return EdgeKey(i, j, a, b)


def table_eval(f, cols):
    """Vectorized truth table: ``cols`` maps var id -> bool column."""
    if isinstance(f, Var):
        return cols[f.id]
    if isinstance(f, Not):
        return ~table_eval(f.arg, cols)
    size = len(next(iter(cols.values()))) if cols else 1
    if isinstance(f, And):
        out = np.ones(size, dtype=bool)
        for g in f.args:
            out &= table_eval(g, cols)
        return out
    out = np.zeros(size, dtype=bool)
    for g in f.args:
        out |= table_eval(g, cols)
    return out


def truth_table(f):
    vs = sorted(variables_of(f))
    rows = np.array(list(itertools.product([False, True], repeat=len(vs))), dtype=bool).reshape(-1, len(vs))
    cols = {v: rows[:, k] for k, v in enumerate(vs)}
    return vs, rows, table_eval(f, cols)


def propagate(clauses, fixed):
    """Plain unit propagation from a partial assignment; None on conflict."""
    val = dict(fixed)
    changed = True
    while changed:
        changed = False
        for cl in clauses:
            open_lits, sat = [], False
            for l in cl:
                v = val.get(abs(l))
                if v is None:
                    open_lits.append(l)
                elif v == (l > 0):
                    sat = True
                    break
            if sat:
                continue
            if not open_lits:
                return None
            if len(open_lits) == 1:
                l = open_lits[0]
                val[abs(l)] = l > 0
                changed = True
    return val


def extends(cnf, fixed):
    """Do the forced auxiliaries complete ``fixed`` into a CNF model?"""
    forced = propagate(cnf.clauses, fixed)
    if forced is None or any(abs(l) not in forced for c in cnf.clauses for l in c):
        return False
    return verify_model(cnf, {v: forced.get(v, False) for v in range(1, cnf.num_vars + 1)})


def direct_predicate(enc, present):
    """At least one present matching per support coloring, never exactly one elsewhere."""
    for c, pms in enc.table.items():
        alive = sum(all(e in present for e in pm) for pm in pms)
        if c in enc.support and alive == 0:
            return False
        if c not in enc.support and alive == 1:
            return False
    return all(c in enc.table for c in enc.support)


# -- examples ------------------------------------------------------------------------

def test_pm_conjunction():
    v = EdgeVariables(4, 1, BI)
    f = pm_conjunction([E(0, 1, 0, 0), E(2, 3, 0, 0)], v)
    assert isinstance(f, And) and len(f.args) == 2
    assert evaluate(f, {1: True, 6: False}) is False
    assert evaluate(f, {v.id(E(0, 1, 0, 0)): True, v.id(E(2, 3, 0, 0)): True})
    v2 = EdgeVariables(2, 1, BI)
    assert pm_conjunction([E(0, 1, 0, 0)], v2) == Var(1)


def test_state_clauses_examples():
    v = EdgeVariables(4, 2, BI)
    s = build_state_clauses([(0, 0, 0, 0)], 4, 2, BI, v)
    (part,) = s.args
    assert isinstance(part, Or) and len(part.args) == 3
    pairs = {tuple(sorted((v.edge(x.id).pair for x in pm.args))) for pm in part.args}
    assert pairs == {((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))}
    s2 = build_state_clauses([(0, 1)], 2, 2, BI)
    assert s2.args == (Var(EdgeVariables(2, 2).id(E(0, 1, 0, 1))),)
    s6 = build_state_clauses([(0, 1, 2, 0, 1, 2)], 6, 3, BI)
    assert len(s6.args[0].args) == 15


def test_unproducible_support():
    with pytest.raises(UnsatisfiableByConstruction):
        build_state_clauses([(0, 1, 0, 0)], 4, 2, MONO)


def test_obstruction_examples():
    v = EdgeVariables(6, 3, MONO)
    # (0,0,1,1,2,2) is reached by exactly one monochromatic matching
    table = matching_table(6, 3, MONO)
    assert len(table[(0, 0, 1, 1, 2, 2)]) == 1
    c = build_obstruction_clauses([(0, 0, 1, 1, 2, 2)], 6, 3, MONO, v, table)
    (part,) = c.args
    pm = table[(0, 0, 1, 1, 2, 2)][0]
    on = {v.id(e): True for e in pm}
    assert evaluate(part, {**{k: False for k in range(1, len(v) + 1)}, **on}) is False
    # three matchings -> three constraints
    c3 = build_obstruction_clauses([(0, 0, 1, 1)], 4, 2, BI)
    assert len(c3.args) == 3
    assert build_obstruction_clauses([], 4, 2, BI) == TRUE


def test_build_k_variable_counts():
    assert len(build_k(ghz(4, 2), BI).variables) == 24
    assert len(build_k(ghz(6, 3), MONO).variables) == 45


def test_n2_single_pair():
    enc = build_k(Ket(2, 2, {(0, 1): 1}), BI)
    ids = enc.variables
    for e in ids.edges:
        assert enc.evaluate_edges([e]) == (e == E(0, 1, 0, 1))
    assert not enc.evaluate_edges([E(0, 1, 0, 1), E(0, 1, 0, 0)])
    assert not enc.evaluate_edges([])


def test_evaluate_examples():
    enc = build_k(ghz(4, 2), BI)
    assert enc.evaluate_edges(enc.variables.edges)
    assert not enc.evaluate_edges([])
    assert evaluate(Var(3), {3: True})
    with pytest.raises(IncompleteAssignment):
        evaluate(Var(3), {})


def test_tseitin_gate_example():
    # p <-> (a and b) with a=1, b=2: asserting Or(not a, ...) pulls in the gate
    cnf = tseitin(Or((Not(And((Var(1), Var(2)))), Var(3))))
    gate = [c for c in cnf.clauses if len(c) != 2 or 3 not in c]
    p = cnf.num_vars
    assert set(map(frozenset, gate)) >= {frozenset({-p, 1}), frozenset({-p, 2}), frozenset({-1, -2, p})}


def test_constant_true_contributes_nothing():
    assert tseitin(TRUE).clauses == ()
    assert tseitin(And((Var(1), TRUE))).clauses == ((1,),)
    assert not solve(tseitin(FALSE)).satisfiable


def test_aux_count_formula():
    for target, mode in [(ghz(4, 2), BI), (ghz(4, 2), MONO), (ghz(4, 3), BI), (ghz(6, 2), MONO)]:
        enc = build_k(target, mode)
        encoded = sum(len(pms) for pms in enc.table.values())
        assert enc.cnf.num_aux == encoded
    enc = build_k(ghz(4, 2), BI)
    assert enc.cnf.num_aux == 2 ** 4 * double_factorial(3)


def test_dimacs_deterministic_and_round_trip():
    a = to_dimacs(build_k(ghz(4, 2)).cnf)
    b = to_dimacs(build_k(ghz(4, 2)).cnf)
    assert a == b
    cnf = build_k(ghz(4, 2)).cnf
    back = import_dimacs(to_dimacs(cnf, ["comment line"]))
    assert back.num_vars == cnf.num_vars and back.clauses == cnf.clauses


def test_varmap_round_trip():
    v = EdgeVariables(4, 2, BI)
    m = varmap_from_json(varmap_json(v))
    assert [m[k] for k in sorted(m)] == v.edges


def test_restricted_encoding_matches_fixed_absent_edges():
    enc = build_k(ghz(4, 2))
    allowed = [e for e in enc.variables.edges if e.alpha == e.beta or e.i == 0]
    sub = build_k(ghz(4, 2), BI, allowed)
    chk = enc.checker
    rng = np.random.default_rng(5)
    for _ in range(300):
        present = [e for e in allowed if rng.random() < 0.5]
        assert sub.checker.satisfied(sub.checker.mask(present)) == chk.satisfied(chk.mask(present))


# -- oracle equivalence --------------------------------------------------------------

@pytest.mark.parametrize("mode", [BI, MONO])
def test_checker_cnf_and_formula_agree_on_random_assignments(mode):
    enc = build_k(ghz(4, 2), mode)
    cnf = enc.cnf
    rng = np.random.default_rng(rng_seed)
    mismatches = 0
    for trial in range(1000):
        p = rng.choice([0.2, 0.5, 0.8])
        present = [e for e in enc.variables.edges if rng.random() < p]
        direct = direct_predicate(enc, set(present))
        fast = enc.checker.satisfied(enc.checker.mask(present))
        formula = enc.evaluate_edges(present)
        assign = enc.assignment(present)
        via_cnf = extends(cnf, assign)
        mismatches += len({direct, fast, formula, via_cnf}) != 1
    assert mismatches == 0


def subformulas(f):
    seen, stack = {}, [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen[g] = None
        if isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, (And, Or)):
            stack.extend(g.args)
    return list(seen)


def _k_subformula_pool():
    enc = build_k(ghz(4, 2))
    pool = [g for g in subformulas(enc.formula) if 0 < len(variables_of(g)) <= 16]
    rng = np.random.default_rng(7)
    combos = []
    while len(combos) < 150:
        k = int(rng.integers(2, 4))
        picks = [pool[i] for i in rng.choice(len(pool), size=k, replace=False)]
        picks = [Not(g) if rng.random() < 0.4 else g for g in picks]
        f = And(tuple(picks)) if rng.random() < 0.6 else Or(tuple(picks))
        if len(variables_of(f)) <= 16:
            combos.append(f)
    return pool + combos


POOL = _k_subformula_pool()


def test_truth_table_oracle_on_k_subformulas():
    mismatches = 0
    for f in POOL:
        vs, rows, table = truth_table(f)
        cnf = tseitin(f)
        out = solve(cnf)
        mismatches += out.satisfiable != bool(table.any())
        if out.satisfiable:
            assert verify_model(cnf, out.model)
            mismatches += not evaluate(f, out.model)
    assert mismatches == 0


def test_tseitin_biconditional_exhaustive_small():
    # every subformula with at most 8 edge variables: each edge assignment has
    # exactly one CNF extension when f holds (forced auxiliaries) and none otherwise
    checked = 0
    for f in POOL:
        vs, rows, table = truth_table(f)
        if len(vs) > 8:
            continue
        cnf = tseitin(f)
        for row, expected in zip(rows, table):
            assert extends(cnf, dict(zip(vs, map(bool, row)))) == bool(expected)
        checked += 1
    assert checked > 50


# -- properties ----------------------------------------------------------------------

formulas = st.recursive(
    st.integers(1, 6).map(Var),
    lambda kids: st.one_of(kids.map(Not), st.lists(kids, min_size=1, max_size=3).map(lambda a: And(tuple(a))),
                           st.lists(kids, min_size=1, max_size=3).map(lambda a: Or(tuple(a)))),
    max_leaves=10,
)


@given(formulas)
def test_tseitin_equisatisfiable(f):
    vs, rows, table = truth_table(f)
    cnf = tseitin(f)
    out = solve(cnf)
    assert out.satisfiable == bool(table.any())
    if out.satisfiable:
        assert evaluate(f, out.model)
    for row, expected in zip(rows, table):
        assert extends(cnf, dict(zip(vs, map(bool, row)))) == bool(expected)


@given(st.sampled_from(["GHZ_4_2", "GHZ_4_3", "SRV_544"]), st.sampled_from([BI, MONO]))
def test_edge_variable_count(name, mode):
    k = get_target(name).ket
    try:
        enc = build_k(k, mode)
    except UnsatisfiableByConstruction:
        return
    per = k.d * k.d if mode == BI else k.d
    assert len(enc.variables) == k.n * (k.n - 1) // 2 * per
