"""Boolean feasibility formula for a target state and its CNF form.

Each edge slot is a Boolean variable (present / absent). For a target state,
every basis coloring in its support needs at least one fully present perfect
matching, and no coloring outside the support may be left with exactly one
present matching, because a lone matching has nothing to cancel against.
Amplitudes and signs are ignored; only the support matters.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import IncompleteAssignment, ParseError, UnsatisfiableByConstruction
from .graph import BI, MONO, EdgeKey, edge_slots, enumerate_pairings, normalize_mode
from .state import Ket


# -- formula trees -------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    id: int

    def __post_init__(self):
        if self.id < 1:
            raise ValueError("variable ids start at 1")


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple = ()


@dataclass(frozen=True)
class Or:
    args: tuple = ()


Formula = Union[Var, Not, And, Or]
TRUE = And(())
FALSE = Or(())


def conj(args: Iterable[Formula]) -> Formula:
    args = tuple(args)
    return args[0] if len(args) == 1 else And(args)


def disj(args: Iterable[Formula]) -> Formula:
    args = tuple(args)
    return args[0] if len(args) == 1 else Or(args)


def evaluate(f: Formula, assignment: Mapping[int, bool]) -> bool:
    """Truth value of ``f``; every variable it mentions must be assigned."""
    if isinstance(f, Var):
        try:
            return bool(assignment[f.id])
        except KeyError:
            raise IncompleteAssignment(f.id) from None
    if isinstance(f, Not):
        return not evaluate(f.arg, assignment)
    if isinstance(f, And):
        return all(evaluate(g, assignment) for g in f.args)
    if isinstance(f, Or):
        return any(evaluate(g, assignment) for g in f.args)
    raise TypeError(f"not a formula node: {f!r}")


def variables_of(f: Formula) -> set[int]:
    out: set[int] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Var):
            out.add(g.id)
        elif isinstance(g, Not):
            stack.append(g.arg)
        else:
            stack.extend(g.args)
    return out


# -- edge variables and matchings ----------------------------------------------------

class EdgeVariables:
    """Bijection between edge slots and variable ids ``1..V`` in canonical edge order."""

    def __init__(self, n: int, d: int, mode: str = BI):
        self.n, self.d, self.mode = n, d, normalize_mode(mode)
        self.edges: list[EdgeKey] = edge_slots(n, d, self.mode)
        self._ids = {e: k + 1 for k, e in enumerate(self.edges)}

    def __len__(self):
        return len(self.edges)

    def id(self, edge: EdgeKey) -> int:
        return self._ids[edge]

    def edge(self, var_id: int) -> EdgeKey:
        return self.edges[var_id - 1]

    def __contains__(self, edge):
        return edge in self._ids

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "mode": self.mode,
            "edge_vars": [
                {"id": k + 1, "i": e.i, "j": e.j, "a": e.alpha, "b": e.beta}
                for k, e in enumerate(self.edges)
            ],
        }


def matching_table(n: int, d: int, mode: str = BI) -> dict[tuple[int, ...], list[tuple[EdgeKey, ...]]]:
    """Map every coloring that some structural matching can deliver to its matchings.

    Colorings are sorted lexicographically, matchings follow pairing order.
    Colorings that no matching can produce (only possible with monochromatic
    edges) are absent.
    """
    mode = normalize_mode(mode)
    pairings = enumerate_pairings(n)
    pair_colors = [(a, a) for a in range(d)] if mode == MONO else list(itertools.product(range(d), repeat=2))
    table: dict[tuple[int, ...], list[tuple[int, tuple[EdgeKey, ...]]]] = {}
    for p_idx, pairing in enumerate(pairings):
        for choice in itertools.product(pair_colors, repeat=len(pairing)):
            c = [0] * n
            keys = []
            for (i, j), (a, b) in zip(pairing, choice):
                c[i], c[j] = a, b
                keys.append(EdgeKey(i, j, a, b))
            table.setdefault(tuple(c), []).append((p_idx, tuple(keys)))
    return {c: [pm for _, pm in sorted(table[c])] for c in sorted(table)}


def restrict_table(table: Mapping, allowed: Iterable[EdgeKey]) -> dict:
    """Drop every matching that uses an edge outside ``allowed`` (and emptied colorings)."""
    allowed = frozenset(allowed)
    out = {}
    for c, pms in table.items():
        kept = [pm for pm in pms if all(e in allowed for e in pm)]
        if kept:
            out[c] = kept
    return out


def compatible_matchings(c: Sequence[int], mode: str = BI) -> list[tuple[EdgeKey, ...]]:
    """Structural matchings of the complete graph delivering coloring ``c``."""
    mode = normalize_mode(mode)
    c = tuple(c)
    out = []
    for pairing in enumerate_pairings(len(c)):
        if mode == MONO and any(c[i] != c[j] for i, j in pairing):
            continue
        out.append(tuple(EdgeKey(i, j, c[i], c[j]) for i, j in pairing))
    return out


def forbidden_colorings(support: Iterable[Sequence[int]], n: int, d: int) -> Iterator[tuple[int, ...]]:
    """Lexicographic stream of all colorings outside ``support``."""
    support = {tuple(c) for c in support}
    for c in itertools.product(range(d), repeat=n):
        if c not in support:
            yield c


# -- clause builders -----------------------------------------------------------------

def pm_conjunction(pm: Sequence[EdgeKey], variables: EdgeVariables) -> Formula:
    """Conjunction of the edge variables of one perfect matching."""
    return conj(Var(variables.id(e)) for e in pm)


def _matchings(c, mode, table):
    if table is not None:
        return table.get(tuple(c), [])
    return compatible_matchings(c, mode)


def build_state_clauses(support: Iterable[Sequence[int]], n: int, d: int, mode: str = BI,
                        variables: EdgeVariables | None = None, table=None) -> Formula:
    """At least one fully present matching for every coloring in ``support``."""
    variables = variables or EdgeVariables(n, d, mode)
    parts = []
    for c in sorted(tuple(c) for c in support):
        pms = _matchings(c, mode, table)
        if not pms:
            raise UnsatisfiableByConstruction(c)
        parts.append(disj(pm_conjunction(pm, variables) for pm in pms))
    return And(tuple(parts))


def build_obstruction_clauses(forbidden: Iterable[Sequence[int]], n: int, d: int, mode: str = BI,
                              variables: EdgeVariables | None = None, table=None) -> Formula:
    """No forbidden coloring may keep exactly one present matching.

    For each forbidden coloring and each of its matchings ``k`` this emits
    ``not (b_k and all other matchings absent)``.
    """
    variables = variables or EdgeVariables(n, d, mode)
    parts = []
    for c in forbidden:
        pms = _matchings(c, mode, table)
        if not pms:
            continue
        bs = [pm_conjunction(pm, variables) for pm in pms]
        for k, bk in enumerate(bs):
            others = [Not(b) for p, b in enumerate(bs) if p != k]
            # kept as an explicit conjunction even when others is empty, so b_k
            # still gets its own auxiliary variable
            parts.append(Not(And(tuple([bk] + others))))
    return And(tuple(parts))


@dataclass
class Encoding:
    """Feasibility formula K = S and C for one target and edge mode."""

    n: int
    d: int
    mode: str
    support: frozenset
    variables: EdgeVariables
    table: dict
    formula: Formula
    state_part: Formula
    obstruction_part: Formula

    @cached_property
    def cnf(self) -> "CnfFormula":
        return tseitin(self.formula, num_vars=len(self.variables), edge_vars=self.variables)

    @cached_property
    def checker(self) -> "FeasibilityChecker":
        return FeasibilityChecker(self)

    def assignment(self, present: Iterable[EdgeKey]) -> dict[int, bool]:
        present = set(present)
        return {k + 1: e in present for k, e in enumerate(self.variables.edges)}

    def evaluate_edges(self, present: Iterable[EdgeKey]) -> bool:
        return evaluate(self.formula, self.assignment(present))


def build_k(target: Ket, mode: str = BI, allowed: Iterable[EdgeKey] | None = None) -> Encoding:
    """Encode the feasibility of ``target`` under the given edge mode.

    With ``allowed``, every other edge is taken to be absent and the matchings
    through it are left out of the formula; variable numbering is unchanged.
    Raises UnsatisfiableByConstruction when a support coloring cannot be
    produced by any (allowed) matching at all.
    """
    mode = normalize_mode(mode)
    n, d = target.n, target.d
    if n % 2:
        from .errors import NoPerfectMatching
        raise NoPerfectMatching(f"target has {n} parties; graphs need an even vertex count")
    variables = EdgeVariables(n, d, mode)
    table = matching_table(n, d, mode)
    if allowed is not None:
        table = restrict_table(table, allowed)
    support = target.support
    s = build_state_clauses(support, n, d, mode, variables, table)
    c = build_obstruction_clauses((col for col in table if col not in support), n, d, mode, variables, table)
    return Encoding(n, d, mode, support, variables, table, And((s, c)), s, c)


# -- Tseitin transformation ----------------------------------------------------------

@dataclass(frozen=True)
class CnfFormula:
    """Clause list over variables ``1..num_vars``; literals are signed ids."""

    num_vars: int
    clauses: tuple
    edge_vars: EdgeVariables | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for clause in self.clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"literal {lit} out of range 1..{self.num_vars}")

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @property
    def num_aux(self) -> int:
        return self.num_vars - (len(self.edge_vars) if self.edge_vars is not None else 0)

    def decode_edges(self, model: Mapping[int, bool]) -> list[EdgeKey]:
        if self.edge_vars is None:
            raise ValueError("CNF carries no edge-variable map")
        return [e for k, e in enumerate(self.edge_vars.edges) if model.get(k + 1)]

    def with_units(self, literals: Iterable[int]) -> "CnfFormula":
        return CnfFormula(self.num_vars, self.clauses + tuple((l,) for l in literals), self.edge_vars)


class _Tseitin:
    def __init__(self, next_var: int):
        self.next_var = next_var
        self.clauses: list[tuple[int, ...]] = []
        self.gates: dict[Formula, int] = {}
        self.true_var: int | None = None

    def fresh(self) -> int:
        v = self.next_var
        self.next_var += 1
        return v

    def emit(self, lits: Iterable[int]) -> None:
        seen: dict[int, None] = {}
        for l in lits:
            if -l in seen:
                return  # tautology
            seen[l] = None
        self.clauses.append(tuple(seen))

    def lit(self, f: Formula) -> int:
        if isinstance(f, Var):
            return f.id
        if isinstance(f, Not):
            return -self.lit(f.arg)
        if f == TRUE or f == FALSE:
            if self.true_var is None:
                self.true_var = self.fresh()
                self.emit([self.true_var])
            return self.true_var if f == TRUE else -self.true_var
        if len(f.args) == 1:
            return self.lit(f.args[0])
        known = self.gates.get(f)
        if known is not None:
            return known
        children = [self.lit(g) for g in f.args]
        p = self.fresh()
        self.gates[f] = p
        if isinstance(f, And):
            for x in children:
                self.emit([-p, x])
            self.emit([p] + [-x for x in children])
        else:
            self.emit([-p] + children)
            for x in children:
                self.emit([p, -x])
        return p

    def assert_true(self, f: Formula) -> None:
        if isinstance(f, And):
            for g in f.args:
                self.assert_true(g)
        elif isinstance(f, Or):
            self.emit(self._flatten_or(f))
        elif isinstance(f, Var):
            self.emit([f.id])
        elif isinstance(f, Not):
            g = f.arg
            if isinstance(g, Not):
                self.assert_true(g.arg)
            elif isinstance(g, Or):
                for h in g.args:
                    self.assert_true(Not(h))
            elif isinstance(g, And):
                self.emit([-self.lit(h) for h in g.args])
            else:
                self.emit([-g.id])
        else:
            raise TypeError(f"not a formula node: {f!r}")

    def _flatten_or(self, f: Or) -> list[int]:
        lits = []
        for g in f.args:
            if isinstance(g, Or):
                lits.extend(self._flatten_or(g))
            else:
                lits.append(self.lit(g))
        return lits


def tseitin(f: Formula, num_vars: int | None = None, edge_vars: EdgeVariables | None = None) -> CnfFormula:
    """Equisatisfiable CNF of ``f``.

    Every conjunction or disjunction nested below the top level gets one
    auxiliary variable tied to it by a full biconditional; structurally equal
    subformulas share their variable. Top-level conjunctions are split and
    top-level disjunctions become single clauses.
    """
    base = max(variables_of(f), default=0)
    if num_vars is not None:
        base = max(base, num_vars)
    t = _Tseitin(base + 1)
    t.assert_true(f)
    return CnfFormula(t.next_var - 1, tuple(t.clauses), edge_vars)


# -- fast evaluation for full assignments --------------------------------------------

class FeasibilityChecker:
    """Vectorized evaluation of K for complete edge assignments.

    Equivalent to ``evaluate(encoding.formula, ...)`` but works on a boolean
    presence mask over ``encoding.variables.edges``.
    """

    def __init__(self, enc: Encoding):
        self.encoding = enc
        rows, owner, colorings, is_support = [], [], [], []
        for ci, (c, pms) in enumerate(enc.table.items()):
            colorings.append(c)
            is_support.append(c in enc.support)
            for pm in pms:
                rows.append([enc.variables.id(e) - 1 for e in pm])
                owner.append(ci)
        self.colorings = colorings
        self.term_edges = np.array(rows, dtype=np.int64).reshape(len(rows), enc.n // 2)
        self.term_owner = np.array(owner, dtype=np.int64)
        self.is_support = np.array(is_support, dtype=bool)
        # support colorings unknown to the table cannot be produced at all
        self.impossible = any(c not in enc.table for c in enc.support)

    def counts(self, present: np.ndarray) -> np.ndarray:
        """Number of fully present matchings per table coloring."""
        alive = present[self.term_edges].all(axis=1)
        return np.bincount(self.term_owner, weights=alive, minlength=len(self.colorings)).astype(np.int64)

    def satisfied(self, present: np.ndarray) -> bool:
        if self.impossible:
            return False
        counts = self.counts(np.asarray(present, dtype=bool))
        if np.any(counts[self.is_support] == 0):
            return False
        return not np.any(counts[~self.is_support] == 1)

    def mask(self, edges: Iterable[EdgeKey]) -> np.ndarray:
        m = np.zeros(len(self.encoding.variables), dtype=bool)
        for e in edges:
            m[self.encoding.variables.id(e) - 1] = True
        return m


# -- DIMACS output -------------------------------------------------------------------

def to_dimacs(cnf: CnfFormula, comments: Sequence[str] = ()) -> str:
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}")
    lines.extend(" ".join(map(str, clause)) + " 0" for clause in cnf.clauses)
    return "\n".join(lines) + "\n"


def varmap_json(variables: EdgeVariables) -> str:
    return json.dumps(variables.to_dict(), indent=2)


def varmap_from_json(text: str) -> dict[int, EdgeKey]:
    try:
        data = json.loads(text)
        return {int(v["id"]): EdgeKey(int(v["i"]), int(v["j"]), int(v["a"]), int(v["b"]))
                for v in data["edge_vars"]}
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad variable map: {exc}") from None
