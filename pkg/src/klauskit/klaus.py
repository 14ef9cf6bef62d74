"""Greedy logic-driven edge elimination and the monochromatic GHZ checker.

Starting from a graph that satisfies the feasibility formula K, edges are
drawn in seeded random order and tentatively removed. If K still holds the
edge is disposable and stays removed, otherwise it is indispensable. The
surviving topology then gets its weights from the numeric optimizer.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, InfeasibleTarget, ShapeError, UnsatisfiableByConstruction
from .graph import BI, MONO, ColoredGraph, EdgeKey, enumerate_pairings, normalize_mode
from .logic import Encoding, build_k
from .optimizer import OptimizerConfig, _minimize
from .sat import Solver
from .solution import DISPOSABLE, INDISPENSABLE, DesignSolution, recompute_fidelity
from .state import Ket, ghz

FIXED_TRUE = "fixed-true"
FREE = "free"
UNCLASSIFIED = "unclassified"


@dataclass
class KlausConfig:
    seed: int | None = 0
    sat_mode: str = FREE
    mode: str = BI
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fidelity_goal: float = 0.999
    max_conflicts: int | None = None
    time_limit: float | None = None  # seconds, per SAT call

    def __post_init__(self):
        if self.sat_mode not in (FIXED_TRUE, FREE):
            raise ValueError(f"sat_mode must be {FIXED_TRUE!r} or {FREE!r}, got {self.sat_mode!r}")
        self.mode = normalize_mode(self.mode)


def _seeded_order(edges, seed) -> list[EdgeKey]:
    edges = sorted(edges)
    rng = np.random.default_rng(seed)
    return [edges[k] for k in rng.permutation(len(edges))]


class EdgeClassifier:
    """Status bookkeeping for one elimination run.

    ``allowed`` is the starting edge set; edges outside it are treated as
    absent throughout.
    """

    def __init__(self, enc: Encoding, allowed=None, sat_mode: str = FIXED_TRUE,
                 max_conflicts: int | None = None, time_limit: float | None = None):
        self.encoding = enc
        self.sat_mode = sat_mode
        self.allowed = frozenset(enc.variables.edges if allowed is None else allowed)
        self.status = {e: UNCLASSIFIED for e in sorted(self.allowed)}
        self._budget = (max_conflicts, time_limit)
        self._solver = None
        # last model found in free mode; it stays consistent with every later
        # verdict, so a candidate already absent from it needs no new call
        self._model = None
        self.sat_calls = 0

    @property
    def solver(self) -> Solver:
        if self._solver is None:
            mc, tl = self._budget
            self._solver = Solver(self.encoding.cnf, max_conflicts=mc, time_limit=tl, phase_saving=True)
        return self._solver

    def present(self) -> list[EdgeKey]:
        """Edges still in the graph under the fixed-true reading."""
        return [e for e, s in self.status.items() if s != DISPOSABLE]

    def assumptions(self, candidate: EdgeKey | None = None) -> list[int]:
        ids = self.encoding.variables.id
        lits = [-ids(e) for e in self.encoding.variables.edges if e not in self.allowed]
        for e, s in self.status.items():
            if s == DISPOSABLE or e == candidate:
                lits.append(-ids(e))
            elif s == INDISPENSABLE:
                lits.append(ids(e))
        return lits

    def feasible(self, candidate: EdgeKey | None = None) -> bool:
        """Does K hold with ``candidate`` (if any) removed?"""
        if self.sat_mode == FIXED_TRUE:
            chk = self.encoding.checker
            keep = [e for e in self.present() if e != candidate]
            return chk.satisfied(chk.mask(keep))
        if candidate is not None and self._model is not None:
            if not self._model[self.encoding.variables.id(candidate)]:
                return True
        self.sat_calls += 1
        out = self.solver.solve(self.assumptions(candidate))
        if out.satisfiable:
            self._model = out.model
        return out.satisfiable

    def sat_check(self, candidate: EdgeKey) -> bool:
        if self.status.get(candidate) != UNCLASSIFIED:
            raise ValueError(f"edge {candidate} is not an unclassified edge of this run")
        return self.feasible(candidate)

    def classify(self, candidate: EdgeKey) -> str:
        verdict = DISPOSABLE if self.sat_check(candidate) else INDISPENSABLE
        self.status[candidate] = verdict
        return verdict

    def survivors(self) -> list[EdgeKey]:
        return [e for e, s in self.status.items() if s == INDISPENSABLE]


def sat_check(classification: EdgeClassifier, candidate: EdgeKey, mode: str | None = None) -> bool:
    """Whether K stays satisfiable with ``candidate`` removed, without recording the verdict."""
    if mode is not None and mode != classification.sat_mode:
        saved = classification.sat_mode
        classification.sat_mode = mode
        try:
            return classification.sat_check(candidate)
        finally:
            classification.sat_mode = saved
    return classification.sat_check(candidate)


def _ms(seconds: float) -> float:
    return 1000.0 * seconds


def _eliminate(enc: Encoding, allowed, cfg: KlausConfig, notes: list) -> tuple[EdgeClassifier, list]:
    clf = EdgeClassifier(enc, allowed, cfg.sat_mode, cfg.max_conflicts, cfg.time_limit)
    if not clf.feasible():
        if cfg.sat_mode == FIXED_TRUE:
            clf.sat_mode = FREE
            if not clf.feasible():
                raise InfeasibleTarget("K is unsatisfiable on the starting edge set")
            notes.append("starting graph violates K; classified in free mode")
        else:
            raise InfeasibleTarget("K is unsatisfiable on the starting edge set")
    trace = []
    for e in _seeded_order(clf.allowed, cfg.seed):
        trace.append((e, clf.classify(e)))
    return clf, trace


def _design(target: Ket, allowed, cfg: KlausConfig, algorithm: str, target_name: str,
            enc: Encoding | None = None) -> DesignSolution:
    t0 = time.perf_counter()
    notes = []
    if enc is None:
        try:
            enc = build_k(target, cfg.mode, allowed)
        except UnsatisfiableByConstruction as exc:
            raise InfeasibleTarget(str(exc)) from None
    if cfg.sat_mode == FIXED_TRUE:
        enc.checker
    else:
        enc.cnf
    t1 = time.perf_counter()
    clf, trace = _eliminate(enc, allowed, cfg, notes)
    survivors = clf.survivors()
    if not enc.checker.satisfied(enc.checker.mask(survivors)):
        raise AssertionError("surviving edge set violates K")
    t2 = time.perf_counter()
    res = _minimize(survivors, target, cfg.optimizer)
    graph = res.weights.to_graph(target.n, target.d, cfg.mode)
    # weights the optimizer drove to (numerical) zero mean absent edges
    w = np.abs(res.weights.complex())
    live = [e for e, m in zip(res.weights.edges, w) if m >= cfg.optimizer.tau_floor * w.max()]
    converged = True
    if len(live) < len(survivors):
        graph = graph.subgraph(live)
        notes.append(f"optimizer switched off {len(survivors) - len(live)} edges")
        if not enc.checker.satisfied(enc.checker.mask(live)):
            # an approximate solution outside what K allows
            notes.append("effective topology violates K")
            converged = False
    t3 = time.perf_counter()
    fid = recompute_fidelity(graph, target)
    elapsed = {"encode_ms": _ms(t1 - t0), "sat_ms": _ms(t2 - t1), "opt_ms": _ms(t3 - t2),
               "total_ms": _ms(t3 - t0)}
    return DesignSolution(graph, fid, algorithm, converged and fid >= cfg.fidelity_goal, cfg.seed,
                          clf.sat_mode, target_name, elapsed, trace, notes)


def klaus(target: Ket, cfg: KlausConfig | None = None, target_name: str = "") -> DesignSolution:
    """Eliminate edges from the complete graph, then optimize the survivors' weights.

    Raises InfeasibleTarget when K is unsatisfiable. A final fidelity below
    ``cfg.fidelity_goal`` is reported through ``converged=False``.
    """
    cfg = cfg or KlausConfig()
    if target.n % 2:
        raise ValueError(f"target has {target.n} parties; graphs need an even vertex count")
    return _design(target, None, cfg, "klaus", target_name)


def klaus_opt(start: ColoredGraph, target: Ket, cfg: KlausConfig | None = None,
              target_name: str = "") -> DesignSolution:
    """Logic-only pruning of an existing topology followed by one weight optimization.

    If ``start`` itself violates K, the pruning runs in free mode so that it
    ends on a K-satisfying subgraph of ``start``.
    """
    cfg = cfg or KlausConfig()
    if cfg.mode != start.mode:
        cfg = KlausConfig(cfg.seed, cfg.sat_mode, start.mode, cfg.optimizer, cfg.fidelity_goal,
                          cfg.max_conflicts, cfg.time_limit)
    if start.n != target.n or start.d > target.d:
        raise ShapeError(f"starting graph ({start.n} vertices, d={start.d}) does not fit a "
                         f"{target.n}-party target with d={target.d}")
    if len(start) == 0:
        raise InfeasibleTarget("empty starting graph")
    return _design(target, list(start.edges), cfg, "klausopt", target_name)


# -- monochromatic GHZ conjecture ----------------------------------------------------

SATISFIABLE = "SAT"
UNSATISFIABLE = "UNSAT"


@dataclass
class ConjectureResult:
    n: int
    d: int
    status: str
    witness: ColoredGraph | None = None
    cases: int = 0
    elapsed: float = 0.0
    conflicts: int = 0
    symmetry_levels: int = 0

    @property
    def satisfiable(self) -> bool:
        return self.status == SATISFIABLE


def _apply(perm, pairing) -> frozenset:
    return frozenset(frozenset((perm[a], perm[b])) for a, b in pairing)


def _pairing_stabilizer(pairing) -> list[tuple[int, ...]]:
    """All vertex permutations mapping ``pairing`` to itself (pair shuffles and flips)."""
    pairs = [tuple(p) for p in pairing]
    n = 2 * len(pairs)
    group = []
    for order in itertools.permutations(range(len(pairs))):
        for flips in itertools.product((0, 1), repeat=len(pairs)):
            perm = [0] * n
            for src, dst, flip in zip(pairs, (pairs[k] for k in order), flips):
                a, b = (dst[1], dst[0]) if flip else dst
                perm[src[0]], perm[src[1]] = a, b
            group.append(tuple(perm))
    return group


def _orbit_representatives(group, pairings) -> list[int]:
    index = {frozenset(frozenset(p) for p in pr): k for k, pr in enumerate(pairings)}
    seen, reps = set(), []
    for k, pr in enumerate(pairings):
        if k in seen:
            continue
        reps.append(k)
        seen.update(index[_apply(g, pr)] for g in group)
    return reps


def symmetry_cases(n: int, levels: int) -> list[tuple[int, ...]]:
    """Pairing indices to pin for colors 0..levels-1, one tuple per case.

    K for monochromatic GHZ is invariant under relabeling vertices, and every
    color must own at least one present matching. So the matching of color 0
    can be taken to be pairing 0, and each further color's matching can be
    taken up to the symmetries that fix the ones already chosen. These cases
    together cover every satisfying assignment up to symmetry.
    """
    pairings = enumerate_pairings(n)
    if levels <= 0:
        return [()]
    sets = [frozenset(frozenset(p) for p in pr) for pr in pairings]
    cases = []

    def grow(prefix, group):
        if len(prefix) == levels:
            cases.append(tuple(prefix))
            return
        for k in _orbit_representatives(group, pairings):
            grow(prefix + [k], [g for g in group if _apply(g, pairings[k]) == sets[k]])

    grow([0], _pairing_stabilizer(pairings[0]))
    return cases


def check_monochromatic_conjecture(n: int, d: int, *, symmetry: int | bool = True,
                                   max_conflicts: int | None = None, time_limit: float | None = None,
                                   encoding: Encoding | None = None) -> ConjectureResult:
    """Decide whether a monochromatic graph can satisfy K for GHZ(n, d).

    ``symmetry`` selects how many colors get their matching pinned by the
    case split (True means up to 3, False or 0 a single plain solve).
    ``time_limit`` is in seconds for the whole check; hitting it or the
    conflict budget raises BudgetExceeded.
    """
    if n % 2 or n < 2:
        raise ValueError(f"need an even n >= 2, got {n}")
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    t0 = time.perf_counter()
    enc = encoding or build_k(ghz(n, d), MONO)
    levels = min(3 if symmetry is True else int(symmetry), d)
    if n > 10:
        levels = 0  # stabilizer enumeration grows too fast beyond this
    pairings = enumerate_pairings(n)
    solver = Solver(enc.cnf, max_conflicts=max_conflicts)
    result = ConjectureResult(n, d, UNSATISFIABLE, symmetry_levels=levels)

    def pinned(case):
        lits = []
        for color, k in enumerate(case):
            lits.extend(enc.variables.id(EdgeKey(i, j, color, color)) for i, j in pairings[k])
        return lits

    for case in symmetry_cases(n, levels):
        if time_limit is not None:
            remaining = time_limit - (time.perf_counter() - t0)
            if remaining <= 0:
                raise BudgetExceeded(f"time budget of {time_limit:.3g} s exhausted")
            solver.time_limit = remaining
        out = solver.solve(pinned(case))
        result.cases += 1
        result.conflicts += out.stats.conflicts
        if out.satisfiable:
            edges = enc.cnf.decode_edges(out.model)
            if not enc.checker.satisfied(enc.checker.mask(edges)):
                raise AssertionError("solver model does not satisfy K")
            result.status = SATISFIABLE
            result.witness = ColoredGraph(n, d, edges, MONO)
            break
    result.elapsed = time.perf_counter() - t0
    return result
