"""Embedded SAT solving and DIMACS interop.

Two engines share one propagation core (binary implication lists plus two
watched literals for longer clauses):

* ``cdcl`` (default): first-UIP clause learning with minimization, VSIDS
  branching, Luby restarts and LBD-based clause-database reduction.
* ``dpll``: chronological backtracking with unit propagation, no learning.

Branching always tries the negative polarity first, so models lean towards
few true variables (sparse graphs, in our use).

Internally a literal for variable ``v`` is ``2*v`` (positive) or ``2*v + 1``
(negative); the public API speaks DIMACS-style signed integers.
"""

from __future__ import annotations

import heapq
import random
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BudgetExceeded, InvalidAssumptions, ParseError
from .logic import CnfFormula

SAT = "SAT"
UNSAT = "UNSAT"


@dataclass(frozen=True)
class Assumption:
    var: int
    polarity: bool

    @property
    def literal(self) -> int:
        return self.var if self.polarity else -self.var


@dataclass
class SatStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    restarts: int = 0
    learned: int = 0
    elapsed: float = 0.0


@dataclass
class SatOutcome:
    status: str
    model: dict[int, bool] | None = None
    stats: SatStats = field(default_factory=SatStats)

    @property
    def satisfiable(self) -> bool:
        return self.status == SAT

    def __bool__(self):
        return self.satisfiable


def _luby(x: int) -> int:
    """x-th element (0-based) of the Luby sequence 1 1 2 1 1 2 4 1 1 2 ..."""
    size, seq = 1, 0
    while size < x + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != x:
        size = (size - 1) >> 1
        seq -= 1
        x %= size
    return 1 << seq


def _internal(lit: int) -> int:
    return 2 * lit if lit > 0 else -2 * lit + 1


def _external(lit: int) -> int:
    return -(lit >> 1) if lit & 1 else lit >> 1


class Solver:
    """Reusable solver over one clause set; learned clauses persist between calls."""

    def __init__(self, cnf: CnfFormula | Sequence[Sequence[int]], num_vars: int | None = None, *,
                 engine: str = "cdcl", seed: int | None = None, max_conflicts: int | None = None,
                 time_limit: float | None = None, restart_base: int = 100, var_decay: float = 0.95,
                 phase_saving: bool = False):
        if isinstance(cnf, CnfFormula):
            clauses, nv = cnf.clauses, cnf.num_vars
        else:
            clauses = cnf
            nv = max((abs(l) for c in clauses for l in c), default=0)
        if num_vars is not None:
            nv = max(nv, num_vars)
        if engine not in ("cdcl", "dpll"):
            raise ValueError(f"unknown engine {engine!r}")
        self.engine = engine
        self.num_vars = nv
        self.max_conflicts = max_conflicts
        self.time_limit = time_limit
        self.restart_base = restart_base
        self.var_decay = var_decay
        self.phase_saving = phase_saving

        size = 2 * nv + 2
        self.val = [0] * size
        self.level = [0] * (nv + 1)
        self.reason: list = [None] * (nv + 1)
        self.activity = [0.0] * (nv + 1)
        self.phase = [1] * (nv + 1)  # 1 -> try negative literal
        self.seen = [False] * (nv + 1)
        self.watches: list[list] = [[] for _ in range(size)]
        self.bins: list[list[int]] = [[] for _ in range(size)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.learnts: list[list[int]] = []
        self.lbd: dict[int, int] = {}
        self.var_inc = 1.0
        self.ok = True
        self.stats = SatStats()
        self.num_clauses = 0

        if seed is not None:
            rng = random.Random(seed)
            for v in range(1, nv + 1):
                self.activity[v] = rng.random() * 1e-5
        self._rebuild_heap()

        for clause in clauses:
            self._add_input_clause(clause)
        if self.ok and self._propagate() is not None:
            self.ok = False
        self.max_learnts = max(2000, self.num_clauses // 3)

    # -- clause database -------------------------------------------------------------

    def _add_input_clause(self, clause: Iterable[int]) -> None:
        if not self.ok:
            return
        lits: list[int] = []
        for x in clause:
            if x == 0 or abs(x) > self.num_vars:
                raise ValueError(f"literal {x} out of range 1..{self.num_vars}")
            l = _internal(x)
            if l ^ 1 in lits:
                return  # tautology
            if l not in lits:
                lits.append(l)
        # drop literals already false at level 0, skip clauses already true
        if any(self.val[l] == 1 for l in lits):
            return
        lits = [l for l in lits if self.val[l] == 0]
        self.num_clauses += 1
        if not lits:
            self.ok = False
        elif len(lits) == 1:
            self._assign(lits[0], None)
        elif len(lits) == 2:
            a, b = lits
            self.bins[a].append(b)
            self.bins[b].append(a)
        else:
            self.watches[lits[0]].append(lits)
            self.watches[lits[1]].append(lits)

    def _rebuild_heap(self) -> None:
        act = self.activity
        self.heap = [(-act[v], v) for v in range(1, self.num_vars + 1) if self.val[2 * v] == 0]
        heapq.heapify(self.heap)

    # -- assignment / propagation ----------------------------------------------------

    def _assign(self, lit: int, reason) -> None:
        self.val[lit] = 1
        self.val[lit ^ 1] = -1
        v = lit >> 1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self):
        """Unit propagation from ``qhead``; returns a conflicting clause or None."""
        val, trail, watches, bins = self.val, self.trail, self.watches, self.bins
        level, reason = self.level, self.reason
        dl = len(self.trail_lim)
        start = len(trail)
        conflict = None
        qhead = self.qhead
        while qhead < len(trail):
            p = trail[qhead]
            qhead += 1
            fl = p ^ 1
            for x in bins[fl]:
                vx = val[x]
                if vx == 1:
                    continue
                if vx == -1:
                    conflict = (x, fl)
                    break
                val[x] = 1
                val[x ^ 1] = -1
                level[x >> 1] = dl
                reason[x >> 1] = (x, fl)
                trail.append(x)
            if conflict is not None:
                break
            ws = watches[fl]
            i = j = 0
            n = len(ws)
            while i < n:
                c = ws[i]
                i += 1
                if c[0] == fl:
                    c[0] = c[1]
                    c[1] = fl
                first = c[0]
                if val[first] == 1:
                    ws[j] = c
                    j += 1
                    continue
                for k in range(2, len(c)):
                    l = c[k]
                    if val[l] != -1:
                        c[1] = l
                        c[k] = fl
                        watches[l].append(c)
                        break
                else:
                    ws[j] = c
                    j += 1
                    if val[first] == -1:
                        conflict = c
                        while i < n:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        break
                    val[first] = 1
                    val[first ^ 1] = -1
                    level[first >> 1] = dl
                    reason[first >> 1] = c
                    trail.append(first)
            del ws[j:]
            if conflict is not None:
                break
        self.qhead = len(trail) if conflict is None else qhead
        self.stats.propagations += len(trail) - start
        return conflict

    def _backtrack(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        val, act, heap, phase = self.val, self.activity, self.heap, self.phase
        stop = self.trail_lim[lvl]
        trail = self.trail
        save = self.phase_saving
        for k in range(len(trail) - 1, stop - 1, -1):
            lit = trail[k]
            v = lit >> 1
            val[lit] = 0
            val[lit ^ 1] = 0
            self.reason[v] = None
            if save:
                phase[v] = lit & 1
            heapq.heappush(heap, (-act[v], v))
        del trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(trail)
        if len(heap) > 4 * self.num_vars + 64:
            self._rebuild_heap()

    # -- conflict analysis -----------------------------------------------------------

    def _bump(self, v: int) -> None:
        a = self.activity[v] + self.var_inc
        self.activity[v] = a
        if a > 1e100:
            for u in range(1, self.num_vars + 1):
                self.activity[u] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()

    def _analyze(self, conflict) -> tuple[list[int], int]:
        seen, level, reason, trail = self.seen, self.level, self.reason, self.trail
        dl = len(self.trail_lim)
        learnt = [0]
        counter = 0
        p = -1
        idx = len(trail) - 1
        clause = conflict
        to_clear = []
        while True:
            for q in (clause if p < 0 else clause[1:]):
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    to_clear.append(v)
                    self._bump(v)
                    if level[v] >= dl:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            p = trail[idx]
            idx -= 1
            clause = reason[p >> 1]
            counter -= 1
            if counter == 0:
                break
            seen[p >> 1] = False
        learnt[0] = p ^ 1

        # local minimization: drop literals implied by the rest of the clause
        if len(learnt) > 2:
            kept = [learnt[0]]
            for q in learnt[1:]:
                r = reason[q >> 1]
                if r is None or any(not seen[x >> 1] and level[x >> 1] > 0 for x in r[1:]):
                    kept.append(q)
            learnt = kept
        for v in to_clear:
            seen[v] = False

        if len(learnt) == 1:
            return learnt, 0
        best = 1
        for k in range(2, len(learnt)):
            if level[learnt[k] >> 1] > level[learnt[best] >> 1]:
                best = k
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, level[learnt[1] >> 1]

    def _record(self, learnt: list[int]) -> None:
        self.stats.learned += 1
        if len(learnt) == 1:
            self._assign(learnt[0], None)
        elif len(learnt) == 2:
            a, b = learnt
            self.bins[a].append(b)
            self.bins[b].append(a)
            self._assign(a, (a, b))
        else:
            self.watches[learnt[0]].append(learnt)
            self.watches[learnt[1]].append(learnt)
            self.learnts.append(learnt)
            self.lbd[id(learnt)] = len({self.level[l >> 1] for l in learnt})
            self._assign(learnt[0], learnt)

    def _reduce_db(self) -> None:
        reason, val = self.reason, self.val

        def locked(c):
            return val[c[0]] == 1 and reason[c[0] >> 1] is c

        ranked = sorted(self.learnts, key=lambda c: (self.lbd[id(c)], len(c)))
        keep_count = len(ranked) // 2
        keep, drop = [], set()
        for k, c in enumerate(ranked):
            if k < keep_count or self.lbd[id(c)] <= 2 or locked(c):
                keep.append(c)
            else:
                drop.add(id(c))
        if not drop:
            self.max_learnts = int(self.max_learnts * 1.1) + 1
            return
        for ws in self.watches:
            if ws:
                ws[:] = [c for c in ws if id(c) not in drop]
        for key in drop:
            del self.lbd[key]
        self.learnts = keep
        self.max_learnts = int(self.max_learnts * 1.1) + 1

    # -- search ----------------------------------------------------------------------

    def _decide(self) -> int:
        heap, val, act = self.heap, self.val, self.activity
        while heap:
            neg_a, v = heapq.heappop(heap)
            if val[2 * v] != 0 or -neg_a != act[v]:
                continue
            return 2 * v + self.phase[v]
        return -1

    def _check_budget(self, t0: float) -> None:
        if self.max_conflicts is not None and self.stats.conflicts >= self.max_conflicts:
            raise BudgetExceeded(f"conflict budget of {self.max_conflicts} exhausted")
        if self.time_limit is not None and time.perf_counter() - t0 > self.time_limit:
            raise BudgetExceeded(f"time budget of {self.time_limit:.3g} s exhausted")

    def solve(self, assumptions: Sequence[int | Assumption] = ()) -> SatOutcome:
        """Decide satisfiability under ``assumptions`` (signed literals)."""
        assumed = self._check_assumptions(assumptions)
        t0 = time.perf_counter()
        before = SatStats(**vars(self.stats))
        try:
            if not self.ok:
                status = UNSAT
            elif self.engine == "cdcl":
                status = self._search_cdcl(assumed, t0)
            else:
                status = self._search_dpll(assumed, t0)
            model = None
            if status == SAT:
                model = {v: self.val[2 * v] == 1 for v in range(1, self.num_vars + 1)}
        finally:
            self._backtrack(0)
        stats = SatStats(
            decisions=self.stats.decisions - before.decisions,
            propagations=self.stats.propagations - before.propagations,
            conflicts=self.stats.conflicts - before.conflicts,
            restarts=self.stats.restarts - before.restarts,
            learned=self.stats.learned - before.learned,
            elapsed=time.perf_counter() - t0,
        )
        return SatOutcome(status, model, stats)

    def _check_assumptions(self, assumptions) -> list[int]:
        lits = []
        seen = {}
        for a in assumptions:
            x = a.literal if isinstance(a, Assumption) else int(a)
            if x == 0 or abs(x) > self.num_vars:
                raise InvalidAssumptions(f"assumption {x} out of range 1..{self.num_vars}")
            if seen.get(abs(x), x) != x:
                raise InvalidAssumptions(f"variable {abs(x)} assumed both ways")
            if abs(x) not in seen:
                seen[abs(x)] = x
                lits.append(_internal(x))
        return lits

    def _next_assumption(self, assumed: list[int]):
        """Open decision levels for pending assumptions; False if one is violated."""
        while len(self.trail_lim) < len(assumed):
            a = assumed[len(self.trail_lim)]
            if self.val[a] == 1:
                self.trail_lim.append(len(self.trail))
            elif self.val[a] == -1:
                return False
            else:
                self.trail_lim.append(len(self.trail))
                self._assign(a, None)
                return True
        return None

    def _search_cdcl(self, assumed: list[int], t0: float) -> str:
        stats = self.stats
        restart_no = 0
        budget = self.restart_base * _luby(restart_no)
        since_restart = 0
        while True:
            conflict = self._propagate()
            if conflict is not None:
                stats.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    self.ok = False
                    return UNSAT
                learnt, bt = self._analyze(conflict)
                # learned clauses never undo assumption levels below bt; fine either way
                self._backtrack(bt)
                self._record(learnt)
                self.var_inc /= self.var_decay
                self._check_budget(t0)
                continue
            if since_restart >= budget:
                restart_no += 1
                stats.restarts += 1
                since_restart = 0
                budget = self.restart_base * _luby(restart_no)
                self._backtrack(0)
                continue
            if len(self.learnts) - len(self.trail) >= self.max_learnts:
                self._reduce_db()
            step = self._next_assumption(assumed)
            if step is False:
                return UNSAT
            if step:
                continue
            lit = self._decide()
            if lit < 0:
                return SAT
            stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._assign(lit, None)

    def _search_dpll(self, assumed: list[int], t0: float) -> str:
        stats = self.stats
        flipped: list[bool] = []  # per decision level above the assumptions
        base = len(assumed)
        while True:
            conflict = self._propagate()
            if conflict is not None:
                stats.conflicts += 1
                self._check_budget(t0)
                while flipped and flipped[-1]:
                    flipped.pop()
                if not flipped or len(self.trail_lim) == 0:
                    if not self.trail_lim:
                        self.ok = False
                    return UNSAT
                lvl = base + len(flipped) - 1
                decision = self.trail[self.trail_lim[lvl]]
                self._backtrack(lvl)
                flipped[-1] = True
                self.trail_lim.append(len(self.trail))
                self._assign(decision ^ 1, None)
                continue
            step = self._next_assumption(assumed)
            if step is False:
                return UNSAT
            if step:
                continue
            lit = self._decide()
            if lit < 0:
                return SAT
            stats.decisions += 1
            flipped.append(False)
            self.trail_lim.append(len(self.trail))
            self._assign(lit, None)


def solve(cnf: CnfFormula | Sequence[Sequence[int]], assumptions: Sequence[int | Assumption] = (),
          **options) -> SatOutcome:
    """One-shot solve. ``options`` go to :class:`Solver`."""
    num_vars = options.pop("num_vars", None)
    return Solver(cnf, num_vars, **options).solve(assumptions)


def verify_model(cnf: CnfFormula | Sequence[Sequence[int]], model) -> bool:
    """True iff every clause has a literal made true by ``model`` (var -> bool)."""
    clauses = cnf.clauses if isinstance(cnf, CnfFormula) else cnf
    for clause in clauses:
        if not any(bool(model[abs(l)]) == (l > 0) for l in clause):
            return False
    return True


# -- DIMACS --------------------------------------------------------------------------

def import_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF text. Comment lines and a trailing ``%`` section are ignored."""
    header = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None:
                raise ParseError("second problem line", lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"malformed problem line {line!r}", lineno)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ParseError(f"malformed problem line {line!r}", lineno) from None
            if header[0] < 0 or header[1] < 0:
                raise ParseError("negative counts in problem line", lineno)
            continue
        if header is None:
            raise ParseError("clause before problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            elif abs(lit) > header[0]:
                raise ParseError(f"literal {lit} exceeds declared {header[0]} variables", lineno)
            else:
                current.append(lit)
    if header is None:
        raise ParseError("missing problem line")
    if current:
        clauses.append(tuple(current))
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return CnfFormula(header[0], tuple(clauses))


def parse_solver_output(text: str, num_vars: int) -> SatOutcome:
    """Read SAT-competition style output (``s ...`` / ``v ...``) or MiniSat result files."""
    status = None
    lits: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        token = line.split()
        if token[0] == "s":
            token = token[1:]
        if token and token[0] in ("SATISFIABLE", "SAT"):
            status = SAT
            continue
        if token and token[0] in ("UNSATISFIABLE", "UNSAT"):
            status = UNSAT
            continue
        if token and token[0] in ("INDETERMINATE", "UNKNOWN", "INDET"):
            raise BudgetExceeded("external solver gave no answer")
        if token and token[0] == "v":
            token = token[1:]
        if status == SAT:
            try:
                lits.extend(int(t) for t in token)
            except ValueError:
                continue
    if status is None:
        raise ParseError("external solver output has no SAT/UNSAT verdict")
    if status == UNSAT:
        return SatOutcome(UNSAT)
    model = {v: False for v in range(1, num_vars + 1)}
    for l in lits:
        if l != 0 and abs(l) <= num_vars:
            model[abs(l)] = l > 0
    return SatOutcome(SAT, model)


def solve_external(cnf: CnfFormula, command: str, timeout: float | None = None) -> SatOutcome:
    """Run an external DIMACS solver: ``command <file.cnf>``; its stdout is parsed.

    If the command contains ``{out}``, a result-file path is substituted and
    that file is read instead (MiniSat style: ``minisat {in} {out}``).
    """
    from .logic import to_dimacs

    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "problem.cnf"
        out = Path(tmp) / "result.txt"
        src.write_text(to_dimacs(cnf))
        argv = shlex.split(command)
        if any("{in}" in a or "{out}" in a for a in argv):
            argv = [a.replace("{in}", str(src)).replace("{out}", str(out)) for a in argv]
        else:
            argv.append(str(src))
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            raise BudgetExceeded(f"external solver exceeded {timeout} s") from None
        text = out.read_text() if out.exists() else proc.stdout
    outcome = parse_solver_output(text, cnf.num_vars)
    outcome.stats.elapsed = time.perf_counter() - t0
    return outcome
