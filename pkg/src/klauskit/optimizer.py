"""Continuous infidelity minimization over complex edge weights.

The loss is ``1 - |<t|psi>|^2 / <psi|psi>`` where ``psi_c = W(c)`` is the
unnormalized coloring weight. Each W(c) is multilinear in the edge weights, so
its derivative with respect to one edge is the sum over matchings through that
edge of the product of the other edges (a cofactor). The gradient with respect
to the real and imaginary parts follows from the Wirtinger derivative
``d loss / d conj(w)``.

Parameters are packed as ``[re(w_0), im(w_0), re(w_1), im(w_1), ...]``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .graph import BI, ColoredGraph, EdgeKey, edge_slots, enumerate_pairings, normalize_mode
from .solution import DesignSolution, recompute_fidelity
from .state import Ket


@dataclass
class OptimizerConfig:
    restarts: int = 5
    max_iter: int = 300
    tol: float = 1e-10  # stop restarting once the loss is below this
    tau: float = 0.05  # deletion threshold relative to the largest |w|
    tau_floor: float = 0.0125  # two halvings of the default tau
    compromise: float = 1e-3  # tolerated fidelity drop when deleting edges
    seed: int | None = 0
    real_weights: bool = False

    def __post_init__(self):
        if self.tau <= 0 or self.tol <= 0 or self.compromise <= 0 or self.tau_floor <= 0:
            raise ValueError("thresholds and tolerances must be positive")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("need at least one restart and one iteration")


@dataclass
class WeightVector:
    """Real parameter vector for a fixed, ordered edge list."""

    edges: tuple
    values: np.ndarray
    real: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        per_edge = 1 if self.real else 2
        if self.values.shape != (per_edge * len(self.edges),):
            raise ValueError(f"expected {per_edge * len(self.edges)} parameters, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("weights must be finite")

    @classmethod
    def from_complex(cls, edges: Sequence[EdgeKey], weights, real: bool = False) -> "WeightVector":
        w = np.asarray(weights, dtype=complex)
        if real:
            return cls(tuple(edges), w.real.copy(), True)
        x = np.empty(2 * len(w))
        x[0::2], x[1::2] = w.real, w.imag
        return cls(tuple(edges), x, False)

    def complex(self) -> np.ndarray:
        if self.real:
            return self.values.astype(complex)
        return self.values[0::2] + 1j * self.values[1::2]

    def as_dict(self) -> dict:
        return dict(zip(self.edges, self.complex()))

    def to_graph(self, n: int, d: int, mode: str = BI) -> ColoredGraph:
        return ColoredGraph(n, d, self.as_dict(), mode)


# fidelities at or below this count as "nothing of the target survives"
ZERO_FIDELITY = 1e-9


def _split(x: np.ndarray, real: bool) -> np.ndarray:
    return x.astype(complex) if real else x[0::2] + 1j * x[1::2]


class InfidelityModel:
    """Precomputed matching structure of one topology against one target."""

    def __init__(self, topology: Sequence[EdgeKey], target: Ket, real: bool = False):
        self.edges = tuple(sorted(topology))
        if not self.edges:
            raise ValueError("topology must contain at least one edge")
        self.target = target
        self.real = real
        n = target.n
        index = {e: k for k, e in enumerate(self.edges)}
        by_pair: dict[tuple[int, int], list[int]] = {}
        for e in self.edges:
            if e.j >= n or e.alpha >= target.d or e.beta >= target.d:
                raise ValueError(f"edge {e} does not fit the target shape (n={n}, d={target.d})")
            by_pair.setdefault(e.pair, []).append(index[e])

        colorings: dict[tuple[int, ...], int] = {}
        for label in target.support:
            colorings.setdefault(label, len(colorings))
        rows, owners = [], []
        for pairing in enumerate_pairings(n):
            options = [by_pair.get(p) for p in pairing]
            if not all(options):
                continue
            for choice in itertools.product(*options):
                c = [0] * n
                for k in choice:
                    e = self.edges[k]
                    c[e.i], c[e.j] = e.alpha, e.beta
                owners.append(colorings.setdefault(tuple(c), len(colorings)))
                rows.append(choice)
        self.colorings = list(colorings)
        self.term_edges = np.array(rows, dtype=np.int64).reshape(len(rows), n // 2)
        self.term_owner = np.array(owners, dtype=np.int64)
        self.flat_edges = self.term_edges.ravel()
        t = np.zeros(len(colorings), dtype=complex)
        for label, a in target.items():
            t[colorings[label]] = a
        self.t = t
        self.support_mask = np.zeros(len(colorings), dtype=bool)
        self.support_mask[[colorings[l] for l in target.support]] = True

    @property
    def num_params(self) -> int:
        return len(self.edges) * (1 if self.real else 2)

    def amplitudes(self, w: np.ndarray) -> np.ndarray:
        """Unnormalized psi_c for every coloring in ``self.colorings``."""
        prod = np.prod(w[self.term_edges], axis=1) if len(self.term_owner) else np.zeros(0, complex)
        m = len(self.colorings)
        return (np.bincount(self.term_owner, prod.real, m)
                + 1j * np.bincount(self.term_owner, prod.imag, m))

    def fidelity_of(self, w: np.ndarray) -> float:
        psi = self.amplitudes(w)
        norm = np.vdot(psi, psi).real
        if norm <= 0.0:
            return 0.0
        return float(min(1.0, abs(np.vdot(self.t, psi)) ** 2 / norm))

    def loss(self, x: np.ndarray) -> float:
        return 1.0 - self.fidelity_of(_split(x, self.real))

    def loss_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        w = _split(x, self.real)
        T, k = self.term_edges.shape
        factors = w[self.term_edges]
        pre = np.ones((T, k + 1), dtype=complex)
        suf = np.ones((T, k + 1), dtype=complex)
        pre[:, 1:] = np.cumprod(factors, axis=1)
        suf[:, :-1] = np.cumprod(factors[:, ::-1], axis=1)[:, ::-1]
        prod = pre[:, k]
        m = len(self.colorings)
        psi = np.bincount(self.term_owner, prod.real, m) + 1j * np.bincount(self.term_owner, prod.imag, m)
        norm = np.vdot(psi, psi).real
        if norm <= 1e-300:
            return 1.0, np.zeros_like(x)
        a = np.vdot(self.t, psi)
        f = abs(a) ** 2 / norm
        # d f / d conj(psi_c)
        g = (a * self.t * norm - abs(a) ** 2 * psi) / norm ** 2
        cof = pre[:, :k] * suf[:, 1:]
        contrib = (g[self.term_owner][:, None] * np.conj(cof)).ravel()
        E = len(self.edges)
        dw = (np.bincount(self.flat_edges, contrib.real, E)
              + 1j * np.bincount(self.flat_edges, contrib.imag, E))
        if self.real:
            grad = -2.0 * dw.real
        else:
            grad = np.empty(2 * E)
            grad[0::2] = -2.0 * dw.real
            grad[1::2] = -2.0 * dw.imag
        return float(1.0 - f), grad


def _topology_of(topology) -> list[EdgeKey]:
    if isinstance(topology, ColoredGraph):
        return list(topology.edges)
    return list(topology)


def loss(weights: WeightVector, topology: Iterable[EdgeKey] | None, target: Ket) -> float:
    """Infidelity of the graph with these weights; 1 for the zero state."""
    edges = _topology_of(topology) if topology is not None else list(weights.edges)
    model = InfidelityModel(edges, target, weights.real)
    w = dict(zip(weights.edges, weights.complex()))
    return 1.0 - model.fidelity_of(np.array([w.get(e, 0j) for e in model.edges]))


def gradient(weights: WeightVector, topology: Iterable[EdgeKey] | None, target: Ket) -> np.ndarray:
    """d loss / d parameters, in the parameter order of ``weights``."""
    edges = _topology_of(topology) if topology is not None else list(weights.edges)
    model = InfidelityModel(edges, target, weights.real)
    if tuple(weights.edges) != model.edges:
        raise ValueError("weights must be ordered like the sorted topology")
    return model.loss_and_grad(weights.values)[1]


def _gauge(model: InfidelityModel, w: np.ndarray) -> np.ndarray:
    """Scale so max |w| = 1 and rotate the largest support amplitude to the positive reals."""
    peak = np.max(np.abs(w))
    if peak == 0:
        return w
    w = w / peak
    if model.real:
        return w
    psi = model.amplitudes(w)
    sup = np.where(model.support_mask)[0]
    if len(sup) == 0:
        return w
    c = sup[np.argmax(np.abs(psi[sup]))]
    if abs(psi[c]) == 0:
        return w
    k = model.term_edges.shape[1]
    return w * np.exp(-1j * np.angle(psi[c]) / k)


@dataclass
class MinimizeResult:
    weights: WeightVector
    fidelity: float
    evaluations: int = 0
    runs: int = 0


def minimize_infidelity(topology, target: Ket, cfg: OptimizerConfig | None = None,
                        init: Sequence | None = None, rng: np.random.Generator | None = None,
                        stop_at: float | None = None) -> tuple[WeightVector, float]:
    """Best-of-restarts L-BFGS minimization of the infidelity.

    ``init`` holds optional starting weights (complex arrays, or dicts keyed by
    edge) tried before the random restarts, which draw real and imaginary parts
    uniformly from [-1, 1]. Restarts stop early once the fidelity reaches
    ``stop_at`` (default ``1 - cfg.tol``).
    """
    res = _minimize(topology, target, cfg or OptimizerConfig(), init, rng, stop_at)
    return res.weights, res.fidelity


def _minimize(topology, target, cfg, init=None, rng=None, stop_at=None) -> MinimizeResult:
    model = InfidelityModel(_topology_of(topology), target, cfg.real_weights)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    goal = 1.0 - cfg.tol if stop_at is None else stop_at
    starts = []
    for guess in init or ():
        if isinstance(guess, dict):
            guess = np.array([guess.get(e, 0j) for e in model.edges], dtype=complex)
        wv = WeightVector.from_complex(model.edges, guess, cfg.real_weights)
        if np.any(wv.values):
            starts.append(wv.values)
    best_x, best_loss, evals, runs = None, np.inf, 0, 0
    total = len(starts) + cfg.restarts
    for r in range(total):
        x0 = starts[r] if r < len(starts) else rng.uniform(-1.0, 1.0, model.num_params)
        out = minimize(model.loss_and_grad, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": cfg.max_iter, "ftol": 1e-15, "gtol": 1e-12})
        evals += int(out.nfev)
        runs += 1
        val = model.loss(out.x)
        if val < best_loss:
            best_x, best_loss = out.x, val
        if 1.0 - best_loss >= goal:
            break
    w = _gauge(model, _split(best_x, cfg.real_weights))
    wv = WeightVector.from_complex(model.edges, w, cfg.real_weights)
    return MinimizeResult(wv, model.fidelity_of(w), evals, runs)


def _ms(seconds: float) -> float:
    return 1000.0 * seconds


def _finish(wv: WeightVector, target: Ket, mode: str, algorithm: str, seed, elapsed, trace,
            fidelity_goal: float, target_name: str = "", notes=()) -> DesignSolution:
    graph = wv.to_graph(target.n, target.d, mode)
    fid = recompute_fidelity(graph, target)
    return DesignSolution(graph, fid, algorithm, fid >= fidelity_goal, seed, None, target_name,
                          elapsed, list(trace), list(notes))


def theseus(target: Ket, cfg: OptimizerConfig | None = None, mode: str = BI,
            fidelity_goal: float = 0.999, target_name: str = "") -> DesignSolution:
    """Numeric pruning from the complete graph.

    Minimize over all weights, then repeatedly drop every edge whose relative
    magnitude is below ``tau`` and re-minimize. A batch that costs more than
    ``compromise`` fidelity (relative to the first minimization) is reverted and
    ``tau`` halved. Once ``tau`` would drop below ``tau_floor``, edges under the
    floor are deleted whatever the fidelity cost, except where a deletion would
    leave zero fidelity; if deleting them together does that, they go one at a
    time, smallest first.
    """
    cfg = cfg or OptimizerConfig()
    mode = normalize_mode(mode)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    topology = edge_slots(target.n, target.d, mode)
    res = _minimize(topology, target, cfg, rng=rng)
    ref = res.fidelity
    current = res
    tau = cfg.tau
    forced = single = False
    protected = set()  # sub-floor edges whose removal would leave nothing of the target
    trace = []
    minimizations = 1
    while True:
        w = current.weights.complex()
        mags = np.abs(w) / np.max(np.abs(w))
        drop = [e for e, m in zip(current.weights.edges, mags) if m < tau and e not in protected]
        if single and drop:
            drop = [min(drop, key=lambda e: mags[current.weights.edges.index(e)])]
        keep = [e for e in current.weights.edges if e not in drop]
        if not drop or not keep:
            break
        start = current.weights.as_dict()
        trial = _minimize(keep, target, cfg, init=[start], rng=rng, stop_at=ref - cfg.compromise)
        minimizations += 1
        if trial.fidelity >= ref - cfg.compromise or (forced and trial.fidelity > ZERO_FIDELITY):
            trace.extend((e, "deleted") for e in drop)
            current = trial
        elif forced and not single:
            single = True
        elif forced:
            protected.add(drop[0])
        else:
            tau /= 2.0
            if tau < cfg.tau_floor:
                # edges this small count as numerically absent: delete them
                # (as a batch, or smallest first if the batch wipes out the
                # target), unless that leaves nothing of the target
                tau, forced = cfg.tau_floor, True
    elapsed = {"encode_ms": 0.0, "sat_ms": 0.0, "opt_ms": _ms(time.perf_counter() - t0)}
    elapsed["total_ms"] = elapsed["opt_ms"]
    sol = _finish(current.weights, target, mode, "theseus", cfg.seed, elapsed, trace, fidelity_goal, target_name)
    sol.notes.append(f"minimizations={minimizations}")
    return sol


def theseus_opt(start: DesignSolution, target: Ket, cfg: OptimizerConfig | None = None,
                fidelity_goal: float = 0.999, target_name: str = "") -> DesignSolution:
    """One-by-one deletion with full re-minimization, in seeded random order.

    An edge stays deleted only if the re-minimized fidelity stays within
    ``compromise`` of the starting fidelity.
    """
    cfg = cfg or OptimizerConfig()
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()
    mode = start.graph.mode
    ref = start.fidelity
    weights = dict(start.graph.edges)
    order = sorted(weights)
    order = [order[k] for k in rng.permutation(len(order))]
    trace = []
    minimizations = 0
    for e in order:
        if len(weights) <= 1:
            trace.append((e, "kept"))
            continue
        keep = [f for f in weights if f != e]
        guess = {f: weights[f] for f in keep}
        trial = _minimize(keep, target, cfg, init=[guess], rng=rng, stop_at=ref - cfg.compromise)
        minimizations += 1
        if trial.fidelity >= ref - cfg.compromise:
            weights = trial.weights.as_dict()
            trace.append((e, "deleted"))
        else:
            trace.append((e, "kept"))
    opt_ms = _ms(time.perf_counter() - t0)
    final = WeightVector.from_complex(sorted(weights), [weights[f] for f in sorted(weights)])
    elapsed = {"encode_ms": 0.0, "sat_ms": 0.0, "opt_ms": opt_ms, "total_ms": opt_ms}
    sol = _finish(final, target, mode, "theseusopt", cfg.seed, elapsed, trace, fidelity_goal, target_name)
    sol.notes.append(f"minimizations={minimizations}")
    return sol
