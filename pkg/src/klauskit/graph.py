"""Edge-colored weighted graphs, their perfect matchings and the states they produce.

Vertices are integers ``0..n-1``. An edge ``(i, j, alpha, beta)`` with ``i < j``
hands color ``alpha`` to vertex ``i`` and color ``beta`` to vertex ``j``.
A perfect matching whose edges deliver the coloring ``c`` contributes the
product of its edge weights to the amplitude of basis state ``|c>``.

Counting convention: a complete graph on ``n`` vertices (``n`` even) has
``(n-1)!!`` perfect matchings, e.g. 15 for six vertices.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .errors import NoPerfectMatching, ParseError
from .state import Ket

MONO = "mono"
BI = "bi"

_MODE_ALIASES = {
    "mono": MONO,
    "monochromatic": MONO,
    "bi": BI,
    "bichromatic": BI,
}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown edge mode {mode!r}; expected 'mono' or 'bi'") from None


@dataclass(frozen=True, order=True)
class EdgeKey:
    """One edge slot: vertex pair ``i < j`` and the colors delivered to each end."""

    i: int
    j: int
    alpha: int
    beta: int

    def __post_init__(self):
        if not 0 <= self.i < self.j:
            raise ValueError(f"edge needs 0 <= i < j, got ({self.i}, {self.j})")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("edge colors must be non-negative")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def monochromatic(self) -> bool:
        return self.alpha == self.beta

    def __str__(self):
        return f"e{self.i}{self.j}^{self.alpha}{self.beta}"


# A perfect matching is a tuple of EdgeKeys ordered by their lower vertex.
PerfectMatching = tuple


def _check_vertex_count(n: int) -> None:
    if n < 2:
        raise ValueError(f"need at least two vertices, got {n}")
    if n % 2:
        raise NoPerfectMatching(f"a graph with {n} vertices has no perfect matching")


def double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@lru_cache(maxsize=None)
def _pairings(vertices: tuple[int, ...]) -> tuple[tuple[tuple[int, int], ...], ...]:
    if not vertices:
        return ((),)
    first, rest = vertices[0], vertices[1:]
    out = []
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1:]
        for tail in _pairings(remaining):
            out.append(((first, partner),) + tail)
    return tuple(out)


def enumerate_pairings(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All partitions of ``range(n)`` into pairs.

    The lowest unmatched vertex is always paired first, partners ascending,
    so ``enumerate_pairings(4)`` is ``01|23, 02|13, 03|12``.
    """
    _check_vertex_count(n)
    return _pairings(tuple(range(n)))


def edge_slots(n: int, d: int, mode: str = BI) -> list[EdgeKey]:
    """Every possible edge for ``n`` vertices and ``d`` colors, in canonical order."""
    mode = normalize_mode(mode)
    slots = []
    for i, j in itertools.combinations(range(n), 2):
        if mode == MONO:
            slots.extend(EdgeKey(i, j, a, a) for a in range(d))
        else:
            slots.extend(EdgeKey(i, j, a, b) for a in range(d) for b in range(d))
    return slots


class ColoredGraph:
    """Immutable edge-colored graph with complex edge weights."""

    __slots__ = ("n", "d", "mode", "_edges")

    def __init__(self, n: int, d: int, edges: Mapping[EdgeKey, complex] | Iterable[EdgeKey] = (),
                 mode: str = BI):
        if n < 2:
            raise ValueError(f"need at least two vertices, got {n}")
        if d < 1:
            raise ValueError(f"need at least one color, got {d}")
        mode = normalize_mode(mode)
        if not isinstance(edges, Mapping):
            edges = {e: 1.0 for e in edges}
        stored = {}
        for key, w in edges.items():
            if key.j >= n or key.alpha >= d or key.beta >= d:
                raise ValueError(f"edge {key} out of range for n={n}, d={d}")
            if mode == MONO and key.alpha != key.beta:
                raise ValueError(f"bichromatic edge {key} in a monochromatic graph")
            w = complex(w)
            if not (math.isfinite(w.real) and math.isfinite(w.imag)):
                raise ValueError(f"edge {key} has non-finite weight {w}")
            stored[key] = w
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "_edges", dict(sorted(stored.items())))

    def __setattr__(self, name, value):
        raise AttributeError("ColoredGraph is immutable")

    def __reduce__(self):
        return (ColoredGraph, (self.n, self.d, self._edges, self.mode))

    @classmethod
    def complete(cls, n: int, d: int, mode: str = BI, weight: complex = 1.0) -> "ColoredGraph":
        return cls(n, d, {e: weight for e in edge_slots(n, d, mode)}, mode)

    @property
    def edges(self) -> Mapping[EdgeKey, complex]:
        return MappingProxyType(self._edges)

    @property
    def max_edges(self) -> int:
        pairs = self.n * (self.n - 1) // 2
        return pairs * (self.d if self.mode == MONO else self.d * self.d)

    def __len__(self):
        return len(self._edges)

    def __contains__(self, key):
        return key in self._edges

    def __iter__(self):
        return iter(self._edges)

    def __eq__(self, other):
        if not isinstance(other, ColoredGraph):
            return NotImplemented
        return (self.n, self.d, self.mode, self._edges) == (other.n, other.d, other.mode, other._edges)

    def __hash__(self):
        return hash((self.n, self.d, self.mode, tuple(self._edges.items())))

    def __repr__(self):
        return f"ColoredGraph(n={self.n}, d={self.d}, mode={self.mode!r}, edges={len(self)})"

    def with_weights(self, weights: Mapping[EdgeKey, complex]) -> "ColoredGraph":
        merged = dict(self._edges)
        merged.update(weights)
        return ColoredGraph(self.n, self.d, merged, self.mode)

    def subgraph(self, keep: Iterable[EdgeKey]) -> "ColoredGraph":
        keep = set(keep)
        return ColoredGraph(self.n, self.d, {e: w for e, w in self._edges.items() if e in keep}, self.mode)

    def without(self, *edges: EdgeKey) -> "ColoredGraph":
        drop = set(edges)
        return ColoredGraph(self.n, self.d, {e: w for e, w in self._edges.items() if e not in drop}, self.mode)

    def scaled(self, edge: EdgeKey, factor: complex) -> "ColoredGraph":
        return self.with_weights({edge: self._edges[edge] * factor})


def _check_coloring(g: ColoredGraph, c: Sequence[int]) -> tuple[int, ...]:
    c = tuple(int(x) for x in c)
    if len(c) != g.n:
        raise ValueError(f"coloring has length {len(c)}, graph has {g.n} vertices")
    if any(not 0 <= x < g.d for x in c):
        raise ValueError(f"coloring {c} has colors outside [0, {g.d})")
    return c


def matchings_for_coloring(g: ColoredGraph, c: Sequence[int]) -> list[PerfectMatching]:
    """Perfect matchings of ``g`` whose edges deliver exactly the coloring ``c``."""
    _check_vertex_count(g.n)
    c = _check_coloring(g, c)
    found = []
    for pairing in enumerate_pairings(g.n):
        keys = tuple(EdgeKey(i, j, c[i], c[j]) for i, j in pairing)
        if all(k in g for k in keys):
            found.append(keys)
    return found


def coloring_weight(g: ColoredGraph, c: Sequence[int]) -> complex:
    """Sum over matchings with coloring ``c`` of the product of their edge weights."""
    total = 0j
    for pm in matchings_for_coloring(g, c):
        total += math.prod((g.edges[e] for e in pm), start=1 + 0j)
    return total


def coloring_weights(g: ColoredGraph) -> dict[tuple[int, ...], complex]:
    """Unnormalized amplitudes W(c) for every coloring reached by some matching.

    Walks pairings and, per pairing, every choice of one edge per vertex pair,
    instead of scanning all ``d**n`` colorings.
    """
    _check_vertex_count(g.n)
    by_pair: dict[tuple[int, int], list[tuple[EdgeKey, complex]]] = {}
    for e, w in g.edges.items():
        by_pair.setdefault(e.pair, []).append((e, w))
    weights: dict[tuple[int, ...], complex] = {}
    for pairing in enumerate_pairings(g.n):
        options = [by_pair.get(p) for p in pairing]
        if not all(options):
            continue
        for choice in itertools.product(*options):
            c = [0] * g.n
            w = 1 + 0j
            for e, we in choice:
                c[e.i] = e.alpha
                c[e.j] = e.beta
                w *= we
            key = tuple(c)
            weights[key] = weights.get(key, 0j) + w
    return dict(sorted(weights.items()))


def graph_to_state(g: ColoredGraph) -> Ket:
    """Normalized post-selected state produced by ``g``.

    Raises ZeroState when every coloring weight is zero.
    """
    return Ket(g.n, g.d, coloring_weights(g))


# -- serialization -------------------------------------------------------------------

def _reject_duplicate_keys(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ParseError(f"duplicate JSON key {k!r}")
        seen[k] = v
    return seen


def graph_to_dict(g: ColoredGraph) -> dict:
    return {
        "n": g.n,
        "d": g.d,
        "mode": g.mode,
        "edges": [
            {"i": e.i, "j": e.j, "a": e.alpha, "b": e.beta, "w": [w.real, w.imag]}
            for e, w in g.edges.items()
        ],
    }


def graph_from_dict(data: Mapping) -> ColoredGraph:
    try:
        n, d = int(data["n"]), int(data["d"])
        mode = normalize_mode(data.get("mode", BI))
        raw_edges = data["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad graph header: {exc}") from None
    edges = {}
    for k, item in enumerate(raw_edges):
        try:
            i, j, a, b = (int(item[f]) for f in "ijab")
            re, im = item.get("w", [1.0, 0.0])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad edge entry #{k}: {exc}") from None
        if not (0 <= i < j < n and 0 <= a < d and 0 <= b < d):
            raise ParseError(f"edge entry #{k} ({i},{j},{a},{b}) out of range for n={n}, d={d}")
        key = EdgeKey(i, j, a, b)
        if key in edges:
            raise ParseError(f"duplicate edge {key}")
        edges[key] = complex(re, im)
    try:
        return ColoredGraph(n, d, edges, mode)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def graph_to_json(g: ColoredGraph, **extra) -> str:
    data = graph_to_dict(g)
    data.update(extra)
    return json.dumps(data, indent=2)


def graph_from_json(text: str) -> ColoredGraph:
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return graph_from_dict(data)


def graph_to_dot(g: ColoredGraph, name: str = "G") -> str:
    """Graphviz rendering; edge label is the color pair, pen width tracks |w|."""
    wmax = max((abs(w) for w in g.edges.values()), default=1.0) or 1.0
    lines = [f"graph {name} {{"]
    lines.extend(f"  {v};" for v in range(g.n))
    for e, w in g.edges.items():
        width = 0.5 + 3.5 * abs(w) / wmax
        lines.append(f'  {e.i} -- {e.j} [label="{e.alpha}{e.beta}", penwidth={width:.3f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
