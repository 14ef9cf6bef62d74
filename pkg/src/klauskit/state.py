"""Sparse kets, fidelity, and the library of benchmark target states."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ParseError, ShapeError, ZeroState

# amplitudes smaller than this (after normalization) are dropped
PRUNE = 1e-15


class Ket:
    """Normalized pure state on ``n`` parties with a shared local dimension ``d``.

    ``amplitudes`` maps basis labels (tuples of ``n`` digits in ``[0, d)``) to
    complex amplitudes. Only nonzero amplitudes are stored.
    """

    __slots__ = ("n", "d", "_amps")

    def __init__(self, n: int, d: int, amplitudes: Mapping, normalize: bool = True):
        amps = {}
        for label, a in amplitudes.items():
            label = tuple(int(x) for x in label)
            if len(label) != n or any(not 0 <= x < d for x in label):
                raise ShapeError(f"basis label {label} invalid for n={n}, d={d}")
            a = complex(a)
            if a != 0:
                amps[label] = amps.get(label, 0j) + a
        norm = math.sqrt(sum(abs(a) ** 2 for a in amps.values()))
        if norm == 0.0 or not math.isfinite(norm):
            raise ZeroState("state has zero norm")
        # already-normalized input is left alone so that serialization round-trips exactly
        if normalize and abs(norm - 1.0) > 1e-15:
            amps = {k: a / norm for k, a in amps.items()}
            kept = {k: a for k, a in amps.items() if abs(a) >= PRUNE}
            if len(kept) != len(amps):
                norm = math.sqrt(sum(abs(a) ** 2 for a in kept.values()))
                kept = {k: a / norm for k, a in kept.items()}
            amps = kept
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "_amps", dict(sorted(amps.items())))

    def __setattr__(self, name, value):
        raise AttributeError("Ket is immutable")

    def __reduce__(self):
        return (Ket, (self.n, self.d, self._amps, False))

    @property
    def amplitudes(self) -> dict:
        return dict(self._amps)

    @property
    def support(self) -> frozenset:
        return frozenset(self._amps)

    def __len__(self):
        return len(self._amps)

    def __getitem__(self, label):
        return self._amps.get(tuple(label), 0j)

    def items(self):
        return self._amps.items()

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    def __eq__(self, other):
        if not isinstance(other, Ket):
            return NotImplemented
        return (self.n, self.d, self._amps) == (other.n, other.d, other._amps)

    def __hash__(self):
        return hash((self.n, self.d, tuple(self._amps.items())))

    def __repr__(self):
        terms = " + ".join(f"({a:.4g})|{''.join(map(str, k))}>" for k, a in list(self._amps.items())[:6])
        more = " + ..." if len(self._amps) > 6 else ""
        return f"Ket(n={self.n}, d={self.d}: {terms}{more})"

    def dense(self) -> np.ndarray:
        """Full ``d**n`` amplitude vector, first party most significant."""
        vec = np.zeros(self.d ** self.n, dtype=complex)
        for label, a in self._amps.items():
            vec[label_index(label, self.d)] = a
        return vec


def label_index(label, d: int) -> int:
    idx = 0
    for x in label:
        idx = idx * d + x
    return idx


def overlap(a: Ket, b: Ket) -> complex:
    """<a|b>."""
    if (a.n, a.d) != (b.n, b.d):
        raise ShapeError(f"cannot compare states of shape (n={a.n}, d={a.d}) and (n={b.n}, d={b.d})")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = sum(amp.conjugate() * large[label] for label, amp in small.items())
    return total if small is a else total.conjugate()


def fidelity(a: Ket, b: Ket) -> float:
    """|<a|b>|^2, clipped into [0, 1] against rounding."""
    return min(1.0, max(0.0, abs(overlap(a, b)) ** 2))


def ghz(n: int, d: int) -> Ket:
    if n < 2 or d < 2:
        raise ValueError(f"GHZ needs n >= 2 and d >= 2, got n={n}, d={d}")
    return Ket(n, d, {(k,) * n: 1.0 for k in range(d)})


def herald_ancilla(k: Ket) -> Ket:
    """Append one extra party fixed to color 0."""
    return Ket(k.n + 1, k.d, {label + (0,): a for label, a in k.items()})


def uniform_state(labels, d: int | None = None) -> Ket:
    """Equal-weight superposition of the given basis labels."""
    labels = [tuple(l) for l in labels]
    n = len(labels[0])
    if d is None:
        d = max(max(l) for l in labels) + 1
    return Ket(n, d, {l: 1.0 for l in labels})


def _labels(*words: str):
    return [tuple(int(ch) for ch in w) for w in words]


@dataclass(frozen=True)
class TargetSpec:
    name: str
    ket: Ket
    srv: tuple[int, int, int] | None = None
    graph_representable: bool | None = None
    description: str = ""


def _srv_target(name, srv, words, representable, description):
    labels = _labels(*words)
    d = max(max(l) for l in labels) + 1
    ket = herald_ancilla(uniform_state(labels, d))
    return TargetSpec(name, ket, srv, representable, description)


def target_library() -> list[TargetSpec]:
    """Benchmark states. Three-party SRV states come heralded (fourth party in |0>)."""
    specs = [
        TargetSpec("GHZ_4_3", ghz(4, 3), None, True, "GHZ, 4 parties, d=3"),
        TargetSpec("GHZ_6_2", ghz(6, 2), None, True, "GHZ, 6 parties, d=2"),
        TargetSpec("GHZ_8_2", ghz(8, 2), None, True, "GHZ, 8 parties, d=2"),
        _srv_target("SRV_544", (5, 4, 4), ["000", "111", "222", "330", "413"], True,
                    "SRV (5,4,4), heralded, d=5"),
        _srv_target("SRV_644", (6, 4, 4), ["000", "111", "222", "330", "413", "512"], True,
                    "SRV (6,4,4), heralded, d=6"),
        _srv_target("SRV_654", (6, 5, 4), ["000", "111", "222", "330", "440", "513"], True,
                    "SRV (6,5,4), heralded, d=6"),
        _srv_target("SRV_955", (9, 5, 5),
                    ["000", "111", "222", "303", "404", "505", "631", "741", "841"], True,
                    "SRV (9,5,5), heralded, d=9"),
        TargetSpec("GHZ_6_3", ghz(6, 3), None, False, "GHZ, 6 parties, d=3; no exact graph"),
        _srv_target("SRV_544_star", (5, 4, 4), ["000", "111", "222", "333", "401"], False,
                    "SRV (5,4,4), heralded, d=5; no exact graph"),
        _srv_target("SRV_644_star", (6, 4, 4), ["000", "111", "222", "310", "420", "533"], False,
                    "SRV (6,4,4), heralded, d=6; no exact graph"),
    ]
    return specs


_GHZ_NAME = re.compile(r"^GHZ_(\d+)_(\d+)$")


def get_target(name: str) -> TargetSpec:
    """Library lookup. Any ``GHZ_<n>_<d>`` name is accepted, even outside the library."""
    for entry in target_library():
        if entry.name == name:
            return entry
    m = _GHZ_NAME.match(name)
    if m:
        n, d = int(m.group(1)), int(m.group(2))
        return TargetSpec(name, ghz(n, d), None, None, f"GHZ, {n} parties, d={d}")
    known = ", ".join(s.name for s in target_library())
    raise KeyError(f"unknown target {name!r}; library has {known} (or any GHZ_<n>_<d>)")


# -- JSON ----------------------------------------------------------------------------

def ket_to_dict(k: Ket) -> dict:
    return {
        "n": k.n,
        "d": k.d,
        "terms": [{"ket": list(label), "amp": [a.real, a.imag]} for label, a in k.items()],
    }


def ket_from_dict(data: Mapping) -> Ket:
    try:
        n, d = int(data["n"]), int(data["d"])
        terms = {}
        for item in data["terms"]:
            label = tuple(int(x) for x in item["ket"])
            amp = item.get("amp", [1.0, 0.0])
            if isinstance(amp, (int, float)):
                amp = [amp, 0.0]
            if label in terms:
                raise ParseError(f"duplicate basis label {label}")
            terms[label] = complex(amp[0], amp[1])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad target-state JSON: {exc}") from None
    try:
        return Ket(n, d, terms)
    except (ShapeError, ZeroState) as exc:
        raise ParseError(str(exc)) from None


def ket_to_json(k: Ket) -> str:
    return json.dumps(ket_to_dict(k), indent=2)


def ket_from_json(text: str) -> Ket:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return ket_from_dict(data)
