"""Result container shared by the logic-driven and the numeric design loops."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .graph import ColoredGraph, EdgeKey, graph_to_dict, graph_to_state, graph_from_dict
from .errors import ZeroState
from .state import Ket, fidelity

DISPOSABLE = "disposable"
INDISPENSABLE = "indispensable"


def recompute_fidelity(graph: ColoredGraph, target: Ket) -> float:
    if len(graph) == 0:
        return 0.0
    try:
        return fidelity(target, graph_to_state(graph))
    except ZeroState:
        return 0.0


@dataclass
class DesignSolution:
    graph: ColoredGraph
    fidelity: float
    algorithm: str
    converged: bool
    seed: int | None = None
    sat_mode: str | None = None
    target_name: str = ""
    elapsed: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def edge_count(self) -> int:
        return len(self.graph)

    def phase_ms(self, name: str) -> float:
        return float(self.elapsed.get(name, 0.0))

    def trace_dict(self) -> dict:
        return {
            "decisions": [
                {"edge": {"i": e.i, "j": e.j, "a": e.alpha, "b": e.beta}, "verdict": v}
                for e, v in self.trace
            ]
        }

    def to_dict(self) -> dict:
        data = graph_to_dict(self.graph)
        el = {k: float(v) for k, v in self.elapsed.items()}
        data.update({
            "algorithm": self.algorithm,
            "target": self.target_name,
            "seed": self.seed,
            "sat_mode": self.sat_mode,
            "converged": self.converged,
            "fidelity": self.fidelity,
            "edge_count": self.edge_count,
            "phases": {
                "classification_ms": el.get("encode_ms", 0.0) + el.get("sat_ms", 0.0),
                "optimization_ms": el.get("opt_ms", 0.0),
                **el,
            },
            "trace": self.trace_dict()["decisions"],
        })
        if self.notes:
            data["notes"] = list(self.notes)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "DesignSolution":
        graph = graph_from_dict(data)
        phases = dict(data.get("phases", {}))
        phases.pop("classification_ms", None)
        phases.pop("optimization_ms", None)
        trace = [
            (EdgeKey(t["edge"]["i"], t["edge"]["j"], t["edge"]["a"], t["edge"]["b"]), t["verdict"])
            for t in data.get("trace", [])
        ]
        return cls(graph, float(data["fidelity"]), data.get("algorithm", ""), bool(data.get("converged")),
                   data.get("seed"), data.get("sat_mode"), data.get("target", ""), phases, trace,
                   list(data.get("notes", [])))
