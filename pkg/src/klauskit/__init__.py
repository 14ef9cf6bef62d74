"""Design of graph-generated multi-photon states.

Graphs are edge-colored, weighted complete graphs; the state they generate is
the normalized sum over perfect matchings. Feasibility of a target is encoded
as a Boolean formula and decided with a CDCL solver; edge weights are found
by infidelity minimization.
"""

from .errors import (BudgetExceeded, InfeasibleTarget, KlausError, NoPerfectMatching, ParseError,
                     ShapeError, UnsatisfiableByConstruction, ZeroState)
from .graph import (BI, MONO, ColoredGraph, EdgeKey, coloring_weight, coloring_weights, double_factorial,
                    edge_slots, enumerate_pairings, graph_from_json, graph_to_dot, graph_to_json,
                    graph_to_state, matchings_for_coloring)
from .state import Ket, fidelity, get_target, ghz, herald_ancilla, ket_from_json, ket_to_json, target_library
from .logic import (CnfFormula, Encoding, FeasibilityChecker, build_k, matching_table, to_dimacs, tseitin)
from .sat import Solver, import_dimacs, solve, solve_external, verify_model
from .solution import DesignSolution, recompute_fidelity
from .optimizer import OptimizerConfig, minimize_infidelity, theseus, theseus_opt
from .klaus import (ConjectureResult, EdgeClassifier, KlausConfig, check_monochromatic_conjecture, klaus,
                    klaus_opt)
from .bench import ALGORITHMS, DEFAULT_SUITE, EXTENDED_SUITE, BenchOptions, BenchRecord, bench, summarize

__version__ = "0.1.0"
