"""Command-line front end.

Exit codes: 0 success, 1 infeasible target or UNSAT, 2 usage or input error,
3 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bench import (ALGORITHMS, DEFAULT_SUITE, EXTENDED_SUITE, BenchOptions, bench, resolve_target,
                    write_outputs)
from .errors import BudgetExceeded, InfeasibleTarget, KlausError, ParseError
from .graph import MONO, graph_from_json, graph_to_dot, graph_to_json, graph_to_state
from .klaus import KlausConfig, check_monochromatic_conjecture, klaus, klaus_opt
from .logic import build_k, to_dimacs, varmap_json
from .optimizer import OptimizerConfig, theseus, theseus_opt
from .sat import import_dimacs, solve, solve_external
from .solution import DesignSolution, recompute_fidelity
from .state import fidelity, ghz, ket_to_dict

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_seed() -> int:
    raw = os.environ.get("KLAUSKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"KLAUSKIT_SEED must be an integer, got {raw!r}") from None


def _common(p, target=True):
    if target:
        p.add_argument("--target", required=True, help="library name (e.g. GHZ_4_3) or target-state JSON file")
    p.add_argument("--mode", default="bi", help="mono or bi (default bi)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $KLAUSKIT_SEED or 0)")
    p.add_argument("--sat-mode", default="free", choices=("fixed-true", "free"))
    p.add_argument("--tau", type=float, default=None, help="Theseus deletion threshold")
    p.add_argument("--budget-ms", type=float, default=None, help="time limit per SAT call")
    p.add_argument("--out", default=None, help="output directory (default: print JSON to stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="klauskit", description="Logic and numeric design of graph-generated states.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("state", help="graph JSON -> generated state (and fidelity)")
    p.add_argument("graph", help="graph JSON file")
    p.add_argument("--target", default=None)

    p = sub.add_parser("encode", help="target -> DIMACS CNF and variable map")
    p.add_argument("--target", required=True)
    p.add_argument("--mode", default="bi")
    p.add_argument("--out", default=None)

    p = sub.add_parser("solve", help="decide a DIMACS CNF file")
    p.add_argument("cnf")
    p.add_argument("--budget-ms", type=float, default=None)
    p.add_argument("--external-solver", default=None, help="command line of a DIMACS solver")

    for name in ALGORITHMS:
        p = sub.add_parser(name, help=f"run {name} on a target")
        _common(p)
        if name in ("theseusopt", "klausopt"):
            p.add_argument("--start", default=None, help="starting solution/graph JSON (default: run theseus first)")

    p = sub.add_parser("conjecture", help="monochromatic GHZ(n, d) feasibility")
    p.add_argument("n", type=int)
    p.add_argument("d", type=int)
    p.add_argument("--budget-ms", type=float, default=None, help="time limit for the whole check")
    p.add_argument("--no-symmetry", action="store_true", help="one plain solve, no case split")
    p.add_argument("--dimacs", default=None, help="also write the CNF to this file")
    p.add_argument("--external-solver", default=None, help="cross-check with an external solver")

    p = sub.add_parser("bench", help="seeded benchmark suite -> CSV + summary JSON")
    p.add_argument("--target", action="append", default=None, help="repeatable; default: the standard suite")
    p.add_argument("--extended", action="store_true", help="standard suite plus GHZ_8_2")
    p.add_argument("--algorithm", action="append", default=None, choices=ALGORITHMS)
    p.add_argument("--runs", type=int, default=25)
    p.add_argument("--seed", type=int, default=None, help="first seed")
    p.add_argument("--mode", default="bi")
    p.add_argument("--sat-mode", default="free", choices=("fixed-true", "free"))
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--budget-ms", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="bench-out")
    return parser


def _emit(args, sol: DesignSolution, stem: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(sol.to_json())
        (out / f"{stem}.dot").write_text(graph_to_dot(sol.graph, stem.replace("-", "_")))
        print(f"{sol.algorithm}: {sol.edge_count} edges, fidelity {sol.fidelity:.6f}, -> {out}/{stem}.json")
    else:
        print(sol.to_json())


def _load_start(path: str) -> DesignSolution:
    text = Path(path).read_text()
    data = json.loads(text)
    if "fidelity" in data:
        return DesignSolution.from_dict(data)
    g = graph_from_json(text)
    return DesignSolution(g, 0.0, "input", False)


def _design(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    name, ket = resolve_target(args.target)
    ocfg = OptimizerConfig(seed=seed)
    if args.tau is not None:
        ocfg.tau = args.tau
    limit = args.budget_ms / 1000.0 if args.budget_ms is not None else None
    kcfg = KlausConfig(seed=seed, sat_mode=args.sat_mode, mode=args.mode, optimizer=ocfg, time_limit=limit)
    if args.command == "klaus":
        sol = klaus(ket, kcfg, name)
    elif args.command == "theseus":
        sol = theseus(ket, ocfg, args.mode, target_name=name)
    else:
        if args.start:
            start = _load_start(args.start)
        else:
            start = theseus(ket, ocfg, args.mode, target_name=name)
        if args.command == "theseusopt":
            if start.fidelity == 0.0 and start.algorithm == "input":
                start.fidelity = recompute_fidelity(start.graph, ket)
            sol = theseus_opt(start, ket, ocfg, target_name=name)
        else:
            sol = klaus_opt(start.graph, ket, kcfg, name)
    _emit(args, sol, f"{name}-{args.command}-{seed}")
    return EXIT_OK


def _conjecture(args) -> int:
    limit = args.budget_ms / 1000.0 if args.budget_ms is not None else None
    symmetry = not args.no_symmetry
    res = check_monochromatic_conjecture(args.n, args.d, symmetry=symmetry, time_limit=limit)
    if args.dimacs or args.external_solver:
        cnf = build_k(ghz(args.n, args.d), MONO).cnf
        if args.dimacs:
            Path(args.dimacs).write_text(to_dimacs(cnf, [f"monochromatic GHZ({args.n},{args.d}) feasibility"]))
        if args.external_solver:
            ext = solve_external(cnf, args.external_solver, limit)
            agree = ext.status == res.status
            print(f"external solver: {ext.status} ({'agrees' if agree else 'DISAGREES'})")
    print(res.status)
    print(f"cases={res.cases} conflicts={res.conflicts} elapsed={res.elapsed:.2f}s", file=sys.stderr)
    if res.witness is not None:
        print(graph_to_json(res.witness))
    return EXIT_OK if res.satisfiable else EXIT_INFEASIBLE


def _bench(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    suite = args.target or list(EXTENDED_SUITE if args.extended else DEFAULT_SUITE)
    algorithms = args.algorithm or list(ALGORITHMS)
    opts = BenchOptions(args.mode, args.sat_mode, args.tau, args.budget_ms)

    def progress(rec):
        status = rec.error or f"edges={rec.edges} fidelity={rec.fidelity:.4f}"
        print(f"{rec.algorithm:10s} {rec.target:14s} seed={rec.seed:<4d} {status}", file=sys.stderr)

    records = bench(suite, args.runs, algorithms, base_seed=seed, options=opts, workers=args.workers,
                    progress=progress)
    csv_path, json_path = write_outputs(records, args.out)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "state":
            g = graph_from_json(Path(args.graph).read_text())
            ket = graph_to_state(g)
            out = {"state": ket_to_dict(ket)}
            if args.target:
                _, target = resolve_target(args.target)
                out["fidelity"] = fidelity(target, ket)
            print(json.dumps(out, indent=2))
            return EXIT_OK
        if args.command == "encode":
            name, ket = resolve_target(args.target)
            enc = build_k(ket, args.mode)
            text = to_dimacs(enc.cnf, [f"feasibility of {name} ({enc.mode})",
                                       f"edge variables 1..{len(enc.variables)}"])
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / f"{name}.cnf").write_text(text)
                (out / f"{name}.varmap.json").write_text(varmap_json(enc.variables))
                print(f"wrote {out}/{name}.cnf and {out}/{name}.varmap.json")
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "solve":
            cnf = import_dimacs(Path(args.cnf).read_text())
            limit = args.budget_ms / 1000.0 if args.budget_ms is not None else None
            if args.external_solver:
                res = solve_external(cnf, args.external_solver, limit)
            else:
                res = solve(cnf, time_limit=limit)
            print(f"s {'SATISFIABLE' if res.satisfiable else 'UNSATISFIABLE'}")
            if res.satisfiable:
                lits = [v if res.model[v] else -v for v in range(1, cnf.num_vars + 1)]
                print("v " + " ".join(map(str, lits)) + " 0")
            return EXIT_OK if res.satisfiable else EXIT_INFEASIBLE
        if args.command == "conjecture":
            return _conjecture(args)
        if args.command == "bench":
            return _bench(args)
        return _design(args)
    except InfeasibleTarget as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (KlausError, KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
