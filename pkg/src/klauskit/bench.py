"""Seeded comparison of the four design algorithms over a suite of targets.

One record per (algorithm, target, seed). The CSV holds the raw records; the
summary JSON holds mean and standard deviation per (algorithm, target) cell,
always recomputed from the records. Failed runs keep a row with empty
numeric fields and are left out of the statistics.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import KlausError
from .graph import BI
from .klaus import KlausConfig, klaus, klaus_opt
from .optimizer import OptimizerConfig, theseus, theseus_opt
from .solution import DesignSolution, recompute_fidelity
from .state import Ket, get_target, ket_from_json

ALGORITHMS = ("klaus", "theseus", "theseusopt", "klausopt")

DEFAULT_SUITE = ("GHZ_4_3", "GHZ_6_2", "SRV_544", "SRV_644", "SRV_654", "SRV_955",
                 "GHZ_6_3", "SRV_544_star", "SRV_644_star")
EXTENDED_SUITE = DEFAULT_SUITE + ("GHZ_8_2",)

CSV_COLUMNS = ("algorithm", "target", "seed", "edges", "fidelity", "total_ms", "encode_ms",
               "sat_ms", "opt_ms", "converged")
TIMING_COLUMNS = ("total_ms", "encode_ms", "sat_ms", "opt_ms")
STAT_COLUMNS = ("edges", "fidelity") + TIMING_COLUMNS


@dataclass
class BenchOptions:
    mode: str = BI
    sat_mode: str = "free"
    tau: float | None = None
    budget_ms: float | None = None


@dataclass
class BenchRecord:
    algorithm: str
    target: str
    seed: int
    edges: int | None = None
    fidelity: float | None = None
    total_ms: float | None = None
    encode_ms: float | None = None
    sat_ms: float | None = None
    opt_ms: float | None = None
    converged: bool | None = None
    sat_mode: str | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def resolve_target(name: str) -> tuple[str, Ket]:
    """Library name, or a path to a target-state JSON file (named after its stem)."""
    path = Path(name)
    if path.suffix == ".json" or path.exists():
        return path.stem, ket_from_json(path.read_text())
    return name, get_target(name).ket


def is_starred(name: str) -> bool:
    try:
        return get_target(name).graph_representable is False
    except KeyError:
        return False


def display_name(name: str) -> str:
    """Suite label; targets with no exact graph carry a trailing ``*``."""
    return name + "*" if is_starred(name) else name


def run_algorithm(algorithm: str, target: Ket, seed: int, options: BenchOptions | None = None,
                  target_name: str = "") -> DesignSolution:
    options = options or BenchOptions()
    ocfg = OptimizerConfig(seed=seed)
    if options.tau is not None:
        ocfg.tau = options.tau
    limit = options.budget_ms / 1000.0 if options.budget_ms is not None else None
    kcfg = KlausConfig(seed=seed, sat_mode=options.sat_mode, mode=options.mode, optimizer=ocfg,
                       time_limit=limit)
    if algorithm == "klaus":
        return klaus(target, kcfg, target_name)
    start = theseus(target, ocfg, options.mode, target_name=target_name)
    if algorithm == "theseus":
        return start
    if algorithm == "theseusopt":
        sol = theseus_opt(start, target, ocfg, target_name=target_name)
    elif algorithm == "klausopt":
        sol = klaus_opt(start.graph, target, kcfg, target_name)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    # the finishers report their own phases; the Theseus run they start from counts too
    sol.elapsed["opt_ms"] = sol.phase_ms("opt_ms") + start.phase_ms("opt_ms")
    sol.elapsed["total_ms"] = sol.phase_ms("total_ms") + start.phase_ms("total_ms")
    sol.notes.append(f"start_edges={start.edge_count}")
    return sol


def run_cell(algorithm: str, target: str, seed: int, options: BenchOptions | None = None) -> BenchRecord:
    rec = BenchRecord(algorithm, target, seed)
    try:
        name, ket = resolve_target(target)
        rec.target = name
        sol = run_algorithm(algorithm, ket, seed, options, name)
    except (KlausError, ValueError, KeyError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        return rec
    rec.edges = sol.edge_count
    rec.fidelity = recompute_fidelity(sol.graph, ket)
    for col in TIMING_COLUMNS:
        setattr(rec, col, sol.phase_ms(col))
    rec.converged = sol.converged
    rec.sat_mode = sol.sat_mode
    return rec


def _run_cell_args(args):
    return run_cell(*args)


def bench(suite: Sequence[str] = DEFAULT_SUITE, runs: int = 25, algorithms: Sequence[str] = ALGORITHMS,
          seeds: Sequence[int] | None = None, base_seed: int = 0, options: BenchOptions | None = None,
          workers: int = 1, progress=None) -> list[BenchRecord]:
    """Run every (algorithm, target, seed) cell; records come back in a fixed order."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    seeds = list(seeds) if seeds is not None else list(range(base_seed, base_seed + runs))
    jobs = [(a, t, s, options) for t in suite for a in algorithms for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = []
            for rec in pool.map(_run_cell_args, jobs):
                records.append(rec)
                if progress:
                    progress(rec)
            return records
    records = []
    for job in jobs:
        rec = run_cell(*job)
        records.append(rec)
        if progress:
            progress(rec)
    return records


# -- output --------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: Iterable[BenchRecord], timing: bool = True) -> str:
    """CSV text; with ``timing=False`` the timing columns are blanked (for comparisons)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        row = []
        for col in CSV_COLUMNS:
            value = getattr(rec, col)
            row.append("" if (not timing and col in TIMING_COLUMNS) else _fmt(value))
        writer.writerow(row)
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        out = {"algorithm": row["algorithm"], "target": row["target"], "seed": int(row["seed"])}
        for col in STAT_COLUMNS:
            out[col] = float(row[col]) if row[col] != "" else None
        out["converged"] = {"true": True, "false": False}.get(row["converged"])
        rows.append(out)
    return rows


def summarize(rows: Iterable) -> dict:
    """Mean and population standard deviation per (algorithm, target) cell."""
    cells: dict[tuple[str, str], list] = {}
    for r in rows:
        r = asdict(r) if isinstance(r, BenchRecord) else r
        cells.setdefault((r["algorithm"], r["target"]), []).append(r)
    out = []
    for (alg, target), rs in cells.items():
        good = [r for r in rs if r.get("edges") is not None]
        entry = {"algorithm": alg, "target": target, "label": display_name(target),
                 "runs": len(rs), "failures": len(rs) - len(good)}
        for col in STAT_COLUMNS:
            vals = np.array([float(r[col]) for r in good], dtype=float)
            entry[col] = ({"mean": float(vals.mean()), "std": float(vals.std())} if len(vals)
                          else {"mean": None, "std": None})
        entry["converged_rate"] = (sum(bool(r["converged"]) for r in good) / len(good)) if good else None
        out.append(entry)
    return {"cells": out}


def write_outputs(records: Sequence[BenchRecord], out_dir: str | os.PathLike) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bench.csv"
    csv_path.write_text(records_to_csv(records))
    summary = summarize(read_csv(csv_path.read_text()))
    summary["errors"] = [
        {"algorithm": r.algorithm, "target": r.target, "seed": r.seed, "error": r.error}
        for r in records if r.error
    ]
    json_path = out / "summary.json"
    json_path.write_text(json.dumps(summary, indent=2))
    return csv_path, json_path
