"""Experiment harness: alpha/seed sweeps, model-size audits and loop counts."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

from .cases import BaseFeeder, CaseSpec, build_multicopy_case
from .cycles import count_simple_cycles
from .formulation import OpsfConfig, predict_radiality_model_size
from .milp import BINARY, CONTINUOUS, NoIncumbent, SolveOptions
from .network import Network, build_abstract_network, compute_load_blocks, model_stats
from .radiality import (DEFAULT_GAMMA, PREFIX, STRATEGIES, RadialityStrategy, StrategyError,
                        build_strategy_model, normalize_kind, solve_with_strategy)
from .validate import check_solution, rel_close

DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(11))
DEFAULT_SEEDS = tuple(range(1, 11))


# reference radiality sizes for a 71-node, 72-line, 11-switch, 9-block feeder
REFERENCE_BASE_SIZES = {
    "original_pc": {"constraints": 369, "binaries": 215, "continuous": 144},
    "abstracted_pc": {"constraints": 61, "binaries": 31, "continuous": 22},
}


class SizeAuditError(AssertionError):
    pass


@dataclass
class SweepSpec:
    alphas: Sequence[float] = DEFAULT_ALPHAS
    seeds: Sequence[int] = DEFAULT_SEEDS
    strategies: Sequence[str] = STRATEGIES
    copies: int = 1
    time_limit_s: float | None = None
    backend: str = "highs"
    gamma: float = DEFAULT_GAMMA
    max_iter: int = 1000
    max_cycles: int | None = 1_000_000
    max_enum_seconds: float | None = 600.0
    workers: int = 1
    base: BaseFeeder | None = field(default=None, repr=False)

    def __post_init__(self):
        self.alphas = [float(a) for a in self.alphas]
        self.seeds = [int(s) for s in self.seeds]
        self.strategies = [normalize_kind(s) for s in self.strategies]
        if not (self.alphas and self.seeds and self.strategies):
            raise ValueError("alphas, seeds and strategies must be nonempty")
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if self.copies < 1:
            raise ValueError("copies must be at least 1")


@dataclass
class SweepRecord:
    strategy: str
    copies: int
    alpha: float
    seed: int
    status: str
    objective: float = float("nan")
    tradeoff_objective: float = float("nan")
    risk_served: float = float("nan")
    load_served: float = float("nan")
    solve_seconds: float = float("nan")
    iterations: int | None = None
    loops_generated: int | None = None
    model_constraints: int | None = None
    model_binaries: int | None = None
    model_continuous: int | None = None
    validator_clean: bool | None = None
    message: str = ""

    @property
    def key(self) -> tuple:
        return (STRATEGIES.index(self.strategy), self.alpha, self.seed)


CSV_COLUMNS = [f.name for f in fields(SweepRecord)]
TIMING_COLUMNS = ("solve_seconds",)


def git_blob_hash(data: bytes) -> str:
    """Content hash as ``git hash-object`` computes it."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _solve_cell(net: Network, copies: int, strategy: str, alpha: float, seed: int,
                spec: SweepSpec) -> SweepRecord:
    part = compute_load_blocks(net)
    abs_net = build_abstract_network(net, part)
    strat = RadialityStrategy(strategy, gamma=spec.gamma, max_iter=spec.max_iter,
                              max_cycles=spec.max_cycles,
                              max_enum_seconds=spec.max_enum_seconds)
    cfg = OpsfConfig(alpha=alpha, gamma=strat.gamma)
    rec = SweepRecord(strategy, copies, alpha, seed, "error")
    try:
        sol = solve_with_strategy(net, cfg, strat, spec.backend,
                                  SolveOptions(time_limit_s=spec.time_limit_s),
                                  part=part, abs_net=abs_net)
    except (StrategyError, NoIncumbent) as exc:
        rec.status = getattr(exc, "status", "") or type(exc).__name__
        rec.message = str(exc)
        return rec
    report = check_solution(net, part, abs_net, sol, cfg)
    rec.status = "optimal" if report.clean else "invalid"
    rec.objective = sol.objective
    rec.tradeoff_objective = sol.tradeoff_objective
    rec.risk_served = sol.risk_served
    rec.load_served = sol.load_served
    rec.solve_seconds = sol.solve_seconds
    rec.iterations = sol.meta.get("iterations")
    rec.loops_generated = sol.meta.get("loops_generated")
    rec.model_constraints = sol.meta.get("model_constraints")
    rec.model_binaries = sol.meta.get("model_binaries")
    rec.model_continuous = sol.meta.get("model_continuous")
    rec.validator_clean = report.clean
    if not report.clean:
        rec.message = "; ".join(f.detail for f in report.violations[:3])
    return rec


def _run_group(args) -> list[SweepRecord]:
    net_json, copies, cells, spec = args
    from .network import network_from_dict

    net = network_from_dict(json.loads(net_json))
    return [_solve_cell(net, copies, st, a, seed, spec) for st, a, seed in cells]


def build_cases(spec: SweepSpec) -> dict[int, Network]:
    return {seed: build_multicopy_case(CaseSpec(spec.base, spec.copies, seed))
            for seed in spec.seeds}


def run_sweep(spec: SweepSpec, cases: dict[int, Network] | None = None
              ) -> tuple[list[SweepRecord], dict]:
    """Solve every (strategy, alpha, seed) cell and summarise.

    Failed solves become records with a non-optimal status.  Each solution
    passes through the validator before it is recorded as optimal.
    """
    cases = cases or build_cases(spec)
    jobs = []
    for seed in spec.seeds:
        payload = cases[seed].to_json()
        for st in spec.strategies:
            # one job per (seed, strategy) keeps the iterative cells sequential
            jobs.append((payload, spec.copies, [(st, a, seed) for a in spec.alphas], spec))
    records: list[SweepRecord] = []
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            for out in pool.map(_run_group, jobs):
                records.extend(out)
    else:
        for job in jobs:
            records.extend(_run_group(job))
    records.sort(key=lambda r: r.key)
    return records, summarize(records)


def summarize(records: Iterable[SweepRecord]) -> dict:
    records = list(records)
    groups: dict[tuple, list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.strategy, r.alpha), []).append(r)
    rows = []
    for (st, a), recs in sorted(groups.items(), key=lambda kv: (STRATEGIES.index(kv[0][0]),
                                                                 kv[0][1])):
        times = [r.solve_seconds for r in recs if r.status == "optimal"]
        rows.append({"strategy": st, "alpha": a, "solved": len(times), "cells": len(recs),
                     "median_s": statistics.median(times) if times else None,
                     "min_s": min(times) if times else None,
                     "max_s": max(times) if times else None})
    mismatches = equivalence_mismatches(records)
    invalid = [asdict(r) for r in records if r.status == "invalid"]
    return {"timing": rows, "equivalence_mismatches": mismatches, "invalid_records": invalid,
            "hard_checks_passed": not mismatches and not invalid}


def equivalence_mismatches(records: Iterable[SweepRecord]) -> list[dict]:
    """Cells where two optimal strategies disagree on the risk/load objective."""
    cells: dict[tuple, list[SweepRecord]] = {}
    for r in records:
        if r.status == "optimal":
            cells.setdefault((r.copies, r.alpha, r.seed), []).append(r)
    out = []
    for (copies, a, seed), recs in sorted(cells.items()):
        ref = recs[0]
        for r in recs[1:]:
            if not rel_close(ref.tradeoff_objective, r.tradeoff_objective):
                out.append({"copies": copies, "alpha": a, "seed": seed,
                            ref.strategy: ref.tradeoff_objective,
                            r.strategy: r.tradeoff_objective})
    return out


def write_records_csv(records: Sequence[SweepRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = asdict(r)
            w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float)
                                                   else row[c]) for c in CSV_COLUMNS])


def write_summary_csv(summary: dict, path: str | Path) -> None:
    cols = ["strategy", "alpha", "solved", "cells", "median_s", "min_s", "max_s"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in summary["timing"]:
            w.writerow(row)


def write_sweep_outputs(spec: SweepSpec, cases: dict[int, Network],
                        records: Sequence[SweepRecord], summary: dict,
                        out_dir: str | Path) -> dict:
    """Write cases, the record CSV, the timing summary and a JSON sidecar."""
    out = Path(out_dir)
    (out / "cases").mkdir(parents=True, exist_ok=True)
    hashes = {}
    for seed, net in sorted(cases.items()):
        data = net.to_json().encode()
        name = f"case-c{spec.copies}-s{seed}.json"
        (out / "cases" / name).write_bytes(data)
        hashes[name] = git_blob_hash(data)
    write_records_csv(records, out / "sweep.csv")
    write_summary_csv(summary, out / "timing_summary.csv")
    import scipy

    side = {"spec": {f.name: getattr(spec, f.name) for f in fields(spec) if f.name != "base"},
            "csv_columns": CSV_COLUMNS, "case_hashes": hashes,
            "backend": {"name": spec.backend, "scipy": scipy.__version__,
                        "python": platform.python_version()},
            "equivalence_mismatches": summary["equivalence_mismatches"],
            "hard_checks_passed": summary["hard_checks_passed"],
            "created_unix": int(time.time())}
    (out / "sweep.json").write_text(json.dumps(side, indent=1, default=str) + "\n")
    return side


# ---------------------------------------------------------------------------
# model-size audit
# ---------------------------------------------------------------------------

@dataclass
class AuditRow:
    copies: int
    stats: dict
    predicted: dict
    audited: dict

    @property
    def consistent(self) -> bool:
        return self.predicted == self.audited


def audit_network_sizes(net: Network) -> tuple[dict, dict, dict]:
    """Stats, predicted and tag-audited radiality sizes of both parent-child variants."""
    part = compute_load_blocks(net)
    abs_net = build_abstract_network(net, part)
    stats = model_stats(net, part, abs_net)
    predicted, audited = {}, {}
    for kind in ("original_pc", "abstracted_pc"):
        predicted[kind] = predict_radiality_model_size(kind, stats)
        model, _, _ = build_strategy_model(net, part, abs_net, OpsfConfig(alpha=0.5), kind)
        prefix = PREFIX[kind]
        audited[kind] = {"constraints": model.count_constraints(prefix),
                         "binaries": model.count_variables(prefix, BINARY),
                         "continuous": model.count_variables(prefix, CONTINUOUS)}
    return stats, predicted, audited


def audit_model_sizes(copies: Iterable[int], base: BaseFeeder | None = None,
                      seed: int = 1) -> list[AuditRow]:
    """Predicted versus built sizes; raises :class:`SizeAuditError` on any mismatch."""
    rows = []
    for k in copies:
        net = build_multicopy_case(CaseSpec(base, k, seed))
        stats, predicted, audited = audit_network_sizes(net)
        for kind in predicted:
            for what in ("constraints", "binaries", "continuous"):
                if predicted[kind][what] != audited[kind][what]:
                    raise SizeAuditError(
                        f"copies={k}: {what} under prefix {PREFIX[kind]!r} built "
                        f"{audited[kind][what]}, formula predicts {predicted[kind][what]}")
        rows.append(AuditRow(k, stats, predicted, audited))
    return rows


def audit_rows_table(rows: Sequence[AuditRow]) -> list[dict]:
    out = []
    for r in rows:
        row = {"copies": r.copies}
        row.update({k: r.stats[k] for k in ("nodes", "lines", "switches", "blocks",
                                            "substations")})
        for kind, tag in (("original_pc", "orig"), ("abstracted_pc", "abs")):
            for what in ("constraints", "binaries", "continuous"):
                row[f"{tag}_{what}_pred"] = r.predicted[kind][what]
                row[f"{tag}_{what}_built"] = r.audited[kind][what]
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# loop counts
# ---------------------------------------------------------------------------

@dataclass
class LoopRow:
    copies: int
    blocks: int
    switches: int
    loops: int
    complete: bool
    seconds: float

    @property
    def display(self) -> str:
        return f"{self.loops}" if self.complete else f"{self.loops}+"


def report_loops(copies: Iterable[int], max_cycles: int | None = None,
                 max_seconds: float | None = None, base: BaseFeeder | None = None
                 ) -> list[LoopRow]:
    rows = []
    for k in copies:
        net = build_multicopy_case(CaseSpec(base, k, 1))
        part = compute_load_blocks(net)
        abs_net = build_abstract_network(net, part)
        n, complete, secs = count_simple_cycles(abs_net, max_cycles, max_seconds)
        rows.append(LoopRow(k, len(abs_net.block_nodes), len(abs_net.switched_edges), n,
                            complete, secs))
    return rows


def write_dicts_csv(rows: Sequence[dict], path: str | Path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
