"""Command-line interface: ``opsf <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (REFERENCE_BASE_SIZES, SizeAuditError, SweepSpec, audit_model_sizes,
                    audit_rows_table, build_cases, report_loops, run_sweep, write_dicts_csv,
                    write_sweep_outputs)
from .cases import CaseSpec, build_multicopy_case, load_base
from .formulation import OpsfConfig, solution_from_dict
from .milp import NoIncumbent, SolveOptions, available_backends
from .network import (NetworkError, block_warnings, build_abstract_network, compute_load_blocks,
                      parse_network)
from .radiality import (DEFAULT_GAMMA, STRATEGIES, RadialityStrategy, StrategyError,
                        solve_with_strategy)
from .validate import check_solution

log = logging.getLogger("opsf")

FORMULATIONS = [s.replace("_", "-") for s in STRATEGIES]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--backend", default=d("highs"), choices=["highs", "glpk"],
                   help="MILP backend (default highs)")
    p.add_argument("--time-limit", type=float, default=d(None), metavar="S",
                   help="per-solve time limit in seconds")
    p.add_argument("--workers", type=int, default=d(1), help="parallel sweep workers")
    p.add_argument("--out-dir", default=d("opsf-out"), help="directory for outputs")


def _strategy_flags(p: argparse.ArgumentParser, many: bool = False) -> None:
    if many:
        p.add_argument("--formulations", default=",".join(FORMULATIONS),
                       help="comma-separated subset of " + ", ".join(FORMULATIONS))
    else:
        p.add_argument("--formulation", default="abstracted-pc", choices=FORMULATIONS)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA,
                   help="closed-switch penalty of the iterative loop strategy")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--max-cycles", type=int, default=1_000_000)
    p.add_argument("--max-enum-seconds", type=float, default=600.0)


def _case_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--base", help="external base feeder JSON (default: bundled feeder)")
    p.add_argument("--risk-variance", type=float, default=0.25)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opsf", description="Optimal power shut-off with "
                                 "interchangeable radiality formulations.")
    _global_flags(ap, suppress=False)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("gen-case", parents=[common], help="write a multi-copy case JSON")
    _case_flags(p)
    p.add_argument("--out", required=True, help="output network JSON")

    p = sub.add_parser("solve", parents=[common], help="solve one instance")
    p.add_argument("--network", help="network JSON (default: generate from --copies/--seed)")
    _case_flags(p)
    p.add_argument("--alpha", type=float, default=0.5)
    _strategy_flags(p)
    p.add_argument("--certify", action="store_true",
                   help="iterative strategy: re-solve without the penalty as a check")
    p.add_argument("--out", help="solution JSON path (default OUT_DIR/solution.json)")

    p = sub.add_parser("sweep", parents=[common], help="alpha/seed sweep over strategies")
    p.add_argument("--copies", type=int, default=1)
    p.add_argument("--base")
    p.add_argument("--alphas", type=_floats, default=None, help="e.g. 0,0.5,1")
    p.add_argument("--seeds", type=_ints, default=None, help="e.g. 1-10 or 1,3,5")
    _strategy_flags(p, many=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("audit-sizes", parents=[common],
                       help="predicted vs built parent-child model sizes")
    p.add_argument("--copies", type=_ints, default=[1, 2, 4, 8, 16])
    p.add_argument("--base")
    p.add_argument("--check-reference", action="store_true",
                   help="also require the single-copy sizes to equal the reference ones")

    p = sub.add_parser("report-loops", parents=[common], help="simple-cycle counts per case")
    p.add_argument("--copies", type=_ints, default=[1, 2, 4, 8])
    p.add_argument("--base")
    p.add_argument("--max-cycles", type=int, default=1_000_000)
    p.add_argument("--max-enum-seconds", type=float, default=600.0)

    p = sub.add_parser("validate", parents=[common], help="check a solution file")
    p.add_argument("--network", required=True)
    p.add_argument("--solution", required=True)
    return ap


def _base(args):
    return load_base(args.base) if getattr(args, "base", None) else None


def _print_table(rows: list[dict]) -> None:
    if not rows:
        return
    cols = list(rows[0])
    width = {c: max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in cols}
    print("  ".join(c.rjust(width[c]) for c in cols))
    for r in rows:
        print("  ".join(_fmt(r[c]).rjust(width[c]) for c in cols))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return "" if v is None else str(v)


def cmd_gen_case(args) -> int:
    net = build_multicopy_case(CaseSpec(_base(args), args.copies, args.seed, args.risk_variance))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    net.save(args.out)
    st = net.stats()
    print(f"wrote {args.out}: {st['nodes']} nodes, {st['lines']} lines, "
          f"{st['switches']} switches")
    return 0


def cmd_solve(args) -> int:
    if args.network:
        net = parse_network(args.network)
    else:
        net = build_multicopy_case(CaseSpec(_base(args), args.copies, args.seed,
                                            args.risk_variance))
    part = compute_load_blocks(net)
    abs_net = build_abstract_network(net, part)
    for w in block_warnings(net, part):
        log.info("warning: %s", w)
    strat = RadialityStrategy(args.formulation, gamma=args.gamma, max_iter=args.max_iter,
                              max_cycles=args.max_cycles, max_enum_seconds=args.max_enum_seconds,
                              certify=args.certify)
    cfg = OpsfConfig(alpha=args.alpha, gamma=strat.gamma)
    try:
        sol = solve_with_strategy(net, cfg, strat, args.backend,
                                  SolveOptions(time_limit_s=args.time_limit), part, abs_net)
    except (StrategyError, NoIncumbent) as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return 2
    report = check_solution(net, part, abs_net, sol, cfg)
    out = Path(args.out) if args.out else Path(args.out_dir) / "solution.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sol.to_json())
    print(f"{strat.kind}: objective {sol.objective:.6f} (risk {sol.risk_served:.4f}, "
          f"load {sol.load_served:.4f}), {len(sol.energized)}/{len(part.blocks)} blocks on, "
          f"{len(sol.closed_switches)} switches closed, {sol.solve_seconds:.2f} s")
    print(f"validator: {'clean' if report.clean else 'VIOLATIONS'}; solution written to {out}")
    for f in report.violations:
        print(f"  [{f.kind}] {f.detail}")
    return 0 if report.clean else 1


def cmd_sweep(args) -> int:
    kw = {}
    if args.alphas is not None:
        kw["alphas"] = args.alphas
    if args.seeds is not None:
        kw["seeds"] = args.seeds
    spec = SweepSpec(strategies=args.formulations.split(","), copies=args.copies,
                     time_limit_s=args.time_limit, backend=args.backend, gamma=args.gamma,
                     max_iter=args.max_iter, max_cycles=args.max_cycles,
                     max_enum_seconds=args.max_enum_seconds, workers=args.workers,
                     base=_base(args), **kw)
    cases = build_cases(spec)
    records, summary = run_sweep(spec, cases)
    write_sweep_outputs(spec, cases, records, summary, args.out_dir)
    if not args.no_figures:
        from .plotting import render_sweep_figures

        for path in render_sweep_figures(records, args.out_dir):
            print(f"figure: {path}")
    _print_table(summary["timing"])
    bad = [r for r in records if r.status != "optimal"]
    print(f"{len(records)} records, {len(bad)} not optimal, "
          f"{len(summary['equivalence_mismatches'])} equivalence mismatches; "
          f"outputs in {args.out_dir}")
    return 0 if summary["hard_checks_passed"] else 1


def cmd_audit_sizes(args) -> int:
    try:
        rows = audit_model_sizes(args.copies, _base(args))
    except SizeAuditError as exc:
        print(f"size audit failed: {exc}", file=sys.stderr)
        return 1
    table = audit_rows_table(rows)
    _print_table(table)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    write_dicts_csv(table, Path(args.out_dir) / "audit_sizes.csv")
    status = 0
    for r in rows:
        if r.copies != 1:
            continue
        for kind, ref in REFERENCE_BASE_SIZES.items():
            got = r.audited[kind]
            same = got == ref
            print(f"copies=1 {kind}: built {tuple(got.values())}, reference "
                  f"{tuple(ref.values())} -> {'match' if same else 'MISMATCH'}")
            if not same and args.check_reference:
                status = 1
    return status


def cmd_report_loops(args) -> int:
    rows = report_loops(args.copies, args.max_cycles, args.max_enum_seconds, _base(args))
    table = [{"copies": r.copies, "blocks": r.blocks, "switches": r.switches,
              "loops": r.display, "complete": r.complete, "seconds": round(r.seconds, 3)}
             for r in rows]
    _print_table(table)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    write_dicts_csv(table, Path(args.out_dir) / "loops.csv")
    return 0


def cmd_validate(args) -> int:
    net = parse_network(args.network)
    part = compute_load_blocks(net)
    abs_net = build_abstract_network(net, part)
    doc = json.loads(Path(args.solution).read_text())
    sol = solution_from_dict(doc, net, part)
    report = check_solution(net, part, abs_net, sol)
    text = report.to_json()
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    (Path(args.out_dir) / "validation.json").write_text(text)
    sys.stdout.write(text)
    return 0 if report.clean else 1


COMMANDS = {"gen-case": cmd_gen_case, "solve": cmd_solve, "sweep": cmd_sweep,
            "audit-sizes": cmd_audit_sizes, "report-loops": cmd_report_loops,
            "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.backend not in available_backends():
        print(f"backend {args.backend!r} is not available", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
