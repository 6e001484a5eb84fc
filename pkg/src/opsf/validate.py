"""Formulation-blind checks of an OPSF solution.

Only the physical decision values (block energization, switch states,
flows, voltages and generator outputs) are inspected.  Parent-child or
virtual-flow variables never reach this module, so a buggy radiality
formulation cannot vouch for itself.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .cycles import Cycle, find_cycle
from .formulation import OpsfConfig, Solution, generator_limits
from .network import (AbstractNetwork, BlockPartition, Network, id_key, sorted_ids,
                      validate_internal_radiality)

ABS_TOL = 1e-6
REL_TOL = 1e-6


def rel_close(a: float, b: float, tol: float = REL_TOL) -> bool:
    """``|a - b| <= tol * max(1, |a|, |b|)``."""
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@dataclass
class Finding:
    kind: str
    element: str
    detail: str
    magnitude: float = 0.0


@dataclass
class ValidationReport:
    radial: bool = True
    isolation_ok: bool = True
    flow_gating_ok: bool = True
    voltage_ok: bool = True
    limits_ok: bool = True
    balance_residual_max: float = 0.0
    recomputed_objective: float = 0.0
    objective_ok: bool = True
    witness_cycle: list | None = None
    violations: list[Finding] = field(default_factory=list)

    @property
    def balance_ok(self) -> bool:
        return self.balance_residual_max <= ABS_TOL

    @property
    def clean(self) -> bool:
        return (self.radial and self.isolation_ok and self.flow_gating_ok and self.voltage_ok
                and self.limits_ok and self.balance_ok and self.objective_ok)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["balance_ok"] = self.balance_ok
        out["clean"] = self.clean
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=str) + "\n"


def check_radiality(abs_net: AbstractNetwork, closed: Iterable) -> tuple[bool, Cycle | None]:
    """Whether the closed switched edges form a forest, with a witness cycle if not."""
    closed = set(closed)
    edges = [(e.line, e.m, e.n) for e in abs_net.switched_edges if e.line in closed]
    witness = find_cycle(edges)
    return witness is None, witness


def check_solution(net: Network, part: BlockPartition, abs_net: AbstractNetwork,
                   sol: Solution, cfg: OpsfConfig | None = None,
                   tol: float = ABS_TOL) -> ValidationReport:
    cfg = cfg or OpsfConfig(alpha=sol.alpha, gamma=sol.gamma)
    rep = ValidationReport()
    bad = rep.violations.append
    z = {b: int(sol.z.get(b, 0)) for b in part.blocks}
    s = {e.line: int(sol.s.get(e.line, 0)) for e in abs_net.switched_edges}
    zero = lambda d, k: float(d.get(k, 0.0))

    # topology
    for v in validate_internal_radiality(net, part):
        rep.radial = False
        bad(Finding("radiality", str(v.block), v.detail))
    ok, witness = check_radiality(abs_net, [l for l, v in s.items() if v])
    if not ok:
        rep.radial = False
        rep.witness_cycle = list(witness.edges)
        bad(Finding("radiality", ",".join(map(str, witness.edges)),
                    f"closed switches form a loop through blocks {list(witness.blocks)}"))

    for e in abs_net.switched_edges:
        if s[e.line] and z[e.m] != z[e.n]:
            rep.isolation_ok = False
            bad(Finding("isolation", str(e.line),
                        f"closed switch {e.line!r} joins block {e.m!r} (z={z[e.m]}) "
                        f"and block {e.n!r} (z={z[e.n]})"))

    # lines: gating, limits, voltage drop
    for lid in sorted_ids(net.lines):
        ln = net.lines[lid]
        p, q = zero(sol.p, lid), zero(sol.q, lid)
        on = s[lid] if ln.is_switch else z[part.node_to_block[ln.from_node]]
        if not on and max(abs(p), abs(q)) > tol:
            rep.flow_gating_ok = False
            what = "open switch" if ln.is_switch else "line of a de-energized block"
            bad(Finding("gating", str(lid), f"{what} {lid!r} carries p={p:.3g}, q={q:.3g}",
                        max(abs(p), abs(q))))
        if abs(p) > ln.pmax + tol or abs(q) > ln.qmax + tol:
            rep.limits_ok = False
            bad(Finding("flow-limit", str(lid), f"line {lid!r} flow ({p:.6g}, {q:.6g}) "
                        f"exceeds ({ln.pmax:g}, {ln.qmax:g})"))
        if on:
            wi, wj = zero(sol.w, ln.from_node), zero(sol.w, ln.to_node)
            resid = abs(wj - wi + 2.0 * (ln.r * p + ln.x * q))
            if resid > tol:
                rep.voltage_ok = False
                bad(Finding("voltage-drop", str(lid),
                            f"line {lid!r} voltage drop residual {resid:.3g}", resid))

    for nid in sorted_ids(net.nodes):
        nd = net.nodes[nid]
        w = zero(sol.w, nid)
        if w < nd.vmin ** 2 - tol or w > nd.vmax ** 2 + tol:
            rep.voltage_ok = False
            bad(Finding("voltage-bound", str(nid), f"node {nid!r} squared voltage {w:.6g} "
                        f"outside [{nd.vmin ** 2:.6g}, {nd.vmax ** 2:.6g}]"))

    # generators
    for gid in sorted_ids(net.generators):
        g = net.generators[gid]
        on = z[part.node_to_block[g.node]]
        pmin, pmax, qmin, qmax = generator_limits(net, g)
        pg, qg = zero(sol.pg, gid), zero(sol.qg, gid)
        lo_p, hi_p = (pmin, pmax) if on else (0.0, 0.0)
        lo_q, hi_q = (qmin, qmax) if on else (0.0, 0.0)
        if pg < lo_p - tol or pg > hi_p + tol or qg < lo_q - tol or qg > hi_q + tol:
            if on:
                rep.limits_ok = False
                kind = "generator-limit"
            else:
                rep.flow_gating_ok = False
                kind = "gating"
            bad(Finding(kind, str(gid), f"generator {gid!r} output ({pg:.6g}, {qg:.6g}) "
                        f"outside its {'limits' if on else 'zero band (block off)'}"))

    # nodal balance
    worst = 0.0
    for nid in sorted_ids(net.nodes):
        nd = net.nodes[nid]
        on = z[part.node_to_block[nid]]
        w = zero(sol.w, nid)
        res_p = res_q = 0.0
        for ln in net.lines_out(nid):
            res_p += zero(sol.p, ln.id)
            res_q += zero(sol.q, ln.id)
        for ln in net.lines_in(nid):
            res_p -= zero(sol.p, ln.id)
            res_q -= zero(sol.q, ln.id)
        for gid in nd.generators:
            res_p -= zero(sol.pg, gid)
            res_q -= zero(sol.qg, gid)
        if on:
            res_p += sum(net.loads[d].pd for d in nd.loads)
            res_q += sum(net.loads[d].qd for d in nd.loads)
            res_p += sum(net.shunts[h].g for h in nd.shunts) * w
            res_q += sum(net.shunts[h].b for h in nd.shunts) * w
        r = max(abs(res_p), abs(res_q))
        if r > tol:
            bad(Finding("balance", str(nid), f"node {nid!r} balance residual {r:.3g}", r))
        worst = max(worst, r)
    rep.balance_residual_max = worst

    # objective
    risk = sum(part.block_risk[b] for b, v in z.items() if v)
    load = sum(part.block_load[b] for b, v in z.items() if v)
    obj = (1.0 - cfg.alpha) * risk - cfg.alpha * load + cfg.gamma * sum(s.values())
    rep.recomputed_objective = obj
    if sol.objective == sol.objective and not rel_close(obj, sol.objective):
        rep.objective_ok = False
        bad(Finding("objective", "objective", f"reported {sol.objective:.9g} but the "
                    f"energization and switch states give {obj:.9g}",
                    abs(obj - sol.objective)))
    rep.violations.sort(key=lambda f: (f.kind, id_key(f.element)))
    return rep
