"""Optimal power shut-off MILP without radiality constraints.

The model chooses which load blocks stay energized (``z``) and which
switches are closed (``s``) to trade wildfire risk against load served,
subject to lossless linearised DistFlow physics.  Radiality is added on top
by :mod:`opsf.radiality`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .milp import GE, LE, EQ, LinExpr, MilpModel, SolveResult, Var
from .network import (AbstractNetwork, BlockPartition, Network, NetworkError, id_key,
                      sorted_ids, validate_internal_radiality)

BINARY_THRESHOLD = 0.5


class FormulationError(ValueError):
    pass


@dataclass
class OpsfConfig:
    alpha: float = 0.5
    gamma: float = 0.0
    big_m: float | str = "per-line"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise FormulationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.gamma < 0:
            raise FormulationError(f"gamma must be nonnegative, got {self.gamma}")
        if self.big_m != "per-line" and not (isinstance(self.big_m, (int, float)) and self.big_m > 0):
            raise FormulationError(f"big_m must be 'per-line' or a positive number")


@dataclass
class OpsfVars:
    z: dict
    s: dict
    w: dict
    p: dict
    q: dict
    pg: dict
    qg: dict
    wz: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, repr=False)

    def flow(self, line_id, sending_node) -> tuple[LinExpr, LinExpr]:
        """Active and reactive flow on ``line_id`` leaving ``sending_node``.

        One variable per line is stored in the from->to direction; reading it
        from the other end flips the sign (lossless lines).
        """
        ln = self.lines[line_id]
        sign = 1.0 if sending_node == ln.from_node else -1.0
        if sending_node not in (ln.from_node, ln.to_node):
            raise KeyError(f"node {sending_node!r} is not an end of line {line_id!r}")
        return self.p[line_id] * sign, self.q[line_id] * sign


def big_m_for_line(net: Network, line, policy: float | str = "per-line") -> float:
    if policy != "per-line":
        return float(policy)
    ni, nj = net.nodes[line.from_node], net.nodes[line.to_node]
    span = max(ni.vmax ** 2 - nj.vmin ** 2, nj.vmax ** 2 - ni.vmin ** 2)
    return span + 2.0 * (abs(line.r) * line.pmax + abs(line.x) * line.qmax)


def injection_bounds(net: Network) -> tuple[float, float]:
    """Finite stand-ins for unbounded substation injections."""
    p = sum(d.pd for d in net.loads.values())
    q = sum(d.qd for d in net.loads.values())
    for h in net.shunts.values():
        wmax = net.nodes[h.node].vmax ** 2
        p += abs(h.g) * wmax
        q += abs(h.b) * wmax
    return max(p, 1.0), max(q, 1.0)


def generator_limits(net: Network, gen) -> tuple[float, float, float, float]:
    pb, qb = injection_bounds(net)
    pmin, pmax, qmin, qmax = gen.pmin, gen.pmax, gen.qmin, gen.qmax
    if gen.is_substation_interface:
        pmin, pmax, qmin, qmax = -pb, pb, -qb, qb
        pmin, pmax = max(gen.pmin, pmin), min(gen.pmax, pmax)
        qmin, qmax = max(gen.qmin, qmin), min(gen.qmax, qmax)
    clip = lambda v, b: max(-b, min(b, v))
    return clip(pmin, pb), clip(pmax, pb), clip(qmin, qb), clip(qmax, qb)


def build_opsf(net: Network, part: BlockPartition, abs_net: AbstractNetwork,
               cfg: OpsfConfig) -> tuple[MilpModel, OpsfVars]:
    """Objective, power flow, limits and isolation constraints (no radiality)."""
    bad = validate_internal_radiality(net, part)
    if bad:
        raise FormulationError("partition is not internally radial: "
                               + "; ".join(v.detail for v in bad))
    if not 0.0 <= cfg.alpha <= 1.0:
        raise FormulationError(f"alpha must lie in [0, 1], got {cfg.alpha}")

    m = MilpModel("opsf")
    z = {b: m.binary(f"opsf.z:block={b}") for b in part.blocks}
    s = {e.line: m.binary(f"opsf.s:line={e.line}") for e in abs_net.switched_edges}
    w = {}
    for nid in sorted_ids(net.nodes):
        nd = net.nodes[nid]
        w[nid] = m.continuous(f"opsf.w:node={nid}", nd.vmin ** 2, nd.vmax ** 2)
    p, q = {}, {}
    for lid in sorted_ids(net.lines):
        ln = net.lines[lid]
        p[lid] = m.continuous(f"opsf.p:line={lid}", -ln.pmax, ln.pmax)
        q[lid] = m.continuous(f"opsf.q:line={lid}", -ln.qmax, ln.qmax)
    pg, qg = {}, {}
    for gid in sorted_ids(net.generators):
        pmin, pmax, qmin, qmax = generator_limits(net, net.generators[gid])
        pg[gid] = m.continuous(f"opsf.pg:gen={gid}", min(pmin, 0.0), max(pmax, 0.0))
        qg[gid] = m.continuous(f"opsf.qg:gen={gid}", min(qmin, 0.0), max(qmax, 0.0))
        blk = z[part.node_to_block[net.generators[gid].node]]
        m.add_constraint(pg[gid] - pmax * blk, LE, 0.0, f"gen:p_max={gid}")
        m.add_constraint(pg[gid] - pmin * blk, GE, 0.0, f"gen:p_min={gid}")
        m.add_constraint(qg[gid] - qmax * blk, LE, 0.0, f"gen:q_max={gid}")
        m.add_constraint(qg[gid] - qmin * blk, GE, 0.0, f"gen:q_min={gid}")

    # z*w for shunt terms, exact for binary z
    wz = {}
    for nid in sorted_ids(net.nodes):
        nd = net.nodes[nid]
        if not any(net.shunts[h].g or net.shunts[h].b for h in nd.shunts):
            continue
        lo, hi = nd.vmin ** 2, nd.vmax ** 2
        zb = z[part.node_to_block[nid]]
        aux = wz[nid] = m.continuous(f"opsf.wz:node={nid}", 0.0, hi)
        m.add_constraint(aux - hi * zb, LE, 0.0, f"shunt:node={nid}:a")
        m.add_constraint(aux - lo * zb, GE, 0.0, f"shunt:node={nid}:b")
        m.add_constraint(aux - w[nid] - lo * zb, LE, -lo, f"shunt:node={nid}:c")
        m.add_constraint(aux - w[nid] - hi * zb, GE, -hi, f"shunt:node={nid}:d")

    for nid in sorted_ids(net.nodes):
        nd = net.nodes[nid]
        zb = z[part.node_to_block[nid]]
        pd = sum(net.loads[d].pd for d in nd.loads)
        qd = sum(net.loads[d].qd for d in nd.loads)
        gsum = sum(net.shunts[h].g for h in nd.shunts)
        bsum = sum(net.shunts[h].b for h in nd.shunts)
        bal_p = LinExpr.sum(p[l.id] for l in net.lines_out(nid)) - LinExpr.sum(
            p[l.id] for l in net.lines_in(nid))
        bal_q = LinExpr.sum(q[l.id] for l in net.lines_out(nid)) - LinExpr.sum(
            q[l.id] for l in net.lines_in(nid))
        bal_p = bal_p - LinExpr.sum(pg[g] for g in nd.generators) + pd * zb
        bal_q = bal_q - LinExpr.sum(qg[g] for g in nd.generators) + qd * zb
        if nid in wz:
            bal_p = bal_p + gsum * wz[nid]
            bal_q = bal_q + bsum * wz[nid]
        m.add_constraint(bal_p, EQ, 0.0, f"balance_p:node={nid}")
        m.add_constraint(bal_q, EQ, 0.0, f"balance_q:node={nid}")

    for lid in sorted_ids(net.lines):
        ln = net.lines[lid]
        big = big_m_for_line(net, ln, cfg.big_m)
        drop = w[ln.to_node] - w[ln.from_node] + 2.0 * ln.r * p[lid] + 2.0 * ln.x * q[lid]
        if ln.is_switch:
            gate, tags = s[lid], ("vdrop_switch_ub", "vdrop_switch_lb")
        else:
            gate, tags = z[part.node_to_block[ln.from_node]], ("vdrop_fixed_ub", "vdrop_fixed_lb")
        m.add_constraint(drop + big * gate, LE, big, f"{tags[0]}:line={lid}")
        m.add_constraint(drop - big * gate, GE, -big, f"{tags[1]}:line={lid}")
        m.add_constraint(p[lid] - ln.pmax * gate, LE, 0.0, f"flow:p_max:line={lid}")
        m.add_constraint(p[lid] + ln.pmax * gate, GE, 0.0, f"flow:p_min:line={lid}")
        m.add_constraint(q[lid] - ln.qmax * gate, LE, 0.0, f"flow:q_max:line={lid}")
        m.add_constraint(q[lid] + ln.qmax * gate, GE, 0.0, f"flow:q_min:line={lid}")

    for e in abs_net.switched_edges:
        m.add_constraint(z[e.m] - s[e.line] - z[e.n], GE, -1.0, f"isolation:line={e.line}:m")
        m.add_constraint(z[e.n] - s[e.line] - z[e.m], GE, -1.0, f"isolation:line={e.line}:n")

    m.set_objective(opsf_objective(part, z, s, cfg))
    return m, OpsfVars(z, s, w, p, q, pg, qg, wz, dict(net.lines))


def opsf_objective(part: BlockPartition, z: Mapping, s: Mapping, cfg: OpsfConfig) -> LinExpr:
    a = cfg.alpha
    obj = LinExpr.sum(((1.0 - a) * part.block_risk[b] - a * part.block_load[b]) * z[b] for b in z)
    if cfg.gamma:
        obj = obj + cfg.gamma * LinExpr.sum(s.values())
    return obj


# ---------------------------------------------------------------------------
# size formulas
# ---------------------------------------------------------------------------

def predict_radiality_model_size(formulation: str, stats: Mapping[str, int]) -> dict:
    """Closed-form size of the parent-child radiality constraints.

    ``stats`` holds ``nodes``, ``lines``, ``switches``, ``blocks`` and
    ``substations``; ``substation_blocks`` (defaults to ``substations``) is
    used by the block-level variant.
    """
    n, l, sw = stats["nodes"], stats["lines"], stats["switches"]
    b, ns = stats["blocks"], stats["substations"]
    if any(v < 0 for v in (n, l, sw, b, ns)):
        raise ValueError("counts must be nonnegative")
    key = formulation.replace("-", "_")
    if key == "original_pc":
        return {"constraints": 3 * n + 2 * l + sw + ns, "binaries": 2 * l + n,
                "continuous": 2 * l}
    if key == "abstracted_pc":
        bs = stats.get("substation_blocks", ns)
        return {"constraints": 3 * b + 3 * sw + bs, "binaries": 2 * sw + b,
                "continuous": 2 * sw}
    raise ValueError(f"no size formula for {formulation!r}")


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------

@dataclass
class Solution:
    status: str
    objective: float
    z: dict
    s: dict
    p: dict
    q: dict
    w: dict
    pg: dict
    qg: dict
    alpha: float
    gamma: float = 0.0
    risk_served: float = 0.0
    load_served: float = 0.0
    solve_seconds: float = 0.0
    strategy: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def energized(self) -> set:
        return {b for b, v in self.z.items() if v}

    @property
    def closed_switches(self) -> set:
        return {l for l, v in self.s.items() if v}

    @property
    def risk_term(self) -> float:
        return (1.0 - self.alpha) * self.risk_served

    @property
    def load_term(self) -> float:
        return -self.alpha * self.load_served

    @property
    def penalty_term(self) -> float:
        return self.gamma * len(self.closed_switches)

    @property
    def tradeoff_objective(self) -> float:
        """Risk/load objective without the switch penalty."""
        return self.risk_term + self.load_term

    def to_dict(self) -> dict:
        def enc(d):
            return {str(k): d[k] for k in sorted_ids(d)}
        return {"status": self.status, "objective": self.objective, "alpha": self.alpha,
                "gamma": self.gamma, "strategy": self.strategy,
                "risk_served": self.risk_served, "load_served": self.load_served,
                "risk_term": self.risk_term, "load_term": self.load_term,
                "penalty_term": self.penalty_term, "solve_seconds": self.solve_seconds,
                "z": enc(self.z), "s": enc(self.s), "p": enc(self.p), "q": enc(self.q),
                "w": enc(self.w), "pg": enc(self.pg), "qg": enc(self.qg),
                "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (set, frozenset, tuple)):
        return sorted(o, key=id_key)
    return str(o)


def solution_from_dict(doc: Mapping[str, Any], net: Network, part: BlockPartition) -> Solution:
    """Rebuild a :class:`Solution` from JSON, mapping string keys back to ids."""
    def dec(key, table):
        lookup = {str(k): k for k in table}
        raw = doc.get(key, {})
        out = {}
        for k, v in raw.items():
            if k not in lookup:
                raise NetworkError(f"solution field {key!r} names unknown id {k!r}", k)
            out[lookup[k]] = v
        return out

    z = {k: int(round(v)) for k, v in dec("z", part.blocks).items()}
    s = {k: int(round(v)) for k, v in dec("s", net.lines).items()}
    sol = Solution(doc.get("status", "optimal"), float(doc.get("objective", math.nan)), z, s,
                   dec("p", net.lines), dec("q", net.lines), dec("w", net.nodes),
                   dec("pg", net.generators), dec("qg", net.generators),
                   float(doc["alpha"]), float(doc.get("gamma", 0.0)),
                   strategy=doc.get("strategy", ""), meta=dict(doc.get("meta", {})))
    sol.risk_served = float(sum(part.block_risk[b] for b, v in z.items() if v))
    sol.load_served = float(sum(part.block_load[b] for b, v in z.items() if v))
    return sol


def extract_solution(result: SolveResult, vars: OpsfVars, net: Network, part: BlockPartition,
                     cfg: OpsfConfig, strategy: str = "") -> Solution:
    if result.status != "optimal" or result.values is None:
        raise FormulationError(f"cannot extract a solution from status {result.status!r}")
    x = result.values

    def rnd(v: Var) -> int:
        return int(x[v.index] >= BINARY_THRESHOLD)

    z = {b: rnd(v) for b, v in vars.z.items()}
    s = {l: rnd(v) for l, v in vars.s.items()}
    val = lambda d: {k: float(x[v.index]) for k, v in d.items()}
    sol = Solution("optimal", result.objective_value, z, s, val(vars.p), val(vars.q),
                   val(vars.w), val(vars.pg), val(vars.qg), cfg.alpha, cfg.gamma,
                   solve_seconds=result.solve_seconds, strategy=strategy)
    sol.risk_served = float(sum(part.block_risk[b] for b, v in z.items() if v))
    sol.load_served = float(sum(part.block_load[b] for b, v in z.items() if v))
    sol.meta["mip_gap"] = result.gap
    sol.meta["max_violation"] = result.max_violation
    return sol
