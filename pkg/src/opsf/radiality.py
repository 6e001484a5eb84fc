"""Four interchangeable ways to keep the energized topology radial.

``original_pc``
    parent-child relations on every physical node and line, with a virtual
    root that may parent any node.
``abstracted_pc``
    the same relations on the block graph, whose edges are the switches.
``naive_loop``
    one "at least one switch open" cut per simple cycle of the block graph,
    all enumerated up front.
``iterative_loop``
    cuts are generated only for cycles that appear in an incumbent, with a
    small penalty on closed switches steering the relaxation toward forests.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

from .cycles import Cycle, cycles_in_topology, enumerate_simple_cycles
from .formulation import OpsfConfig, OpsfVars, Solution, build_opsf, extract_solution
from .milp import EQ, GE, LE, LinExpr, MilpModel, SolveOptions, solve
from .network import (AbstractNetwork, BlockPartition, Network, build_abstract_network,
                      compute_load_blocks, sorted_ids)

STRATEGIES = ("original_pc", "abstracted_pc", "naive_loop", "iterative_loop")
DEFAULT_GAMMA = 1e-6
VIRTUAL = "__virtual__"

# tag/name prefixes of the radiality rows and columns, used by size audits
PREFIX = {"original_pc": "opc.", "abstracted_pc": "apc.", "naive_loop": "loop:",
          "iterative_loop": "loop:"}


class StrategyError(RuntimeError):
    def __init__(self, message: str, trace: list | None = None, status: str = ""):
        super().__init__(message)
        self.trace = trace or []
        self.status = status


class EnumerationIntractable(StrategyError):
    pass


class IterationLimit(StrategyError):
    pass


def normalize_kind(kind: str) -> str:
    key = kind.strip().lower().replace("-", "_")
    if key not in STRATEGIES:
        raise ValueError(f"unknown formulation {kind!r}; choose from "
                         + ", ".join(k.replace("_", "-") for k in STRATEGIES))
    return key


@dataclass
class RadialityStrategy:
    kind: str
    gamma: float = DEFAULT_GAMMA
    max_iter: int = 1000
    max_cycles: int | None = 1_000_000
    max_enum_seconds: float | None = 600.0
    certify: bool = False

    def __post_init__(self):
        self.kind = normalize_kind(self.kind)
        if self.kind != "iterative_loop":
            self.gamma = 0.0
        elif self.gamma <= 0:
            raise ValueError("the iterative loop strategy needs gamma > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class PcVars:
    beta: dict
    f: dict
    virtual_supply: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parent-child formulations
# ---------------------------------------------------------------------------

def _parent_child(model: MilpModel, prefix: str, vertices: list, edges: list, roots: list,
                  vertex_on: dict, edge_state: dict, fixed: frozenset = frozenset()) -> PcVars:
    """Shared builder for the node-level and block-level variants.

    ``edges`` holds ``(edge_id, u, v)``; ``edge_state[edge_id]`` is the
    switch variable, or for the non-switched ``fixed`` edges the
    energization of the block containing them.  ``vertex_on[v]`` is the
    energization of vertex ``v``.  The virtual root's outflow to ``v`` is
    ``vertex_on[v]`` minus the net real-edge inflow, so it needs no column.
    """
    cap = float(len(vertices))
    beta, flow = {}, {}
    for eid, u, v in edges:
        beta[eid, u, v] = model.binary(f"{prefix}beta:line={eid}:parent={u}:child={v}")
        beta[eid, v, u] = model.binary(f"{prefix}beta:line={eid}:parent={v}:child={u}")
    for v in vertices:
        beta[VIRTUAL, VIRTUAL, v] = model.binary(f"{prefix}beta:virtual:child={v}")
    for eid, u, v in edges:
        flow[eid, u, v] = model.continuous(f"{prefix}f:line={eid}:{u}->{v}", 0.0, cap)
        flow[eid, v, u] = model.continuous(f"{prefix}f:line={eid}:{v}->{u}", 0.0, cap)

    into = {v: [] for v in vertices}
    for eid, u, v in edges:
        into[v].append((eid, u))
        into[u].append((eid, v))

    for r in roots:
        model.add_constraint(beta[VIRTUAL, VIRTUAL, r] - vertex_on[r], EQ, 0.0,
                             f"{prefix}root:vertex={r}")
    supply = {}
    for v in vertices:
        parents = LinExpr.sum(beta[eid, u, v] for eid, u in into[v])
        model.add_constraint(parents + beta[VIRTUAL, VIRTUAL, v] - vertex_on[v], EQ, 0.0,
                             f"{prefix}parent:vertex={v}")
        inflow = LinExpr.sum(flow[eid, u, v] for eid, u in into[v]) - LinExpr.sum(
            flow[eid, v, u] for eid, u in into[v])
        supply[v] = vertex_on[v] - inflow
        # unit virtual demand at every energized vertex, supplied from the root
        # only where the root is the parent
        model.add_constraint(supply[v], GE, 0.0, f"{prefix}vflow_balance:vertex={v}")
        model.add_constraint(supply[v] - cap * beta[VIRTUAL, VIRTUAL, v], LE, 0.0,
                             f"{prefix}vflow_root:vertex={v}")
    for eid, u, v in edges:
        state = edge_state[eid]
        pair = beta[eid, u, v] + beta[eid, v, u]
        kind = "fixed" if eid in fixed else "switch"
        model.add_constraint(pair - state, EQ, 0.0, f"{prefix}pair_{kind}:line={eid}")
        if kind == "fixed":
            model.add_constraint(flow[eid, u, v] + flow[eid, v, u], LE, cap,
                                 f"{prefix}vflow_fixed:line={eid}")
        else:
            model.add_constraint(flow[eid, u, v] - cap * state, LE, 0.0,
                                 f"{prefix}vflow_switch:line={eid}:fwd")
            model.add_constraint(flow[eid, v, u] - cap * state, LE, 0.0,
                                 f"{prefix}vflow_switch:line={eid}:bwd")
    return PcVars(beta, flow, supply)


def add_original_parent_child(model: MilpModel, net: Network, part: BlockPartition,
                              vars: OpsfVars) -> PcVars:
    """Node-level parent-child constraints with a virtual root.

    A node's energization is its block's ``z``.  The pair of relations on a
    non-switched line must be exactly one when its block is energized and
    zero otherwise; the virtual root parents every energized substation.
    """
    nodes = sorted_ids(net.nodes)
    edges = [(lid, net.lines[lid].from_node, net.lines[lid].to_node)
             for lid in sorted_ids(net.lines)]
    on = {n: vars.z[part.node_to_block[n]] for n in nodes}
    state, fixed = {}, set()
    for lid, u, _ in edges:
        if net.lines[lid].is_switch:
            state[lid] = vars.s[lid]
        else:
            state[lid] = vars.z[part.node_to_block[u]]
            fixed.add(lid)
    return _parent_child(model, PREFIX["original_pc"], nodes, edges,
                         sorted_ids(net.substations), on, state, frozenset(fixed))


def add_abstracted_parent_child(model: MilpModel, abs_net: AbstractNetwork,
                                vars: OpsfVars) -> PcVars:
    """Block-level parent-child constraints; edges are switched lines only."""
    blocks = list(abs_net.block_nodes)
    edges = [(e.line, e.m, e.n) for e in abs_net.switched_edges]
    state = {e.line: vars.s[e.line] for e in abs_net.switched_edges}
    return _parent_child(model, PREFIX["abstracted_pc"], blocks, edges,
                         sorted_ids(abs_net.substation_blocks), dict(vars.z), state)


# ---------------------------------------------------------------------------
# loop-based formulations
# ---------------------------------------------------------------------------

def add_loop_constraints(model: MilpModel, loops: list[Cycle], s_vars: dict,
                         start: int = 0) -> int:
    """At least one open switch on each loop; returns the number of rows added."""
    for c in loops:
        missing = [e for e in c.edges if e not in s_vars]
        if missing:
            raise KeyError(f"loop {c.edges} uses unknown switches {missing}")
    for i, c in enumerate(loops, start):
        model.add_constraint(LinExpr.sum(s_vars[e] for e in c.edges), LE, len(c.edges) - 1,
                             f"loop:id={i}")
    return len(loops)


@dataclass
class IterationRecord:
    iteration: int
    loops_found: int
    loops_total: int
    objective: float
    seconds: float


def _size_meta(model: MilpModel) -> dict:
    return {"model_constraints": len(model.constraints), "model_binaries": model.num_binaries,
            "model_continuous": len(model.variables) - model.num_binaries}


def _solve_once(model, vars, net, part, cfg, backend, options, strategy) -> Solution:
    res = solve(model, backend, options)
    if res.status != "optimal":
        raise StrategyError(f"{strategy}: solver returned {res.status}", status=res.status)
    sol = extract_solution(res, vars, net, part, cfg, strategy)
    sol.meta.update(_size_meta(model))
    return sol


def solve_naive_loop_based(net: Network, part: BlockPartition, abs_net: AbstractNetwork,
                           cfg: OpsfConfig, backend: str = "highs", options=None,
                           max_cycles: int | None = 1_000_000,
                           max_seconds: float | None = 600.0) -> Solution:
    t0 = time.perf_counter()
    loops, complete = enumerate_simple_cycles(abs_net, max_cycles, max_seconds)
    enum_seconds = time.perf_counter() - t0
    if not complete:
        raise EnumerationIntractable(
            f"loop enumeration intractable: stopped after {len(loops)} loops "
            f"in {enum_seconds:.1f} s")
    model, vars = build_opsf(net, part, abs_net, replace(cfg, gamma=0.0))
    add_loop_constraints(model, loops, vars.s)
    sol = _solve_once(model, vars, net, part, replace(cfg, gamma=0.0), backend, options,
                      "naive_loop")
    sol.meta.update(loops_enumerated=len(loops), enumeration_seconds=enum_seconds,
                    iterations=1, loops_generated=len(loops))
    sol.solve_seconds += enum_seconds
    return sol


def solve_iterative_loop_based(net: Network, part: BlockPartition, abs_net: AbstractNetwork,
                               cfg: OpsfConfig, backend: str = "highs", max_iter: int = 1000,
                               options=None, certify: bool = False
                               ) -> tuple[Solution, list[IterationRecord]]:
    """Constraint generation on loop cuts.

    Each round solves the penalised model with the cuts found so far, then
    looks for cycles among the incumbent's closed switches.  Stops when the
    incumbent is a forest.  With ``certify`` the final cut set is re-solved
    without the penalty; that optimum bounds the true optimum from below.
    """
    if cfg.gamma <= 0:
        raise ValueError("the iterative loop strategy needs gamma > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    model, vars = build_opsf(net, part, abs_net, cfg)
    known: dict[tuple, Cycle] = {}
    trace: list[IterationRecord] = []
    total_seconds = 0.0
    for k in range(1, max_iter + 1):
        res = solve(model, backend, options)
        if res.status != "optimal":
            raise StrategyError(f"iterative_loop: solver returned {res.status} at iteration {k}",
                                trace, res.status)
        t0 = time.perf_counter()
        sol = extract_solution(res, vars, net, part, cfg, "iterative_loop")
        found = cycles_in_topology(abs_net, sol.closed_switches)
        total_seconds += res.solve_seconds + time.perf_counter() - t0
        trace.append(IterationRecord(k, len(found), len(known), res.objective_value,
                                     res.solve_seconds))
        if not found:
            sol.solve_seconds = total_seconds
            sol.meta.update(_size_meta(model))
            sol.meta.update(iterations=k, loops_generated=len(known))
            if certify:
                sol.meta.update(_certify(model, vars, net, part, cfg, backend, options, sol))
            return sol, trace
        fresh = [c for c in found if c.edges not in known]
        if not fresh:
            raise StrategyError("iterative_loop: incumbent violates an existing loop cut",
                                trace)
        add_loop_constraints(model, fresh, vars.s, start=len(known))
        known.update((c.edges, c) for c in fresh)
    raise IterationLimit(f"iterative_loop: {max_iter} iterations without a radial incumbent",
                         trace)


def _certify(model, vars, net, part, cfg, backend, options, sol) -> dict:
    from .formulation import opsf_objective

    saved = model.objective
    model.set_objective(opsf_objective(part, vars.z, vars.s, replace(cfg, gamma=0.0)))
    try:
        res = solve(model, backend, options)
    finally:
        model.set_objective(saved)
    if res.status != "optimal":
        return {"certificate_status": res.status}
    bound = res.objective_value
    gap = sol.tradeoff_objective - bound
    return {"certificate_status": "optimal", "certificate_lower_bound": bound,
            "certificate_gap": gap,
            "penalty_free_optimal": gap <= 1e-6 * max(1.0, abs(bound))}


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def build_strategy_model(net: Network, part: BlockPartition, abs_net: AbstractNetwork,
                         cfg: OpsfConfig, kind: str):
    """Model for the single-solve strategies (parent-child variants)."""
    kind = normalize_kind(kind)
    model, vars = build_opsf(net, part, abs_net, replace(cfg, gamma=0.0))
    if kind == "original_pc":
        pc = add_original_parent_child(model, net, part, vars)
    elif kind == "abstracted_pc":
        pc = add_abstracted_parent_child(model, abs_net, vars)
    else:
        raise ValueError(f"{kind} is not a single-model strategy")
    return model, vars, pc


def solve_with_strategy(net: Network, cfg: OpsfConfig, strategy: RadialityStrategy | str,
                        backend: str = "highs", options: SolveOptions | dict | None = None,
                        part: BlockPartition | None = None,
                        abs_net: AbstractNetwork | None = None) -> Solution:
    if isinstance(strategy, str):
        strategy = RadialityStrategy(strategy)
    part = part or compute_load_blocks(net)
    abs_net = abs_net or build_abstract_network(net, part)
    kind = strategy.kind
    if kind in ("original_pc", "abstracted_pc"):
        flat = replace(cfg, gamma=0.0)
        model, vars, _ = build_strategy_model(net, part, abs_net, flat, kind)
        sol = _solve_once(model, vars, net, part, flat, backend, options, kind)
        sol.meta.update(iterations=1, loops_generated=0)
        return sol
    if kind == "naive_loop":
        return solve_naive_loop_based(net, part, abs_net, replace(cfg, gamma=0.0), backend,
                                      options, strategy.max_cycles, strategy.max_enum_seconds)
    sol, trace = solve_iterative_loop_based(net, part, abs_net,
                                            replace(cfg, gamma=strategy.gamma), backend,
                                            strategy.max_iter, options, strategy.certify)
    sol.meta["trace"] = [asdict(r) for r in trace]
    return sol
