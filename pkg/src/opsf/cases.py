"""Synthetic multi-copy feeders and seeded wildfire-risk profiles.

The bundled base feeder has 71 nodes, 72 lines (11 of them switched) and a
single substation.  Its blocks are small internally radial trees joined by
switches so that the block graph has a three-loop core plus radial spurs.
Four tie nodes (west, east, north, south) are used to join copies in a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .network import (BlockPartition, Id, Network, NetworkError, compute_load_blocks,
                      network_from_dict, sorted_ids, validate_internal_radiality)

# node ranges of the bundled blocks; the first node of the first block is the substation
_BLOCK_RANGES = [(1, 10), (11, 18), (19, 25), (26, 31), (32, 40), (41, 46), (47, 53),
                 (54, 60), (61, 66), (67, 71)]
_SWITCHES = [(10, 11), (15, 19), (25, 32), (18, 26), (31, 36), (13, 41), (46, 47),
             (53, 40), (38, 54), (60, 61), (50, 67)]
_TIES = {"west": 66, "east": 71, "north": 23, "south": 58}
_LOAD_PATTERN = (4.0, 2.0, 0.0, 7.5, 2.0, 4.0, 0.0)
_SHUNTS = [(5, 0.01, 0.02), (44, 0.0, -0.05)]

DG_PMAX_TIE = 30.0
DG_PMAX_FORMER_SUBSTATION = 100.0
SUBSTATION_GEN = "g-sub"


@dataclass
class BaseFeeder:
    """A radial feeder plus the tie nodes used to join copies of it."""

    network: Network
    ties: dict = field(default_factory=dict)
    interface_gen: Id | None = None


@dataclass
class CaseSpec:
    base: BaseFeeder | None = None
    copies: int = 1
    seed: int = 1
    risk_variance: float = 0.25

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("copies must be at least 1")
        if self.risk_variance < 0:
            raise ValueError("risk_variance must be nonnegative")
        if self.base is None:
            self.base = bundled_base()
        bad = validate_internal_radiality(self.base.network, compute_load_blocks(self.base.network))
        if bad:
            raise NetworkError("base feeder is not internally radial: " + bad[0].detail)


def _base_doc() -> dict:
    nodes, lines, loads, gens, shunts = [], [], [], [], []
    lid = 0
    for start, stop in _BLOCK_RANGES:
        for k, n in enumerate(range(start, stop + 1)):
            nodes.append({"id": n, "is_substation": n == 1, "vmin": 0.9, "vmax": 1.1})
            pd = _LOAD_PATTERN[n % 7]
            if pd:
                loads.append({"id": f"d{n}", "node": n, "pd": pd, "qd": pd / 2})
            if k == 0:
                continue
            parent = start + k - 2 if k % 3 == 0 else start + k - 1
            lid += 1
            lines.append({"id": lid, "from": parent, "to": n, "r": 1e-5 * (1 + k % 3),
                          "x": 2e-5 * (1 + k % 3), "pmax": 400.0, "qmax": 400.0,
                          "is_switch": False, "risk": 0.0})
    for a, b in _SWITCHES:
        lid += 1
        lines.append({"id": lid, "from": a, "to": b, "r": 5e-6, "x": 1e-5, "pmax": 400.0,
                      "qmax": 400.0, "is_switch": True, "risk": 0.0})
    gens.append({"id": SUBSTATION_GEN, "node": 1, "pmin": None, "pmax": None, "qmin": None,
                 "qmax": None, "is_substation_interface": True})
    for i, (n, g, b) in enumerate(_SHUNTS, 1):
        shunts.append({"id": f"h{i}", "node": n, "g": g, "b": b})
    return {"base_mva": 0.01, "nodes": nodes, "lines": lines, "generators": gens,
            "loads": loads, "shunts": shunts}


def bundled_base() -> BaseFeeder:
    return BaseFeeder(network_from_dict(_base_doc()), dict(_TIES), SUBSTATION_GEN)


def load_base(path: str | Path) -> BaseFeeder:
    """Load an external base feeder.

    The file uses the network schema; an optional top-level ``ties`` object
    maps ``west``/``east``/``north``/``south`` to node ids and is required
    for more than one copy.
    """
    import json

    doc = json.loads(Path(path).read_text())
    net = network_from_dict(doc)
    ties = dict(doc.get("ties", {}))
    for side, node in ties.items():
        if node not in net.nodes:
            raise NetworkError(f"tie {side!r} names missing node {node!r}", node)
    iface = [g.id for g in net.generators.values() if g.is_substation_interface]
    return BaseFeeder(net, ties, iface[0] if iface else None)


# ---------------------------------------------------------------------------
# tiling
# ---------------------------------------------------------------------------

def grid_shape(copies: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(copies))
    return math.ceil(copies / cols), cols


def _id_mapper(ids, copy: int):
    ints = all(isinstance(i, int) and not isinstance(i, bool) for i in ids)
    if ints:
        stride = 10 ** len(str(max(abs(i) for i in ids) if ids else 1))
        return lambda i: i + copy * stride
    return lambda i: i if copy == 0 else f"{i}@{copy}"


def _links(copies: int, ties: Mapping) -> list[tuple[int, str, int, str]]:
    rows, cols = grid_shape(copies)
    out = []
    for c in range(copies):
        r, k = divmod(c, cols)
        right, below = c + 1, c + cols
        if k + 1 < cols and right < copies:
            out.append((c, "east", right, "west"))
        if r + 1 < rows and below < copies:
            out.append((c, "south", below, "north"))
    need = {side for _, a, _, b in out for side in (a, b)}
    missing = need - set(ties)
    if missing:
        raise NetworkError(f"base feeder lacks tie nodes {sorted(missing)} needed to join copies")
    return out


def tile_copies(base: BaseFeeder, copies: int) -> Network:
    """Copies of ``base`` in a grid joined by switched lines.

    Only copy 0 keeps its substation; the substation interface of every
    other copy becomes a distributed generator.  Tie nodes left without a
    neighbouring copy get a small generator, so every switch endpoint that
    does not lead to another copy can feed its side of the feeder.
    """
    net = base.network
    links = _links(copies, base.ties)
    linked = {(c, side) for a, sa, b, sb in links for c, side in ((a, sa), (b, sb))}
    doc = {"base_mva": net.base_mva, "nodes": [], "lines": [], "generators": [], "loads": [],
           "shunts": []}
    base_doc = net.to_dict()
    node_ids = sorted_ids(net.nodes)
    line_ids = sorted_ids(net.lines)
    for c in range(copies):
        nmap = _id_mapper(node_ids, c)
        lmap = _id_mapper(line_ids, c)
        smap = (lambda i: i) if c == 0 else (lambda i: f"{i}@{c}")
        for rec in base_doc["nodes"]:
            doc["nodes"].append(dict(rec, id=nmap(rec["id"]),
                                     is_substation=rec["is_substation"] and c == 0))
        for rec in base_doc["lines"]:
            doc["lines"].append(dict(rec, id=lmap(rec["id"]), **{"from": nmap(rec["from"]),
                                                                "to": nmap(rec["to"])}))
        for rec in base_doc["generators"]:
            rec = dict(rec, id=smap(rec["id"]), node=nmap(rec["node"]))
            if rec["is_substation_interface"] and c > 0:
                rec.update(is_substation_interface=False, pmin=0.0,
                           pmax=DG_PMAX_FORMER_SUBSTATION, qmin=-DG_PMAX_FORMER_SUBSTATION / 2,
                           qmax=DG_PMAX_FORMER_SUBSTATION / 2)
            doc["generators"].append(rec)
        for key in ("loads", "shunts"):
            for rec in base_doc[key]:
                doc[key].append(dict(rec, id=smap(rec["id"]), node=nmap(rec["node"])))
        for side in sorted(base.ties):
            if (c, side) in linked:
                continue
            node = nmap(base.ties[side])
            doc["generators"].append({"id": f"g-tie-{side}" if c == 0 else f"g-tie-{side}@{c}",
                                      "node": node, "pmin": 0.0, "pmax": DG_PMAX_TIE,
                                      "qmin": -DG_PMAX_TIE / 2, "qmax": DG_PMAX_TIE / 2,
                                      "is_substation_interface": False})
    for k, (a, sa, b, sb) in enumerate(links, 1):
        na = _id_mapper(node_ids, a)(base.ties[sa])
        nb = _id_mapper(node_ids, b)(base.ties[sb])
        lid = 10000 + k if isinstance(line_ids[0], int) else f"tie{k}"
        doc["lines"].append({"id": lid, "from": na, "to": nb, "r": 5e-6, "x": 1e-5,
                             "pmax": 150.0, "qmax": 150.0, "is_switch": True, "risk": 0.0})
    return network_from_dict(doc)


# ---------------------------------------------------------------------------
# risk sampling
# ---------------------------------------------------------------------------

@dataclass
class RiskProfile:
    block_values: dict
    line_risks: dict


def sample_risk_profile(net: Network, part: BlockPartition, seed: int,
                        variance: float = 0.25, low: float = 1.0, high: float = 10.0
                        ) -> RiskProfile:
    """Seeded per-block and per-line risks.

    ``SeedSequence(seed)`` is split into ``1 + len(blocks)`` children.  The
    first draws one uniform value per block in sorted block order; child
    ``k`` draws the normal risks of block ``k``'s internal lines in sorted
    line order, clipped at zero.  Switches carry zero risk.  All draws use
    numpy's PCG64.
    """
    blocks = sorted_ids(part.blocks)
    children = np.random.SeedSequence(seed).spawn(1 + len(blocks))
    values = np.random.Generator(np.random.PCG64(children[0])).uniform(low, high, len(blocks))
    sd = math.sqrt(variance)
    block_values, risks = {}, {}
    for k, (b, v) in enumerate(zip(blocks, values), 1):
        block_values[b] = float(v)
        lines = sorted_ids(part.blocks[b].internal_lines)
        draws = np.random.Generator(np.random.PCG64(children[k])).normal(v, sd, len(lines))
        for lid, r in zip(lines, np.maximum(draws, 0.0)):
            risks[lid] = float(r)
    for ln in net.switches:
        risks[ln.id] = 0.0
    return RiskProfile(block_values, risks)


def apply_risk_profile(net: Network, profile: RiskProfile) -> tuple[Network, BlockPartition]:
    """Network with the sampled risks, and its partition with fresh aggregates."""
    out = net.with_line_risks(profile.line_risks)
    return out, compute_load_blocks(out)


def build_multicopy_case(spec: CaseSpec) -> Network:
    net = tile_copies(spec.base, spec.copies)
    part = compute_load_blocks(net)
    bad = validate_internal_radiality(net, part)
    if bad:
        raise NetworkError("generated case is not internally radial: " + bad[0].detail)
    profile = sample_risk_profile(net, part, spec.seed, spec.risk_variance)
    out, _ = apply_risk_profile(net, profile)
    return out
