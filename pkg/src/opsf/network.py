"""Distribution network model, load blocks and the block-level switch graph."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping

Id = Hashable


class NetworkError(ValueError):
    """Structural or schema problem in a network; ``element`` names the culprit."""

    def __init__(self, message: str, element: Any = None):
        super().__init__(message)
        self.element = element


def id_key(x: Id):
    """Sort key that orders ints numerically and strings lexically, ints first."""
    if isinstance(x, bool):
        return (0, int(x), "")
    if isinstance(x, int):
        return (0, x, "")
    return (1, 0, str(x))


def sorted_ids(ids: Iterable[Id]) -> list:
    return sorted(ids, key=id_key)


@dataclass(frozen=True)
class Node:
    id: Id
    is_substation: bool = False
    vmin: float = 0.9
    vmax: float = 1.1
    loads: tuple = ()
    generators: tuple = ()
    shunts: tuple = ()


@dataclass(frozen=True)
class Line:
    id: Id
    from_node: Id
    to_node: Id
    r: float
    x: float
    pmax: float
    qmax: float
    is_switch: bool = False
    risk: float = 0.0


@dataclass(frozen=True)
class Generator:
    id: Id
    node: Id
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    is_substation_interface: bool = False


@dataclass(frozen=True)
class Load:
    id: Id
    node: Id
    pd: float
    qd: float = 0.0


@dataclass(frozen=True)
class Shunt:
    id: Id
    node: Id
    g: float = 0.0
    b: float = 0.0


@dataclass
class Network:
    nodes: dict
    lines: dict
    generators: dict = field(default_factory=dict)
    loads: dict = field(default_factory=dict)
    shunts: dict = field(default_factory=dict)
    base_mva: float = 1.0

    @property
    def switches(self) -> list[Line]:
        return [ln for ln in self.lines.values() if ln.is_switch]

    @property
    def substations(self) -> list[Id]:
        return [n.id for n in self.nodes.values() if n.is_substation]

    def lines_out(self, node: Id) -> list[Line]:
        return self._incidence()[0][node]

    def lines_in(self, node: Id) -> list[Line]:
        return self._incidence()[1][node]

    def _incidence(self):
        cache = self.__dict__.get("_inc")
        if cache is None:
            out, inn = defaultdict(list), defaultdict(list)
            for ln in self.lines.values():
                out[ln.from_node].append(ln)
                inn[ln.to_node].append(ln)
            cache = self.__dict__["_inc"] = (out, inn)
        return cache

    def stats(self) -> dict:
        return {"nodes": len(self.nodes), "lines": len(self.lines),
                "switches": len(self.switches), "substations": len(self.substations)}

    def with_line_risks(self, risks: Mapping[Id, float]) -> Network:
        lines = {lid: _replace(ln, risk=float(risks.get(lid, ln.risk)))
                 for lid, ln in self.lines.items()}
        return Network(dict(self.nodes), lines, dict(self.generators), dict(self.loads),
                       dict(self.shunts), self.base_mva)

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "base_mva": self.base_mva,
            "nodes": [{"id": n.id, "is_substation": n.is_substation, "vmin": n.vmin,
                       "vmax": n.vmax} for n in _ordered(self.nodes)],
            "lines": [{"id": ln.id, "from": ln.from_node, "to": ln.to_node, "r": ln.r,
                       "x": ln.x, "pmax": ln.pmax, "qmax": ln.qmax, "is_switch": ln.is_switch,
                       "risk": ln.risk} for ln in _ordered(self.lines)],
            "generators": [{"id": g.id, "node": g.node, "pmin": _lim(g.pmin),
                            "pmax": _lim(g.pmax), "qmin": _lim(g.qmin), "qmax": _lim(g.qmax),
                            "is_substation_interface": g.is_substation_interface}
                           for g in _ordered(self.generators)],
            "loads": [{"id": d.id, "node": d.node, "pd": d.pd, "qd": d.qd}
                      for d in _ordered(self.loads)],
            "shunts": [{"id": h.id, "node": h.node, "g": h.g, "b": h.b}
                       for h in _ordered(self.shunts)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def _lim(v: float):
    # unbounded limits are written as null
    return None if math.isinf(v) else v


def _ordered(d: Mapping) -> list:
    return [d[k] for k in sorted_ids(d)]


def _replace(obj, **changes):
    from dataclasses import replace
    return replace(obj, **changes)


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------

_REQUIRED = {
    "nodes": ("id", "is_substation", "vmin", "vmax"),
    "lines": ("id", "from", "to", "r", "x", "pmax", "qmax", "is_switch", "risk"),
    "generators": ("id", "node", "pmin", "pmax", "qmin", "qmax", "is_substation_interface"),
    "loads": ("id", "node", "pd", "qd"),
    "shunts": ("id", "node", "g", "b"),
}


def _num(rec: Mapping, key: str, where: str) -> float:
    val = rec[key]
    if val is None:
        return math.inf if "max" in key else -math.inf
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise NetworkError(f"{where}: field {key!r} must be a number, got {val!r}", rec.get("id"))
    return float(val)


def network_from_dict(doc: Mapping) -> Network:
    """Build and validate a :class:`Network` from the JSON document layout."""
    if not isinstance(doc, Mapping):
        raise NetworkError("network document must be a JSON object")
    for key in ("nodes", "lines"):
        if key not in doc:
            raise NetworkError(f"missing top-level key {key!r}")
    for key, fields in _REQUIRED.items():
        items = doc.get(key, [])
        if not isinstance(items, list):
            raise NetworkError(f"{key!r} must be a list")
        for rec in items:
            if not isinstance(rec, Mapping):
                raise NetworkError(f"{key}: entries must be objects")
            missing = [f for f in fields if f not in rec]
            if missing:
                raise NetworkError(f"{key} entry {rec.get('id')!r} missing {missing}", rec.get("id"))

    def unique(kind: str):
        seen = {}
        for rec in doc.get(kind, []):
            rid = rec["id"]
            if isinstance(rid, list):
                raise NetworkError(f"{kind}: id must be a scalar", rid)
            if rid in seen:
                raise NetworkError(f"duplicate {kind[:-1]} id {rid!r}", rid)
            seen[rid] = rec
        return seen

    node_recs = unique("nodes")
    gens, loads, shunts = {}, {}, {}
    attached = defaultdict(lambda: {"loads": [], "generators": [], "shunts": []})
    for rid, rec in unique("generators").items():
        where = f"generator {rid!r}"
        _check_ref(rec["node"], node_recs, where)
        gens[rid] = Generator(rid, rec["node"], _num(rec, "pmin", where), _num(rec, "pmax", where),
                              _num(rec, "qmin", where), _num(rec, "qmax", where),
                              bool(rec["is_substation_interface"]))
        attached[rec["node"]]["generators"].append(rid)
    for rid, rec in unique("loads").items():
        where = f"load {rid!r}"
        _check_ref(rec["node"], node_recs, where)
        loads[rid] = Load(rid, rec["node"], _num(rec, "pd", where), _num(rec, "qd", where))
        attached[rec["node"]]["loads"].append(rid)
    for rid, rec in unique("shunts").items():
        where = f"shunt {rid!r}"
        _check_ref(rec["node"], node_recs, where)
        shunts[rid] = Shunt(rid, rec["node"], _num(rec, "g", where), _num(rec, "b", where))
        attached[rec["node"]]["shunts"].append(rid)

    nodes = {}
    for rid, rec in node_recs.items():
        where = f"node {rid!r}"
        a = attached[rid]
        nodes[rid] = Node(rid, bool(rec["is_substation"]), _num(rec, "vmin", where),
                          _num(rec, "vmax", where), tuple(sorted_ids(a["loads"])),
                          tuple(sorted_ids(a["generators"])), tuple(sorted_ids(a["shunts"])))
    lines = {}
    for rid, rec in unique("lines").items():
        where = f"line {rid!r}"
        _check_ref(rec["from"], node_recs, where)
        _check_ref(rec["to"], node_recs, where)
        lines[rid] = Line(rid, rec["from"], rec["to"], _num(rec, "r", where), _num(rec, "x", where),
                          _num(rec, "pmax", where), _num(rec, "qmax", where),
                          bool(rec["is_switch"]), _num(rec, "risk", where))
    base = doc.get("base_mva", 1.0)
    net = Network(nodes, lines, gens, loads, shunts, float(base))
    validate_network(net)
    return net


def _check_ref(ref, table, where):
    if ref not in table:
        raise NetworkError(f"{where} references missing node {ref!r}", ref)


def parse_network(path: str | Path) -> Network:
    """Read a network JSON file; raises :class:`NetworkError` on any defect."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: invalid JSON ({exc})") from exc
    return network_from_dict(doc)


def validate_network(net: Network) -> None:
    """Check element invariants, references, connectivity and substation presence."""
    for n in net.nodes.values():
        if not (n.vmin > 0 and n.vmin <= n.vmax):
            raise NetworkError(f"node {n.id!r}: need 0 < vmin <= vmax", n.id)
    for ln in net.lines.values():
        if ln.from_node == ln.to_node:
            raise NetworkError(f"line {ln.id!r} is a self-loop", ln.id)
        if ln.from_node not in net.nodes or ln.to_node not in net.nodes:
            raise NetworkError(f"line {ln.id!r} references a missing node", ln.id)
        if ln.pmax < 0 or ln.qmax < 0:
            raise NetworkError(f"line {ln.id!r}: negative flow limit", ln.id)
        if ln.risk < 0:
            raise NetworkError(f"line {ln.id!r}: negative risk", ln.id)
        if ln.is_switch and ln.risk != 0:
            raise NetworkError(f"switched line {ln.id!r} must carry zero risk", ln.id)
        if not all(math.isfinite(v) for v in (ln.r, ln.x, ln.pmax, ln.qmax)):
            raise NetworkError(f"line {ln.id!r}: non-finite parameter", ln.id)
    for g in net.generators.values():
        if g.node not in net.nodes:
            raise NetworkError(f"generator {g.id!r} references a missing node", g.id)
        if g.pmin > g.pmax or g.qmin > g.qmax:
            raise NetworkError(f"generator {g.id!r}: min limit above max limit", g.id)
    for d in net.loads.values():
        if d.node not in net.nodes:
            raise NetworkError(f"load {d.id!r} references a missing node", d.id)
        if d.pd < 0 or d.qd < 0:
            raise NetworkError(f"load {d.id!r}: negative demand", d.id)
    for h in net.shunts.values():
        if h.node not in net.nodes:
            raise NetworkError(f"shunt {h.id!r} references a missing node", h.id)
        if not (math.isfinite(h.g) and math.isfinite(h.b)):
            raise NetworkError(f"shunt {h.id!r}: non-finite parameter", h.id)
    if not net.substations:
        raise NetworkError("network has no substation node")
    comps = _components(net.nodes, net.lines.values())
    if len(set(comps.values())) > 1:
        first = min((n for n in net.nodes if comps[n] != comps[sorted_ids(net.nodes)[0]]),
                    key=id_key)
        raise NetworkError(f"network is disconnected; node {first!r} is unreachable", first)


class _DisjointSet:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _components(nodes: Iterable[Id], lines: Iterable[Line]) -> dict:
    ds = _DisjointSet(nodes)
    for ln in lines:
        ds.union(ln.from_node, ln.to_node)
    return {n: ds.find(n) for n in ds.parent}


# ---------------------------------------------------------------------------
# load blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    id: Id
    nodes: tuple
    internal_lines: tuple


@dataclass
class BlockPartition:
    node_to_block: dict
    blocks: dict
    block_risk: dict
    block_load: dict

    def block_of(self, node: Id) -> Id:
        return self.node_to_block[node]

    def block_of_line(self, line: Line) -> Id | None:
        """Block owning ``line`` if it is internal, else ``None``."""
        a, b = self.node_to_block[line.from_node], self.node_to_block[line.to_node]
        return a if a == b and not line.is_switch else None

    def __len__(self) -> int:
        return len(self.blocks)


def block_aggregates(net: Network, blocks: Mapping[Id, Block]) -> tuple[dict, dict]:
    risk = {b: float(sum(net.lines[l].risk for l in blk.internal_lines)) for b, blk in blocks.items()}
    load = {}
    for b, blk in blocks.items():
        load[b] = float(sum(net.loads[d].pd for n in blk.nodes for d in net.nodes[n].loads))
    return risk, load


def compute_load_blocks(net: Network) -> BlockPartition:
    """Connected components of the network with every switch opened.

    Each block is named after its smallest node id.
    """
    fixed = [ln for ln in net.lines.values() if not ln.is_switch]
    comp = _components(net.nodes, fixed)
    members = defaultdict(list)
    for n, root in comp.items():
        members[root].append(n)
    node_to_block, blocks = {}, {}
    for group in members.values():
        group = sorted_ids(group)
        bid = group[0]
        for n in group:
            node_to_block[n] = bid
    internal = defaultdict(list)
    for ln in fixed:
        internal[node_to_block[ln.from_node]].append(ln.id)
    for root, group in members.items():
        group = sorted_ids(group)
        bid = group[0]
        blocks[bid] = Block(bid, tuple(group), tuple(sorted_ids(internal[bid])))
    blocks = {b: blocks[b] for b in sorted_ids(blocks)}
    risk, load = block_aggregates(net, blocks)
    return BlockPartition(node_to_block, blocks, risk, load)


@dataclass(frozen=True)
class SwitchEdge:
    line: Id
    m: Id
    n: Id


@dataclass
class AbstractNetwork:
    block_nodes: tuple
    switched_edges: tuple
    substation_blocks: frozenset

    def edge(self, line: Id) -> SwitchEdge:
        return self._by_line()[line]

    def _by_line(self) -> dict:
        cache = self.__dict__.get("_lookup")
        if cache is None:
            cache = self.__dict__["_lookup"] = {e.line: e for e in self.switched_edges}
        return cache

    def incident(self, block: Id) -> list[SwitchEdge]:
        cache = self.__dict__.get("_inc")
        if cache is None:
            cache = defaultdict(list)
            for e in self.switched_edges:
                cache[e.m].append(e)
                cache[e.n].append(e)
            self.__dict__["_inc"] = cache
        return cache[block]

    @property
    def edge_ids(self) -> list:
        return [e.line for e in self.switched_edges]


def build_abstract_network(net: Network, part: BlockPartition) -> AbstractNetwork:
    edges = []
    for ln in sorted(net.switches, key=lambda l: id_key(l.id)):
        m, n = part.node_to_block[ln.from_node], part.node_to_block[ln.to_node]
        if m == n:
            raise NetworkError(f"switched line {ln.id!r} lies inside block {m!r}", ln.id)
        edges.append(SwitchEdge(ln.id, m, n))
    subs = frozenset(part.node_to_block[n] for n in net.substations)
    return AbstractNetwork(tuple(part.blocks), tuple(edges), subs)


@dataclass(frozen=True)
class BlockViolation:
    block: Id
    kind: str
    detail: str


def validate_internal_radiality(net: Network, part: BlockPartition) -> list[BlockViolation]:
    """One violation per block whose fixed lines do not form a tree.

    A switch with both ends in the same block is reported too; such a switch
    would close a loop inside an immutable block.
    """
    out = []
    for bid, blk in part.blocks.items():
        n_nodes, n_lines = len(blk.nodes), len(blk.internal_lines)
        if n_lines != n_nodes - 1:
            out.append(BlockViolation(bid, "cycle",
                                      f"block {bid!r}: {n_lines} internal lines on {n_nodes} nodes"))
    for ln in net.switches:
        m, n = part.node_to_block[ln.from_node], part.node_to_block[ln.to_node]
        if m == n:
            out.append(BlockViolation(m, "internal-switch",
                                      f"switched line {ln.id!r} has both ends in block {m!r}"))
    return out


def block_warnings(net: Network, part: BlockPartition) -> list[str]:
    """Degenerate but legal blocks: no loads, or a single node without lines."""
    out = []
    for bid, blk in part.blocks.items():
        if not blk.internal_lines:
            out.append(f"block {bid!r} has no internal lines")
        if part.block_load[bid] == 0:
            out.append(f"block {bid!r} serves no load")
    return out


def model_stats(net: Network, part: BlockPartition, abs_net: AbstractNetwork | None = None) -> dict:
    abs_net = abs_net or build_abstract_network(net, part)
    return {"nodes": len(net.nodes), "lines": len(net.lines), "switches": len(net.switches),
            "blocks": len(part.blocks), "substations": len(net.substations),
            "substation_blocks": len(abs_net.substation_blocks)}
