from __future__ import annotations

import random

import pytest

from opsf.network import (build_abstract_network, compute_load_blocks, network_from_dict)


def make_doc(n_nodes, lines, substations=(1,), loads=None, gens=(), shunts=(),
             vmin=0.9, vmax=1.1, base_mva=1.0, r=0.01, x=0.02):
    """Compact network document builder.

    ``lines`` holds ``(id, from, to, is_switch)`` or ``(id, from, to, is_switch, risk)``
    plus optional ``pmax``; nodes are numbered 1..n_nodes.
    """
    nodes = [{"id": n, "is_substation": n in substations, "vmin": vmin, "vmax": vmax}
             for n in range(1, n_nodes + 1)]
    recs = []
    for ln in lines:
        lid, a, b, sw = ln[:4]
        risk = 0.0 if sw else (ln[4] if len(ln) > 4 else 1.0)
        pmax = ln[5] if len(ln) > 5 else 100.0
        recs.append({"id": lid, "from": a, "to": b, "r": r, "x": x, "pmax": pmax,
                     "qmax": pmax, "is_switch": sw, "risk": risk})
    loads = loads if loads is not None else {n: 1.0 for n in range(1, n_nodes + 1)}
    load_recs = [{"id": f"d{n}", "node": n, "pd": pd, "qd": pd / 2} for n, pd in loads.items()]
    gen_recs = [{"id": f"sub{n}", "node": n, "pmin": None, "pmax": None, "qmin": None,
                 "qmax": None, "is_substation_interface": True} for n in substations]
    for gid, node, pmax in gens:
        gen_recs.append({"id": gid, "node": node, "pmin": 0.0, "pmax": pmax,
                         "qmin": -pmax, "qmax": pmax, "is_substation_interface": False})
    shunt_recs = [{"id": f"h{i}", "node": n, "g": g, "b": b}
                  for i, (n, g, b) in enumerate(shunts, 1)]
    return {"base_mva": base_mva, "nodes": nodes, "lines": recs, "generators": gen_recs,
            "loads": load_recs, "shunts": shunt_recs}


def make_net(*args, **kw):
    return network_from_dict(make_doc(*args, **kw))


def prepared(net):
    part = compute_load_blocks(net)
    return net, part, build_abstract_network(net, part)


def random_small_network(seed: int, max_blocks: int = 6, max_switches: int = 7,
                         min_block_nodes: int = 1):
    """Random feeder with few blocks joined by switches, some with tight limits.

    Blocks are short paths of 1-3 nodes.  Switches first form a spanning tree
    of the blocks, then extra (possibly parallel) switches close loops.  A
    few blocks carry small generators and some switches have low flow
    limits, so that serving every block is not always possible.
    """
    rng = random.Random(seed)
    nb = rng.randint(2, max_blocks)
    blocks, node, lines, lid = [], 0, [], 0
    for _ in range(nb):
        size = rng.randint(min_block_nodes, max(3, min_block_nodes))
        members = list(range(node + 1, node + size + 1))
        node += size
        for a, b in zip(members, members[1:]):
            lid += 1
            lines.append((lid, a, b, False, round(rng.uniform(0.5, 5.0), 3)))
        blocks.append(members)
    n_sw = rng.randint(nb - 1, min(max_switches, nb + 3))
    pairs = [(rng.randrange(k), k) for k in range(1, nb)]
    while len(pairs) < n_sw:
        a, b = rng.sample(range(nb), 2)
        pairs.append((a, b))
    for a, b in pairs:
        lid += 1
        pmax = rng.choice([100.0, 100.0, rng.uniform(2.0, 8.0)])
        lines.append((lid, rng.choice(blocks[a]), rng.choice(blocks[b]), True, 0.0, pmax))
    loads = {n: round(rng.uniform(0.5, 6.0), 2) for n in range(1, node + 1)}
    gens = []
    for k in range(1, nb):
        if rng.random() < 0.4:
            gens.append((f"dg{k}", rng.choice(blocks[k]), round(rng.uniform(0.0, 6.0), 2)))
    return make_net(node, lines, substations=(1,), loads=loads, gens=gens, r=0.002, x=0.004)


@pytest.fixture
def triangle_net():
    """Three single-node blocks joined in a triangle of switches."""
    return make_net(3, [(1, 1, 2, True), (2, 2, 3, True), (3, 3, 1, True)])


@pytest.fixture
def bundled():
    from opsf.cases import CaseSpec, build_multicopy_case

    return prepared(build_multicopy_case(CaseSpec(copies=1, seed=1)))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, title: str, detail: str) -> None:
    ACCEPTANCE_LINES[number] = (f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}"
                                f" ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
