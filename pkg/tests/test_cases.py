from __future__ import annotations

import json

import networkx as nx
import numpy as np
import pytest

from opsf.cases import (BaseFeeder, CaseSpec, build_multicopy_case, bundled_base, grid_shape,
                        load_base, sample_risk_profile, tile_copies)
from opsf.network import (NetworkError, build_abstract_network, compute_load_blocks,
                          model_stats, validate_internal_radiality)

from conftest import make_doc, make_net


def stats(net):
    part = compute_load_blocks(net)
    return model_stats(net, part, build_abstract_network(net, part))


def test_bundled_base_statistics():
    s = stats(build_multicopy_case(CaseSpec(copies=1, seed=1)))
    # 61 fixed lines over 71 nodes leave exactly 10 tree-shaped blocks
    assert (s["nodes"], s["lines"], s["switches"], s["blocks"], s["substations"]) == \
        (71, 72, 11, 10, 1)


def test_bundled_base_blocks_are_trees():
    net = bundled_base().network
    part = compute_load_blocks(net)
    for blk in part.blocks.values():
        assert len(blk.internal_lines) == len(blk.nodes) - 1


@pytest.mark.parametrize("copies", [1, 2, 3, 4, 8, 16])
def test_every_case_is_internally_radial(copies):
    net = build_multicopy_case(CaseSpec(copies=copies, seed=3))
    assert validate_internal_radiality(net, compute_load_blocks(net)) == []


def test_two_copies_grow_and_stay_connected():
    one = stats(build_multicopy_case(CaseSpec(copies=1)))
    net = build_multicopy_case(CaseSpec(copies=2))
    two = stats(net)
    assert two["blocks"] > one["blocks"] and two["substations"] == 1
    part = compute_load_blocks(net)
    a = build_abstract_network(net, part)
    g = nx.MultiGraph()
    g.add_nodes_from(a.block_nodes)
    g.add_edges_from((e.m, e.n) for e in a.switched_edges)
    (sub,) = a.substation_blocks
    assert nx.node_connected_component(g, sub) == set(a.block_nodes)


def test_only_copy_zero_keeps_the_substation():
    net = tile_copies(bundled_base(), 4)
    assert [n for n in net.nodes if net.nodes[n].is_substation] == [1]
    former = [g for g in net.generators.values() if g.id.startswith("g-sub@")]
    assert len(former) == 3 and all(not g.is_substation_interface for g in former)


def test_grid_shape():
    assert grid_shape(1) == (1, 1)
    assert grid_shape(2) == (1, 2)
    assert grid_shape(8) == (3, 3)
    assert grid_shape(16) == (4, 4)


def test_identical_seeds_give_identical_bytes():
    a = build_multicopy_case(CaseSpec(copies=2, seed=7)).to_json()
    b = build_multicopy_case(CaseSpec(copies=2, seed=7)).to_json()
    c = build_multicopy_case(CaseSpec(copies=2, seed=8)).to_json()
    assert a == b and a != c


def test_switch_risk_is_zero_and_lines_nonnegative():
    net = build_multicopy_case(CaseSpec(copies=4, seed=5))
    for ln in net.lines.values():
        assert ln.risk == 0.0 if ln.is_switch else ln.risk >= 0.0
    part = compute_load_blocks(net)
    assert min(part.block_risk.values()) >= 0.0


def test_block_values_in_range_and_seeded():
    net = bundled_base().network
    part = compute_load_blocks(net)
    p1 = sample_risk_profile(net, part, 11)
    p2 = sample_risk_profile(net, part, 11)
    assert p1 == p2
    assert all(1.0 <= v <= 10.0 for v in p1.block_values.values())


def test_line_risks_follow_the_block_distribution():
    n = 10_001
    doc = make_doc(n, [(k, 1, k + 1, False) for k in range(1, n)], loads={})
    from opsf.network import network_from_dict

    net = network_from_dict(doc)
    part = compute_load_blocks(net)
    prof = sample_risk_profile(net, part, seed=2024)
    (value,) = prof.block_values.values()
    risks = np.array(list(prof.line_risks.values()))
    assert len(risks) >= 10_000
    assert abs(risks.mean() - value) <= 0.05
    assert abs(risks.var(ddof=1) - 0.25) <= 0.05


def test_variance_parameter_validated():
    with pytest.raises(ValueError):
        CaseSpec(copies=0)
    with pytest.raises(ValueError):
        CaseSpec(risk_variance=-1)


def test_external_base_round_trip(tmp_path):
    doc = make_doc(4, [(1, 1, 2, False), (2, 2, 3, True), (3, 3, 4, False)])
    doc["ties"] = {"west": 1, "east": 4, "north": 2, "south": 3}
    path = tmp_path / "base.json"
    path.write_text(json.dumps(doc))
    base = load_base(path)
    assert base.ties["east"] == 4 and base.interface_gen == "sub1"
    net = build_multicopy_case(CaseSpec(base, copies=2, seed=1))
    assert len(net.nodes) == 8 and len(net.switches) == 3
    assert sum(n.is_substation for n in net.nodes.values()) == 1


def test_external_base_needs_ties_to_tile(tmp_path):
    base = BaseFeeder(make_net(2, [(1, 1, 2, True)]), {}, "sub1")
    assert len(build_multicopy_case(CaseSpec(base, copies=1)).nodes) == 2
    with pytest.raises(NetworkError, match="tie"):
        build_multicopy_case(CaseSpec(base, copies=2))


def test_bad_tie_node_rejected(tmp_path):
    doc = make_doc(2, [(1, 1, 2, True)])
    doc["ties"] = {"east": 9}
    path = tmp_path / "base.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkError):
        load_base(path)


def test_meshed_base_rejected():
    net = make_net(3, [(1, 1, 2, False), (2, 2, 3, False), (3, 3, 1, False)])
    with pytest.raises(NetworkError):
        CaseSpec(BaseFeeder(net))
