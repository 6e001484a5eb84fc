from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opsf.network import (NetworkError, block_aggregates, block_warnings,
                          build_abstract_network, compute_load_blocks, network_from_dict,
                          parse_network, validate_internal_radiality)

from conftest import make_doc, make_net, random_small_network


def test_parse_minimal_two_node_file(tmp_path):
    path = tmp_path / "n.json"
    path.write_text(json.dumps(make_doc(2, [(1, 1, 2, False)])))
    net = parse_network(path)
    assert len(net.nodes) == 2 and len(net.lines) == 1


def test_dangling_reference_reports_element(tmp_path):
    doc = make_doc(2, [(1, 1, 2, False)])
    doc["lines"][0]["to"] = 99
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkError) as err:
        parse_network(path)
    assert err.value.element == 99


def test_disconnected_network_rejected():
    doc = make_doc(3, [(1, 1, 2, False)])
    with pytest.raises(NetworkError, match="disconnected"):
        network_from_dict(doc)


def test_missing_field_and_duplicates_rejected():
    doc = make_doc(2, [(1, 1, 2, False)])
    del doc["lines"][0]["r"]
    with pytest.raises(NetworkError, match="missing"):
        network_from_dict(doc)
    doc = make_doc(2, [(1, 1, 2, False)])
    doc["nodes"].append(dict(doc["nodes"][0]))
    with pytest.raises(NetworkError, match="duplicate"):
        network_from_dict(doc)


@pytest.mark.parametrize("field,value", [("vmin", 0.0), ("vmin", 1.2)])
def test_voltage_bounds_checked(field, value):
    doc = make_doc(2, [(1, 1, 2, False)])
    doc["nodes"][1][field] = value
    with pytest.raises(NetworkError):
        network_from_dict(doc)


def test_switch_with_risk_rejected():
    doc = make_doc(2, [(1, 1, 2, True)])
    doc["lines"][0]["risk"] = 1.0
    with pytest.raises(NetworkError, match="zero risk"):
        network_from_dict(doc)


def test_no_substation_rejected():
    with pytest.raises(NetworkError, match="substation"):
        network_from_dict(make_doc(2, [(1, 1, 2, False)], substations=()))


def test_null_limits_become_infinite():
    net = make_net(2, [(1, 1, 2, False)])
    g = net.generators["sub1"]
    assert g.pmin == float("-inf") and g.pmax == float("inf")
    assert net.to_dict()["generators"][0]["pmax"] is None


def test_json_round_trip_is_stable():
    net = random_small_network(3)
    again = network_from_dict(json.loads(net.to_json()))
    assert again.to_json() == net.to_json()


def test_path_without_switches_is_one_block():
    part = compute_load_blocks(make_net(3, [(1, 1, 2, False), (2, 2, 3, False)]))
    assert list(part.blocks) == [1]
    assert part.blocks[1].nodes == (1, 2, 3)


def test_one_switch_splits_path():
    part = compute_load_blocks(make_net(3, [(1, 1, 2, True), (2, 2, 3, False)]))
    assert {b: blk.nodes for b, blk in part.blocks.items()} == {1: (1,), 2: (2, 3)}


def test_block_ids_are_smallest_node():
    net = make_net(4, [(1, 4, 3, False), (2, 3, 1, True), (3, 1, 2, False)])
    part = compute_load_blocks(net)
    assert set(part.blocks) == {1, 3}
    assert part.node_to_block == {1: 1, 2: 1, 3: 3, 4: 3}


def test_block_aggregates():
    net = make_net(3, [(1, 1, 2, False, 2.5), (2, 2, 3, True)], loads={1: 1.0, 2: 2.0, 3: 4.0})
    part = compute_load_blocks(net)
    assert part.block_risk == {1: 2.5, 3: 0.0}
    assert part.block_load == {1: 3.0, 3: 4.0}


def test_abstract_single_edge():
    net = make_net(2, [(1, 1, 2, True)])
    a = build_abstract_network(net, compute_load_blocks(net))
    assert len(a.block_nodes) == 2 and len(a.switched_edges) == 1


def test_abstract_keeps_parallel_switches():
    net = make_net(2, [(1, 1, 2, True), (2, 2, 1, True)])
    a = build_abstract_network(net, compute_load_blocks(net))
    assert [e.line for e in a.switched_edges] == [1, 2]
    assert {(e.m, e.n) for e in a.switched_edges} == {(1, 2), (2, 1)}


def test_switch_inside_block_rejected():
    net = make_net(3, [(1, 1, 2, False), (2, 2, 3, False), (3, 3, 1, True)])
    part = compute_load_blocks(net)
    with pytest.raises(NetworkError):
        build_abstract_network(net, part)
    kinds = {v.kind for v in validate_internal_radiality(net, part)}
    assert "internal-switch" in kinds


def test_star_block_is_radial():
    net = make_net(4, [(1, 1, 2, False), (2, 1, 3, False), (3, 1, 4, False)])
    assert validate_internal_radiality(net, compute_load_blocks(net)) == []


def test_triangle_block_flagged():
    net = make_net(4, [(1, 1, 2, False), (2, 2, 3, False), (3, 3, 1, False), (4, 3, 4, True)])
    v = validate_internal_radiality(net, compute_load_blocks(net))
    assert len(v) == 1 and v[0].block == 1 and v[0].kind == "cycle"


def test_degenerate_blocks_flagged_in_warnings():
    net = make_net(2, [(1, 1, 2, True)], loads={1: 1.0})
    w = block_warnings(net, compute_load_blocks(net))
    assert any("no internal lines" in s for s in w)
    assert any("serves no load" in s for s in w)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_partition_properties(seed):
    net = random_small_network(seed)
    part = compute_load_blocks(net)
    nodes = [n for blk in part.blocks.values() for n in blk.nodes]
    assert sorted(nodes) == sorted(net.nodes)
    for ln in net.lines.values():
        same = part.node_to_block[ln.from_node] == part.node_to_block[ln.to_node]
        assert same != ln.is_switch
    risk, load = block_aggregates(net, part.blocks)
    assert risk == part.block_risk and load == part.block_load
    a = build_abstract_network(net, part)
    assert len(a.switched_edges) == len(net.switches)
    for e in a.switched_edges:
        ln = net.lines[e.line]
        assert (e.m, e.n) == (part.node_to_block[ln.from_node], part.node_to_block[ln.to_node])
