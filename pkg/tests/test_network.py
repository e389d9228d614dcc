"""Edge indexing, graph construction and validation, scenario loading."""

import hashlib
import json
import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargenet import (HighwayGraph, ScenarioError, decode_edge, edge_index,
                       load_scenario, longest_simple_path_miles,
                       validate_graph)
from conftest import line_graph, scenario_path


# ---------------------------------------------------------------------------
# edge index encoding
# ---------------------------------------------------------------------------

def test_edge_index_reference_values():
    # row-major, 1-based: (i, j) -> (i-1)*N + j
    assert edge_index(1, 1, 3) == 1
    assert edge_index(1, 3, 3) == 3
    assert edge_index(2, 1, 3) == 4
    assert edge_index(3, 3, 3) == 9


def test_edge_index_bijective_exhaustive():
    for n in range(1, 7):
        seen = set()
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                h = edge_index(i, j, n)
                assert 1 <= h <= n * n
                assert h not in seen
                seen.add(h)
                assert decode_edge(h, n) == (i, j)
        assert len(seen) == n * n


def test_edge_index_range_errors():
    with pytest.raises(ValueError):
        edge_index(0, 1, 3)
    with pytest.raises(ValueError):
        edge_index(1, 4, 3)
    with pytest.raises(ValueError):
        decode_edge(0, 3)
    with pytest.raises(ValueError):
        decode_edge(10, 3)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.data())
def test_edge_index_roundtrip(n, data):
    i = data.draw(st.integers(min_value=1, max_value=n))
    j = data.draw(st.integers(min_value=1, max_value=n))
    assert decode_edge(edge_index(i, j, n), n) == (i, j)


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------

def test_line_graph_structure():
    g = line_graph([24.0, 18.0], caps=[1, 2, 0])
    assert g.n_nodes == 3
    assert g.has_edge(1, 2) and g.has_edge(2, 1)
    assert not g.has_edge(1, 3)
    assert g.length(2, 3) == 18.0
    assert g.neighbors(2) == (1, 3)
    assert g.edges() == [(1, 2), (2, 1), (2, 3), (3, 2)]
    assert g.max_edge_length() == 24.0
    assert g.station_capacity == (1, 2, 0)
    assert g.preferred_capacity == (1.0, 2.0, 0.0)


def test_adjacency_is_read_only():
    g = line_graph([24.0], caps=[1, 1])
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 99.0


def test_validate_graph_accepts_fixture():
    g = line_graph([24.0, 18.0], caps=[1, 1, 1])
    assert validate_graph(g).messages == ()


def test_validate_graph_flags_negative_capacity():
    g = line_graph([24.0], caps=[1, -1])
    messages = validate_graph(g).messages
    assert any("negative" in msg for msg in messages)


def test_validate_graph_flags_asymmetric_lengths():
    edges = {(1, 2): (24.0, 24.0, 4.0), (2, 1): (30.0, 30.0, 4.0)}
    g = HighwayGraph.from_edges(2, [1, 1], edges)
    messages = validate_graph(g).messages
    assert any("asymmetric" in msg for msg in messages)


def test_validate_graph_flags_disconnected():
    edges = {(1, 2): (24.0, 24.0, 4.0), (2, 1): (24.0, 24.0, 4.0),
             (3, 4): (24.0, 24.0, 4.0), (4, 3): (24.0, 24.0, 4.0)}
    g = HighwayGraph.from_edges(4, [1, 1, 1, 1], edges)
    messages = validate_graph(g).messages
    assert any("disconnected" in msg for msg in messages)


def test_validate_graph_flags_adjacency_mismatch():
    g = line_graph([24.0], caps=[1, 1])
    adj = np.array(g.adjacency)
    adj[0, 1] = 25.0
    adj.setflags(write=False)
    broken = HighwayGraph(n_nodes=g.n_nodes, adjacency=adj,
                          edge_length=g.edge_length,
                          station_capacity=g.station_capacity,
                          preferred_capacity=g.preferred_capacity,
                          free_flow_time=g.free_flow_time,
                          link_capacity=g.link_capacity,
                          _neighbors=g._neighbors)
    messages = validate_graph(broken).messages
    assert any("disagrees" in msg for msg in messages)


def test_longest_simple_path():
    g = line_graph([24.0, 18.0], caps=[1, 1, 1])
    assert longest_simple_path_miles(g) == 42.0


# ---------------------------------------------------------------------------
# scenario loading
# ---------------------------------------------------------------------------

def test_load_scenario_fixture_roundtrip():
    sc = load_scenario(scenario_path("fivenode"))
    assert sc.graph.n_nodes == 5
    assert sc.horizon == 6
    assert len(sc.cars) == 2
    assert sc.cars[0].start_node == 1
    assert sc.battery.e_max == 60.0
    assert sc.motion.base_speed == 30.0
    assert sc.drive_power_kw == 15.0
    assert not sc.congestion_coupling
    assert len(sc.digest) == 64  # sha256 hex


def test_digest_tracks_file_bytes(tmp_path):
    src = scenario_path("twonode")
    copy = tmp_path / "copy.json"
    shutil.copyfile(src, copy)
    sc1 = load_scenario(src)
    sc2 = load_scenario(str(copy))
    assert sc1.digest == sc2.digest
    assert sc1.digest == hashlib.sha256(open(src, "rb").read()).hexdigest()
    # any byte change, even whitespace, must change the digest
    copy.write_text(open(src).read() + "\n")
    assert load_scenario(str(copy)).digest != sc1.digest


def _twonode_doc():
    with open(scenario_path("twonode")) as fh:
        return json.load(fh)


def _write_doc(tmp_path, doc):
    path = tmp_path / "scen.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_unknown_top_level_key_rejected(tmp_path):
    doc = _twonode_doc()
    doc["extra_knob"] = 1
    with pytest.raises(ScenarioError, match="extra_knob"):
        load_scenario(_write_doc(tmp_path, doc))


def test_unknown_nested_key_rejected(tmp_path):
    doc = _twonode_doc()
    doc["edges"][0]["speed_limit"] = 65
    with pytest.raises(ScenarioError, match="speed_limit"):
        load_scenario(_write_doc(tmp_path, doc))


def test_missing_required_key_rejected(tmp_path):
    doc = _twonode_doc()
    del doc["horizon"]
    with pytest.raises(ScenarioError, match="horizon"):
        load_scenario(_write_doc(tmp_path, doc))


def test_duplicate_node_id_rejected(tmp_path):
    doc = _twonode_doc()
    doc["nodes"].append(dict(doc["nodes"][0]))
    with pytest.raises(ScenarioError):
        load_scenario(_write_doc(tmp_path, doc))


def test_edge_to_unknown_node_rejected(tmp_path):
    doc = _twonode_doc()
    doc["edges"][0]["j"] = 9
    with pytest.raises(ScenarioError):
        load_scenario(_write_doc(tmp_path, doc))


def test_car_with_energy_outside_battery_box_rejected(tmp_path):
    doc = _twonode_doc()
    doc["vehicles"]["cars"][0]["initial_energy"] = 99.0
    with pytest.raises(ScenarioError):
        load_scenario(_write_doc(tmp_path, doc))


def test_d_max_shorter_than_graph_rejected(tmp_path):
    doc = _twonode_doc()
    doc["vehicles"]["motion"]["d_max"] = 10.0
    with pytest.raises(ScenarioError, match="d_max"):
        load_scenario(_write_doc(tmp_path, doc))


def test_one_way_edge_loads_directed():
    sc = load_scenario(scenario_path("stranding"))
    assert sc.graph.has_edge(1, 2)
    assert not sc.graph.has_edge(2, 1)


def test_electricity_price_shape_enforced(tmp_path):
    doc = _twonode_doc()
    doc["weights"]["electricity_enabled"] = True
    doc["weights"]["electricity_price"] = [[0.02] * 4]  # one row, two nodes
    with pytest.raises(ScenarioError):
        load_scenario(_write_doc(tmp_path, doc))
