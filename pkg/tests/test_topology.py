# -*- coding: utf-8 -*-
import bz2
import pickle
import time
from fractions import Fraction

import pytest

from src.core import synth, topology
from src.core.errors import ParseError, TopologyValidationError, UnknownAsError
from src.core.topology import EdgeRole


def test_parse_counts_and_roles(t6):
    assert len(t6) == 6
    assert len(t6.edges) == 7
    assert t6.role(1, 2) == EdgeRole.PEER
    assert t6.role(6, 3) == EdgeRole.UP
    assert t6.role(3, 6) == EdgeRole.DOWN
    assert t6.role(5, 6) is None
    assert t6.customers_of(2) == {4, 5}
    assert t6.providers_of(6) == {3, 4}


def test_parse_ignores_comments_and_source_column():
    graph = topology.parse_as_relationships("# header\n\n1|2|-1|bgp\r\n2|3|0|mlp\n")
    assert graph.nodes == {1, 2, 3}
    assert graph.role(2, 1) == EdgeRole.UP


@pytest.mark.parametrize(
    "text,line",
    [
        ("1|2|-1\n1|x|0\n", 2),
        ("1|2\n", 1),
        ("1|2|-1\n\n2|3|5\n", 3),
        ("1|1|0\n", 1),
        ("0|2|-1\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as excinfo:
        topology.parse_as_relationships(text, source="bad.txt")
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith(f"bad.txt:{line}:")


def test_provider_cycle_is_rejected():
    with pytest.raises(TopologyValidationError):
        topology.parse_as_relationships("1|2|-1\n2|3|-1\n3|1|-1\n")


def test_conflicting_duplicate_pair_is_rejected():
    with pytest.raises(TopologyValidationError):
        topology.parse_as_relationships("1|2|-1\n2|1|0\n")


def test_identical_duplicate_pair_is_accepted():
    graph = topology.parse_as_relationships("1|2|-1\n1|2|-1\n")
    assert len(graph.edges) == 1


def test_serialize_is_stable(t6):
    text = topology.serialize_as_relationships(t6)
    again = topology.serialize_as_relationships(topology.parse_as_relationships(text))
    assert text == again
    assert text.splitlines()[1:3] == ["1|2|0", "1|3|-1"]


def test_load_bz2(tmp_path, t6):
    path = tmp_path / "t6.txt.bz2"
    with bz2.open(path, "wt", encoding="utf-8") as fd:
        fd.write(topology.serialize_as_relationships(t6))
    graph = topology.load_as_graph(path)
    assert graph.nodes == t6.nodes
    assert topology.best_path(graph, 6, 5) == (6, 4, 2, 5)


@pytest.mark.parametrize(
    "path,expected",
    [
        ((6, 3, 1, 2, 5), True),
        ((6, 4, 2, 5), True),
        ((6, 3, 1, 4, 2, 5), False),  # 下坡后又上坡
        ((3, 6, 4), False),
        ((6, 4, 6), False),
        ((5, 6), False),
        ((1,), True),
    ],
)
def test_validate_path(t6, path, expected):
    assert topology.validate_path(t6, path) is expected


def test_validate_path_peer_budget():
    graph = topology.parse_as_relationships("1|2|0\n2|3|0\n")
    assert topology.validate_path(graph, (1, 2, 3), max_peer_links=2)
    assert not topology.validate_path(graph, (1, 2, 3), max_peer_links=1)


def test_validate_path_unknown_as(t6):
    with pytest.raises(UnknownAsError):
        topology.validate_path(t6, (6, 99))


@pytest.mark.parametrize(
    "src,dst,path",
    [
        (6, 5, (6, 4, 2, 5)),
        (6, 1, (6, 3, 1)),
        (1, 6, (1, 3, 6)),
        (3, 2, (3, 1, 2)),
        (5, 3, (5, 2, 1, 3)),
        (4, 4, (4,)),
    ],
)
def test_best_path(t6, src, dst, path):
    assert topology.best_path(t6, src, dst) == path


def test_best_path_unreachable():
    graph = topology.AsGraph(topology.parse_as_relationships("1|2|-1\n").edges, nodes=[3])
    assert topology.best_path(graph, 1, 3) is None
    assert topology.penultimate_hop(graph, 1, 3) is None


def test_best_path_unknown_destination(t6):
    with pytest.raises(UnknownAsError):
        topology.best_path(t6, 6, 99)


def test_penultimate_hop(t6):
    assert topology.penultimate_hop(t6, 6, 5) == 2
    assert topology.penultimate_hop(t6, 2, 5) == 2
    with pytest.raises(ValueError):
        topology.penultimate_hop(t6, 5, 5)


def test_routing_state_sources(t6):
    state = topology.routing_state(t6, 5)
    assert state.sources() == [1, 2, 3, 4, 6]
    assert state.path(5) == (5,)
    assert state.length[6] == 4


def _count_propagations(monkeypatch):
    calls = []
    propagate = topology._propagate

    def counting(graph, origins):
        calls.append(tuple(origins))
        return propagate(graph, origins)

    monkeypatch.setattr(topology, "_propagate", counting)
    return calls


def test_routing_state_computed_once_per_destination(monkeypatch):
    graph = synth.gen_topology(synth.TopologyGenParams(400, seed=2))
    calls = _count_propagations(monkeypatch)
    destinations = sorted(graph.nodes)[:200]
    first = [topology.routing_state(graph, d) for d in destinations]
    second = [topology.routing_state(graph, d) for d in destinations]
    assert len(calls) == 200
    assert all(a is b for a, b in zip(first, second))


def test_routing_cache_is_not_pickled(t6, monkeypatch):
    topology.routing_state(t6, 5)
    copy = pickle.loads(pickle.dumps(t6))
    calls = _count_propagations(monkeypatch)
    assert topology.best_path(copy, 6, 5) == topology.best_path(t6, 6, 5)
    assert len(calls) == 1


def test_simulate_hijack(t6):
    result = topology.simulate_hijack(t6, 5, 3)
    assert sorted(a for a, hit in result.items() if hit) == [1, 3, 4, 6]
    assert not result[2]
    with pytest.raises(ValueError):
        topology.simulate_hijack(t6, 5, 5)


def test_simulate_hijack_attacker_outside_graph(t6):
    result = topology.simulate_hijack(t6, 5, 99)
    assert result[99]
    assert not any(hit for asn, hit in result.items() if asn != 99)


def test_is_hijacked(t6):
    assert topology.is_hijacked(t6, 5, 3, 6)
    assert not topology.is_hijacked(t6, 5, 3, 2)
    assert topology.is_hijacked(t6, 5, 3, 3)


@pytest.mark.parametrize(
    "client,guard,expected",
    [(6, 4, Fraction(3, 4)), (6, 5, Fraction(0)), (5, 6, Fraction(1, 2))],
)
def test_resilience(t6, client, guard, expected):
    assert topology.resilience_fraction(t6, client, guard) == expected
    assert topology.resilience(t6, client, guard) == float(expected)


def test_resilience_no_candidates():
    graph = topology.parse_as_relationships("1|2|-1\n")
    assert topology.resilience(graph, 2, 1) == 1.0


def test_resilience_requires_distinct(t6):
    with pytest.raises(ValueError):
        topology.resilience(t6, 4, 4)


def test_routable_paths(t6):
    assert topology.routable_paths(t6, 6, 5, 1, 5) == {(6, 3, 1, 2, 5), (6, 4, 1, 2, 5), (6, 4, 2, 5)}
    assert topology.routable_paths(t6, 6, 5, 1, 4) == {(6, 4, 2, 5)}
    assert topology.routable_paths(t6, 6, 5, 0, 5) == {(6, 4, 2, 5)}


def test_routable_paths_are_valley_free(t6):
    for path in topology.routable_paths(t6, 5, 6):
        assert topology.validate_path(t6, path)


def test_client_isp_ases(t6):
    assert topology.client_isp_ases(t6) == {5, 6}


@pytest.mark.slow
def test_routing_state_scales():
    graph = synth.gen_topology(synth.TopologyGenParams(50_000, n_tiers=8, peer_prob=1e-5, seed=0))
    start = time.perf_counter()
    state = topology.routing_state(graph, max(graph.nodes))
    assert time.perf_counter() - start < 5.0
    assert len(state.sources()) == len(graph) - 1
