# -*- coding: utf-8 -*-
import io

import numpy as np
import pytest

from src.core import anonnet
from src.core.anonnet import CounterRaptorConfig, Relay, RelaySet
from src.core.errors import EmptySuspectFreeSetError, NoEligibleGuardError, ParseError, TempestError


def test_parse_relays(t6_relays):
    assert [r.id for r in t6_relays.guards()] == ["g3", "g5"]
    assert t6_relays.top_guards(1)[0].id == "g5"


@pytest.mark.parametrize(
    "text,line",
    [
        ("id,as,bw,is_guard\n", 1),
        ("id,as,bandwidth,is_guard\nr1,5,10\n", 2),
        ("id,as,bandwidth,is_guard\nr1,5,ten,1\n", 2),
        ("id,as,bandwidth,is_guard\nr1,5,10,yes\n", 2),
        ("id,as,bandwidth,is_guard\nr1,5,10,1\nr1,6,10,1\n", 3),
        ("id,as,bandwidth,is_guard\nr1,5,-1,1\n", 2),
    ],
)
def test_parse_relays_errors(text, line):
    with pytest.raises(ParseError) as excinfo:
        anonnet.parse_relays(text, "relays.csv")
    assert excinfo.value.line == line


def test_parse_relays_empty_body():
    assert len(anonnet.parse_relays("id,as,bandwidth,is_guard\n")) == 0


def test_vanilla_guard_dist(t6_relays):
    dist = anonnet.vanilla_guard_dist(t6_relays)
    assert dist.support == {"g3": 0.25, "g5": 0.75}
    assert dist.hosts == {"g3": 3, "g5": 5}


def test_vanilla_skips_zero_bandwidth_and_non_guards():
    relays = RelaySet((Relay("a", 1, 0.0, True), Relay("b", 2, 50.0, False), Relay("c", 3, 10.0, True)))
    assert anonnet.vanilla_guard_dist(relays).support == {"c": 1.0}


def test_vanilla_without_guards():
    with pytest.raises(NoEligibleGuardError):
        anonnet.vanilla_guard_dist(RelaySet((Relay("b", 2, 50.0, False),)))


def test_guard_distribution_sample_is_seeded(t6_relays):
    dist = anonnet.vanilla_guard_dist(t6_relays)
    first = [dist.sample(np.random.default_rng(3)) for _ in range(5)]
    second = [dist.sample(np.random.default_rng(3)) for _ in range(5)]
    assert first == second
    assert set(first) <= {"g3", "g5"}


def test_write_distribution_csv(t6_relays):
    out = io.StringIO()
    anonnet.write_distribution_csv(anonnet.vanilla_guard_dist(t6_relays), out)
    assert out.getvalue() == "entity,probability\ng3,0.25\ng5,0.75\n"


@pytest.mark.parametrize(
    "client,suspects,expected",
    [
        (6, {1}, {"g3": 0.25, "g5": 0.75}),
        (4, {1}, {"g5": 1.0}),
        (6, {2}, {"g3": 1.0}),
        (5, {1}, {"g5": 1.0}),
    ],
)
def test_gselect(t6, t6_relays, client, suspects, expected):
    assert anonnet.gselect_guard_dist(t6, t6_relays, client, suspects).support == expected


def test_gselect_support_is_suspect_free(t6, t6_relays):
    dist = anonnet.gselect_guard_dist(t6, t6_relays, 6, {1})
    for relay_id in dist.ids():
        assert anonnet.path_contains(t6, 6, dist.hosts[relay_id], {1}) is False


def test_gselect_empty_suspect_free_set(t6, t6_relays):
    with pytest.raises(EmptySuspectFreeSetError):
        anonnet.gselect_guard_dist(t6, t6_relays, 6, {3, 4})
    with pytest.raises(ValueError):
        anonnet.gselect_guard_dist(t6, t6_relays, 5, set())


def test_counter_raptor(t6, t6_cr_relays):
    dist = anonnet.counter_raptor_guard_dist(t6, t6_cr_relays, 6, CounterRaptorConfig(0.5))
    assert dist.support == {"g4": 4 / 7, "g5": 3 / 7}


def test_counter_raptor_extremes(t6, t6_cr_relays, t6_relays):
    assert anonnet.counter_raptor_guard_dist(t6, t6_cr_relays, 6, CounterRaptorConfig(0.0)).support == (
        anonnet.vanilla_guard_dist(t6_cr_relays).support
    )
    # R(6, 5) = 0，只剩 g4
    assert anonnet.counter_raptor_guard_dist(t6, t6_cr_relays, 6, CounterRaptorConfig(1.0)).support == {"g4": 1.0}


def test_counter_raptor_config_range():
    with pytest.raises(TempestError):
        CounterRaptorConfig(1.5)


def test_taps_cluster(t6, t6_relays):
    # 只用 g5、对手 AS1：6→5 与 4→5 都绕开 AS1，3→5 经过 AS1
    clustering = anonnet.taps_cluster(t6, {3, 4, 6}, [6, 3], [1], t6_relays, top_k_guards=1)
    assert clustering.assignment == {3: 3, 4: 6, 6: 6}
    assert clustering.medoids == (3, 6)
    assert clustering.members(6) == {4, 6}
    assert clustering.clusters() == {3: frozenset({3}), 6: frozenset({4, 6})}


def test_taps_cluster_ties_go_to_lowest_medoid(t6, t6_relays):
    clustering = anonnet.taps_cluster(t6, {5, 6}, [6, 5], [3], t6_relays, top_k_guards=1)
    # 两个客户端到 AS5 的路径都不经过 AS3，特征完全相同
    assert clustering.assignment == {5: 5, 6: 5}


def test_taps_cluster_is_deterministic(t6, t6_relays):
    a = anonnet.taps_cluster(t6, {3, 4, 5, 6}, [3, 6], [1, 2], t6_relays, top_k_guards=2)
    b = anonnet.taps_cluster(t6, {6, 5, 4, 3}, [6, 3], [1, 2], t6_relays, top_k_guards=2)
    assert a == b


def test_taps_cluster_medoid_must_be_client(t6, t6_relays):
    with pytest.raises(ValueError):
        anonnet.taps_cluster(t6, {5, 6}, [3], [1], t6_relays, top_k_guards=1)
