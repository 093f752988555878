# -*- coding: utf-8 -*-
"""
网络层匿名协议模块
================

只建模“谁观察到什么”，不涉及报文格式与密码学：
- Dovetail：head 路径段构造、dovetail 位置上的 (前驱, 绝对位置) 观测、
  以及由观测反推的客户端位置集合
- PHI：half-path 构造与 midway 回退、相对位置观测
- HORNET：目的 AS 观察到的倒数第二跳与对应的源集合
"""

import dataclasses
import enum
import functools
import logging

from src.core import topology

logger = logging.getLogger(__name__)

OBSERVATION_HEADER = ["kind", "predecessor", "position", "destination", "timestamp"]


@dataclasses.dataclass(frozen=True)
class DovetailParams:
    """
    Dovetail 路径参数

    min_head_len 默认取 6；桌面规模的拓扑往往容纳不下 6 个 AS 的路径，
    因此允许调小。
    """

    min_head_len: int = 6
    max_peer_links: int = 1
    max_len: int = 8


@dataclasses.dataclass(frozen=True)
class DovetailObservation:
    predecessor: int
    position: int
    destination: int | None = None

    def __post_init__(self):
        if self.position < 2:
            raise ValueError(f"观测位置至少为 2: {self.position}")


@dataclasses.dataclass(frozen=True)
class DovetailPath:
    """head 为 源 → matchmaker 的路径，dovetail 为 head 的倒数第二个 AS"""

    head: tuple
    dovetail: int
    matchmaker: int

    def observation_at(self, adversary, destination=None):
        """
        位于 dovetail 位置的对手得到的观测；不在该位置或位置为 1 时返回 None

        位置从源 AS 记为 1 开始计数。
        """
        if adversary != self.dovetail:
            return None
        position = len(self.head) - 1
        if position < 2:
            return None
        return DovetailObservation(self.head[-3], position, destination)


def dovetail_build(graph, src, matchmaker, min_head_len, max_peer_links, max_len, rng):
    """
    构造一条 Dovetail head 路径

    在 src 到 matchmaker 的可路由路径中，长度不小于 min_head_len 的
    那些里均匀随机选一条（候选按字典序排列后用 rng 抽取）。
    没有候选时返回 None。
    """
    if src == matchmaker:
        raise ValueError("dovetail_build 要求 src != matchmaker")
    candidates = [
        p
        for p in topology.sorted_routable_paths(graph, src, matchmaker, max_peer_links, max_len)
        if len(p) >= min_head_len
    ]
    if not candidates:
        return None
    head = candidates[int(rng.integers(len(candidates)))]
    return DovetailPath(head, head[-2], matchmaker)


@functools.lru_cache(maxsize=1 << 14)
def _location_set(graph, predecessor, length, max_peer_links, observer):
    clients = topology.client_isp_ases(graph)
    banned = frozenset() if observer is None else frozenset((observer,))
    found = set()
    # valley-free 对反转封闭：从前驱出发枚举长度恰为 length 的路径，终点即候选源
    for path in topology.iter_valley_free_paths(graph, predecessor, max_peer_links, length, banned):
        if len(path) == length and path[-1] in clients:
            found.add(path[-1])
    return frozenset(found)


def dovetail_location_set(graph, obs, max_peer_links=1, observer=None):
    """
    由 (前驱 P, 位置 k) 反推可能的客户端位置

    即所有客户端 ISP 中，存在一条恰含 (k - 1) 个 AS、以 P 结尾、
    peer 边不超过 max_peer_links 的简单 valley-free 路径的那些 AS。

    Args:
        observer (int, optional): 作出观测的 AS。给出时候选路径不得经过它，
            因为生成观测的完整路径是简单路径。
    """
    if obs.position < 2:
        raise ValueError("观测位置至少为 2")
    if obs.predecessor not in graph:
        return frozenset()
    return _location_set(graph, obs.predecessor, obs.position - 1, max_peer_links, observer)


class RelativePosition(enum.Enum):
    BEFORE_MIDWAY = "before"
    MIDWAY = "midway"
    AFTER_MIDWAY = "after"


@dataclasses.dataclass(frozen=True)
class PhiPath:
    half_path: tuple
    midway: int
    full_path: tuple
    helper: int

    @property
    def destination(self):
        return self.full_path[-1]


@dataclasses.dataclass(frozen=True)
class PhiObservation:
    """predecessor 为 None 表示观测者就是源 AS 且担任 midway"""

    predecessor: int | None
    relative_position: RelativePosition
    destination: int


def phi_build(graph, src, helper, dst, max_peer_links=1):
    """
    构造一条 PHI 路径

    half_path 取 src 到 helper 的最优路径；从 helper 开始向源回退，
    选出第一个“从前驱接入后接上自己到 dst 的最优路由仍然 valley-free”
    的 AS 作为 midway。完整路径为 half_path 截至 midway 的前缀
    加上 midway 到 dst 的最优路由。

    Returns:
        PhiPath | None: half_path 不可达或找不到 midway 时为 None
    """
    if len({src, helper, dst}) != 3:
        raise ValueError("phi_build 要求 src、helper、dst 互不相同")
    half = topology.best_path(graph, src, helper)
    if half is None:
        return None
    for i in range(len(half) - 1, -1, -1):
        midway = half[i]
        route = topology.best_path(graph, midway, dst)
        if route is None:
            continue
        full = half[:i] + route
        if topology.validate_path(graph, full, max_peer_links):
            return PhiPath(half, midway, full, helper)
    return None


def phi_observe(path, adversary):
    """
    对手 AS 在 PHI 路径上的观测

    对手不在完整路径上，或位于 midway 之前（此时不知道目的地），返回 None。
    """
    if adversary not in path.full_path:
        return None
    index = path.full_path.index(adversary)
    midway_index = path.full_path.index(path.midway)
    if index < midway_index:
        return None
    predecessor = path.full_path[index - 1] if index > 0 else None
    position = RelativePosition.MIDWAY if index == midway_index else RelativePosition.AFTER_MIDWAY
    return PhiObservation(predecessor, position, path.destination)


@dataclasses.dataclass(frozen=True)
class HornetObservation:
    """目的 AS 看到的一次连接：倒数第二跳与其所在的天序号"""

    destination: int
    penultimate: int
    timestamp: int


def hornet_observe(graph, src, dst, timestamp):
    """
    src 在 timestamp 那天连接 dst 时，目的 AS 的观测

    src 与 dst 同处、任一方不在图中或不可达时没有观测，返回 None。
    倒数第二跳取自最优路径，因此总与 dst 相邻。
    """
    if src == dst or src not in graph or dst not in graph:
        return None
    penultimate = topology.penultimate_hop(graph, src, dst)
    if penultimate is None:
        return None
    return HornetObservation(dst, penultimate, timestamp)


def hornet_source_set(graph, dst, penultimate):
    """当前以 penultimate 为倒数第二跳到达 dst 的所有源 AS"""
    if dst not in graph:
        return frozenset()
    state = topology.routing_state(graph, dst)
    found = set()
    for src in state.sources():
        path = state.path(src)
        if path[-2] == penultimate:
            found.add(src)
    return frozenset(found)


def observation_row(kind, predecessor, position, destination, timestamp=""):
    """观测的 CSV 行，列顺序见 OBSERVATION_HEADER"""
    return [kind, "" if predecessor is None else predecessor, position, destination, timestamp]


def dovetail_observation_row(obs):
    return observation_row("dovetail", obs.predecessor, obs.position, obs.destination or "")


def phi_observation_row(obs):
    return observation_row("phi", obs.predecessor, obs.relative_position.value, obs.destination)


def hornet_observation_row(obs):
    return observation_row("hornet", obs.penultimate, "", obs.destination, obs.timestamp)
