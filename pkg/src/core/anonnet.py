# -*- coding: utf-8 -*-
"""
洋葱路由网络模块
==============

中继表以及四种 guard / 路径选择算法：
- Vanilla Tor：按带宽加权
- DeNASA g-select：只在 suspect-free 的 guard 中按带宽加权
- Counter-RAPTOR：resilience 与带宽的线性混合
- TAPS 风格聚类：把客户端位置聚到固定的代表位置上

所有操作都是不可变输入上的纯函数。
"""

import csv
import dataclasses
import io
import logging
import math
from fractions import Fraction

import numpy as np

from src.core import topology
from src.core.errors import (
    EmptySuspectFreeSetError,
    NoEligibleGuardError,
    ParseError,
    TempestError,
)

logger = logging.getLogger(__name__)

RELAY_HEADER = ["id", "as", "bandwidth", "is_guard"]


@dataclasses.dataclass(frozen=True)
class Relay:
    """一个中继：指纹、所在 AS、带宽权重、是否带 guard 标记"""

    id: str
    host_as: int
    bandwidth: float
    is_guard: bool

    def __post_init__(self):
        if self.bandwidth < 0:
            raise TempestError(f"中继 {self.id} 的带宽为负: {self.bandwidth}")


@dataclasses.dataclass(frozen=True)
class RelaySet:
    relays: tuple

    def __post_init__(self):
        ids = [r.id for r in self.relays]
        if len(ids) != len(set(ids)):
            raise TempestError("中继 id 重复")

    def __iter__(self):
        return iter(self.relays)

    def __len__(self):
        return len(self.relays)

    def guards(self):
        """带 guard 标记的中继，按 id 排序"""
        return sorted((r for r in self.relays if r.is_guard), key=lambda r: r.id)

    def eligible_guards(self):
        """带宽为正的 guard"""
        return [r for r in self.guards() if r.bandwidth > 0]

    def top_guards(self, k):
        """带宽最大的 k 个 guard，带宽相同时按 id 排序"""
        return sorted(self.guards(), key=lambda r: (-r.bandwidth, r.id))[:k]


def parse_relays(text, source="<string>"):
    """
    解析中继 CSV

    表头必须为 `id,as,bandwidth,is_guard`，is_guard 取 0 或 1。
    空文件得到空的 RelaySet。

    Raises:
        ParseError: 行格式错误或 id 重复，包含行号
    """
    reader = csv.reader(io.StringIO(text))
    relays = []
    seen = set()
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1:
            if [c.strip() for c in row] != RELAY_HEADER:
                raise ParseError(source, lineno, f"表头应为 {','.join(RELAY_HEADER)}")
            continue
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise ParseError(source, lineno, f"应有 4 列，实际 {len(row)} 列")
        relay_id, asn, bw, flag = (c.strip() for c in row)
        try:
            host_as = int(asn)
            bandwidth = float(bw)
        except ValueError:
            raise ParseError(source, lineno, "AS 号或带宽不是数字") from None
        if host_as < 1 or not math.isfinite(bandwidth) or bandwidth < 0:
            raise ParseError(source, lineno, "AS 号必须为正，带宽必须为非负有限数")
        if flag not in ("0", "1"):
            raise ParseError(source, lineno, f"is_guard 只能是 0 或 1: '{flag}'")
        if relay_id in seen:
            raise ParseError(source, lineno, f"中继 id 重复: {relay_id}")
        seen.add(relay_id)
        relays.append(Relay(relay_id, host_as, bandwidth, flag == "1"))
    logger.info("read %s: %d relays", source, len(relays))
    return RelaySet(tuple(relays))


@dataclasses.dataclass(frozen=True)
class GuardDistribution:
    """
    guard 选择分布

    support 为中继 id → 概率（只保留正概率项），hosts 为中继 id → 所在 AS。
    """

    support: dict
    hosts: dict

    @classmethod
    def from_weights(cls, weights, hosts):
        """
        把非负权重归一化为分布

        权重按精确有理数归一化，每个概率只在最后舍入一次。

        Args:
            weights (dict): 中继 id → 非负权重
            hosts (dict): 中继 id → 所在 AS

        Raises:
            NoEligibleGuardError: 权重总和为零
        """
        positive = {k: Fraction(w) for k, w in sorted(weights.items()) if w > 0}
        total = sum(positive.values(), Fraction(0))
        if total <= 0:
            raise NoEligibleGuardError("没有权重为正的 guard")
        return cls(
            {k: float(w / total) for k, w in positive.items()},
            {k: hosts[k] for k in positive},
        )

    def probability(self, relay_id):
        return self.support.get(relay_id, 0.0)

    def ids(self):
        return sorted(self.support)

    def sample(self, rng):
        """按分布抽取一个 guard id"""
        ids = self.ids()
        probs = np.array([self.support[i] for i in ids])
        return ids[int(rng.choice(len(ids), p=probs / probs.sum()))]


def write_distribution_csv(dist, fd):
    """以 `entity,probability` 格式导出分布"""
    writer = csv.writer(fd, lineterminator="\n")
    writer.writerow(["entity", "probability"])
    for relay_id in dist.ids():
        writer.writerow([relay_id, repr(dist.support[relay_id])])


@dataclasses.dataclass(frozen=True)
class CounterRaptorConfig:
    """alpha 为 resilience 的权重，(1 - alpha) 为带宽占比的权重"""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise TempestError(f"alpha 必须在 [0, 1] 内: {self.alpha}")


def _eligible(relays):
    guards = relays.eligible_guards()
    if not guards:
        raise NoEligibleGuardError("中继表中没有带宽为正的 guard")
    return guards


def vanilla_guard_dist(relays):
    """Vanilla Tor：按带宽比例选择 guard"""
    guards = _eligible(relays)
    return GuardDistribution.from_weights(
        {g.id: g.bandwidth for g in guards}, {g.id: g.host_as for g in guards}
    )


def path_contains(graph, src, dst, ases):
    """
    src 到 dst 的最优路径是否经过 ases 中的任何一个（端点也算）

    不可达时返回 None，由调用方决定如何处理。
    """
    path = topology.best_path(graph, src, dst)
    if path is None:
        return None
    return not ases.isdisjoint(path)


def gselect_guard_dist(graph, relays, client, suspects):
    """
    DeNASA g-select

    只在 suspect-free 的 guard 中按带宽加权。客户端到 guard 所在 AS
    的最优路径上（包括两端）出现任何嫌疑 AS 即排除；不可达的 guard 也排除。

    Raises:
        NoEligibleGuardError: 中继表中没有可选 guard
        EmptySuspectFreeSetError: 所有 guard 都被排除
    """
    suspects = frozenset(suspects)
    if not suspects:
        raise ValueError("suspects 不能为空")
    graph.require(client)
    guards = _eligible(relays)
    weights = {}
    for g in guards:
        if g.host_as not in graph:
            continue
        if path_contains(graph, client, g.host_as, suspects) is False:
            weights[g.id] = g.bandwidth
    if not weights:
        raise EmptySuspectFreeSetError(f"AS{client} 没有 suspect-free 的 guard")
    return GuardDistribution.from_weights(weights, {g.id: g.host_as for g in guards})


def counter_raptor_guard_dist(graph, relays, client, cfg):
    """
    Counter-RAPTOR

    guard i 的权重为 alpha * R_i + (1 - alpha) * bw_i / sum(bw)，
    R_i = resilience(client, host_as(i))，再归一化。
    guard 与客户端同处一个 AS 时没有可劫持的路径，R 取 1.0。
    """
    graph.require(client)
    guards = _eligible(relays)
    alpha = Fraction(cfg.alpha)
    total_bw = sum((Fraction(g.bandwidth) for g in guards), Fraction(0))
    weights = {}
    for g in guards:
        share = Fraction(g.bandwidth) / total_bw
        if alpha == 0:
            weights[g.id] = share
            continue
        if g.host_as == client:
            r = Fraction(1)
        elif g.host_as in graph:
            r = topology.resilience_fraction(graph, client, g.host_as)
        else:
            r = Fraction(0)
        weights[g.id] = alpha * r + (1 - alpha) * share
    return GuardDistribution.from_weights(weights, {g.id: g.host_as for g in guards})


@dataclasses.dataclass(frozen=True)
class Clustering:
    """客户端 AS → 簇编号（即代表位置的 AS 号）"""

    assignment: dict
    medoids: tuple

    def cluster_of(self, client):
        return self.assignment.get(client)

    def members(self, cluster_id):
        return frozenset(c for c, k in self.assignment.items() if k == cluster_id)

    def clusters(self):
        groups = {m: set() for m in self.medoids}
        for client, k in self.assignment.items():
            groups[k].add(client)
        return {m: frozenset(v) for m, v in groups.items()}


def taps_features(graph, clients, adversary_ases, guards):
    """
    每个客户端的二值特征矩阵

    第 (g, a) 位表示对手 AS a 是否出现在客户端到 guard g 的最优路径上。
    不可达的组合记为 0。

    Returns:
        dict: 客户端 AS → numpy 0/1 向量
    """
    columns = [(g.host_as, a) for g in guards for a in adversary_ases]
    features = {}
    for client in sorted(clients):
        bits = np.zeros(len(columns), dtype=np.int8)
        paths = {}
        for j, (host, adversary) in enumerate(columns):
            if host not in graph:
                continue
            if host not in paths:
                paths[host] = topology.best_path(graph, client, host)
            path = paths[host]
            if path is not None and adversary in path:
                bits[j] = 1
        features[client] = bits
    return features


def taps_cluster(graph, client_ases, medoids, adversary_ases, guards, top_k_guards):
    """
    TAPS 风格的确定性聚类

    特征为 (带宽前 k 的 guard, 对手 AS) 的在路径标记，每个客户端
    分配给 Hamming 距离最小的代表位置，距离相同时取 AS 号较小的代表。

    Args:
        graph (AsGraph): 当前拓扑快照
        client_ases: 参与聚类的客户端 AS
        medoids (list): 代表位置，须属于客户端集合
        adversary_ases (list): 显式给出的对手 AS 列表
        guards (RelaySet): 中继表
        top_k_guards (int): 参与特征构造的 guard 数

    Raises:
        ValueError: 代表位置为空或不在客户端集合中
    """
    if not medoids:
        raise ValueError("medoids 不能为空")
    if top_k_guards < 1:
        raise ValueError("top_k_guards 至少为 1")
    clients = frozenset(client_ases)
    missing = [m for m in medoids if m not in clients]
    if missing:
        raise ValueError(f"代表位置不在客户端集合中: {missing}")
    graph.require(*clients)

    ordered_medoids = tuple(sorted(set(medoids)))
    top = guards.top_guards(top_k_guards)
    logger.debug("clustering %d clients over %d guards", len(clients), len(top))
    features = taps_features(graph, clients, list(adversary_ases), top)
    medoid_matrix = np.array([features[m] for m in ordered_medoids])

    assignment = {}
    for client in sorted(clients):
        distances = np.count_nonzero(medoid_matrix != features[client], axis=1)
        # argmin 返回第一个最小值，medoid 已按 AS 号升序
        assignment[client] = ordered_medoids[int(np.argmin(distances))]
    return Clustering(assignment, ordered_medoids)
