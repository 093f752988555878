# -*- coding: utf-8 -*-
"""
AS 拓扑模块
==========

负责 AS 关系图的解析与路由推断，包括：
- CAIDA serial-2 关系文件的解析与序列化
- valley-free 路径校验
- 按 Gao-Rexford 策略计算到某个目的 AS 的路由表
- 同等前缀长度的源劫持模拟与 resilience 计算
- 源路由网络中的可路由路径枚举

AsGraph 构建后不可变，所有路由表都可以安全地并发读取。
"""

import bz2
import dataclasses
import enum
import functools
import logging
from collections import Counter, defaultdict
from fractions import Fraction
from pathlib import Path

import networkx as nx

from src.core.errors import ParseError, TopologyValidationError, UnknownAsError

logger = logging.getLogger(__name__)

AsId = int
AsPath = tuple[int, ...]

EDGE_REL = "rel"


class RelKind(enum.IntEnum):
    """serial-2 文件中的关系编码"""

    PROVIDER_CUSTOMER = -1
    PEER_PEER = 0


class EdgeRole(enum.IntEnum):
    """
    沿 u→v 方向经过一条边时的角色

    数值越小的路由在本地偏好中越优先：从 customer 学到的路由
    对应 DOWN，从 peer 学到的对应 PEER，从 provider 学到的对应 UP。
    """

    DOWN = 0
    PEER = 1
    UP = 2


@dataclasses.dataclass(frozen=True)
class Relationship:
    """一条 AS 关系。ProviderCustomer 时 a 是 b 的 provider"""

    a: AsId
    b: AsId
    kind: RelKind

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyValidationError(f"AS{self.a} 不能与自身建立关系")

    @property
    def pair(self):
        return frozenset((self.a, self.b))


class AsGraph:
    """
    带关系标注的 AS 图

    内部用 networkx 无向图保存边与关系属性，另外按角色建立
    customers / providers / peers 三个邻接索引，供路由推断直接查表。
    构建时校验 provider→customer 关系无环。
    """

    def __init__(self, relationships=(), nodes=()):
        """
        Args:
            relationships: Relationship 的可迭代对象
            nodes: 额外的孤立 AS（serial-2 格式无法表达孤立节点）
        """
        g = nx.Graph()
        g.add_nodes_from(nodes)
        seen = {}
        for rel in relationships:
            previous = seen.get(rel.pair)
            if previous is not None:
                if previous != rel:
                    raise TopologyValidationError(
                        f"AS{rel.a} 与 AS{rel.b} 的关系冲突: {previous.kind.name} / {rel.kind.name}"
                    )
                continue
            seen[rel.pair] = rel
            g.add_edge(rel.a, rel.b, **{EDGE_REL: rel})

        customers = defaultdict(set)
        providers = defaultdict(set)
        peers = defaultdict(set)
        hierarchy = nx.DiGraph()
        hierarchy.add_nodes_from(g.nodes)
        for rel in seen.values():
            if rel.kind == RelKind.PROVIDER_CUSTOMER:
                customers[rel.a].add(rel.b)
                providers[rel.b].add(rel.a)
                hierarchy.add_edge(rel.a, rel.b)
            else:
                peers[rel.a].add(rel.b)
                peers[rel.b].add(rel.a)

        if not nx.is_directed_acyclic_graph(hierarchy):
            cycle = nx.find_cycle(hierarchy)
            ases = " -> ".join(f"AS{u}" for u, _ in cycle)
            raise TopologyValidationError(f"provider 关系存在环路: {ases}")

        self._g = nx.freeze(g)
        self._nodes = frozenset(g.nodes)
        self._customers = {asn: frozenset(v) for asn, v in customers.items()}
        self._providers = {asn: frozenset(v) for asn, v in providers.items()}
        self._peers = {asn: frozenset(v) for asn, v in peers.items()}
        self._edges = tuple(sorted(seen.values(), key=lambda r: (min(r.a, r.b), max(r.a, r.b))))
        self._memo = {}

    def __getstate__(self):
        # 派生缓存不随图一起序列化，进程池里的副本各自重建
        state = self.__dict__.copy()
        state["_memo"] = {}
        return state

    def memo(self, key, compute):
        """
        按 key 缓存由这张图唯一确定的派生结果

        缓存挂在图对象上，不限条数，图释放时一起释放。
        """
        try:
            return self._memo[key]
        except KeyError:
            value = self._memo[key] = compute()
            return value

    @property
    def nodes(self):
        return self._nodes

    @property
    def edges(self):
        return self._edges

    @property
    def nx_graph(self):
        """只读的 networkx 视图，供穷举 oracle 和连通性检查使用"""
        return self._g

    def __contains__(self, asn):
        return asn in self._nodes

    def __len__(self):
        return len(self._nodes)

    def __repr__(self):
        return f"AsGraph(nodes={len(self._nodes)}, edges={len(self._edges)})"

    def customers_of(self, asn):
        return self._customers.get(asn, frozenset())

    def providers_of(self, asn):
        return self._providers.get(asn, frozenset())

    def peers_of(self, asn):
        return self._peers.get(asn, frozenset())

    def neighbors_of(self, asn):
        return self.customers_of(asn) | self.providers_of(asn) | self.peers_of(asn)

    def role(self, u, v):
        """u→v 方向的边角色；不相邻时返回 None"""
        if v in self.providers_of(u):
            return EdgeRole.UP
        if v in self.customers_of(u):
            return EdgeRole.DOWN
        if v in self.peers_of(u):
            return EdgeRole.PEER
        return None

    def require(self, *ases):
        """确认给定的 AS 都在图中，否则抛出 UnknownAsError"""
        for asn in ases:
            if asn not in self._nodes:
                raise UnknownAsError(asn)


def _parse_asn(token, source, lineno):
    try:
        asn = int(token)
    except ValueError:
        raise ParseError(source, lineno, f"无法解析的 AS 号 '{token}'") from None
    if asn < 1:
        raise ParseError(source, lineno, f"AS 号必须为正整数: {asn}")
    return asn


def parse_as_relationships(text, source="<string>"):
    """
    解析 CAIDA serial-2 格式的 AS 关系文本

    每个非注释行形如 `<as1>|<as2>|<rel>`，rel 为 -1 表示 as1 是 as2 的
    provider，0 表示对等。serial-2 的第四列（数据来源）会被忽略。

    Args:
        text (str): 文件内容（LF 或 CRLF 换行均可）
        source (str): 出错时报告的来源名称

    Returns:
        AsGraph: 构建好的关系图

    Raises:
        ParseError: 行格式错误，错误信息包含行号
        TopologyValidationError: 关系冲突或 provider 环路
    """
    relationships = []
    cnt = Counter(lines=0, relationships=0)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        cnt["lines"] += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) < 3:
            raise ParseError(source, lineno, f"字段数不足: '{line}'")
        a = _parse_asn(fields[0], source, lineno)
        b = _parse_asn(fields[1], source, lineno)
        try:
            kind = RelKind(int(fields[2]))
        except ValueError:
            raise ParseError(source, lineno, f"未知的关系编码 '{fields[2]}'") from None
        if a == b:
            raise ParseError(source, lineno, f"AS{a} 自环")
        relationships.append(Relationship(a, b, kind))
        cnt["relationships"] += 1

    graph = AsGraph(relationships)
    logger.info(
        "read %s: %d lines, %d relationships, %d ASes",
        source,
        cnt["lines"],
        cnt["relationships"],
        len(graph),
    )
    return graph


def load_as_graph(filepath):
    """从文件读取关系图，支持 .bz2 压缩的 CAIDA 原始文件"""
    path = Path(filepath)
    if path.suffix == ".bz2":
        with bz2.open(path, "rt", encoding="utf-8") as fd:
            text = fd.read()
    else:
        text = path.read_text(encoding="utf-8")
    return parse_as_relationships(text, source=str(path))


def serialize_as_relationships(graph):
    """把关系图写回 serial-2 文本，边按 AS 号排序，输出字节确定"""
    lines = ["# as1|as2|rel"]
    for rel in sorted(graph.edges, key=lambda r: (r.a, r.b)):
        lines.append(f"{rel.a}|{rel.b}|{int(rel.kind)}")
    return "\n".join(lines) + "\n"


def validate_path(graph, path, max_peer_links=1):
    """
    判断一条 AS 路径是否 valley-free

    合法路径的角色序列为 UP* PEER{0..max_peer_links} DOWN*，且不含重复 AS。

    Raises:
        UnknownAsError: 路径中包含图外的 AS（与“路径不合法”区分开）
    """
    graph.require(*path)
    if not path or len(set(path)) != len(path):
        return False
    phase = EdgeRole.UP
    peer_links = 0
    for u, v in zip(path, path[1:]):
        role = graph.role(u, v)
        if role is None:
            return False
        if role == EdgeRole.UP:
            if phase != EdgeRole.UP:
                return False
        elif role == EdgeRole.PEER:
            if phase == EdgeRole.DOWN:
                return False
            peer_links += 1
            if peer_links > max_peer_links:
                return False
            phase = EdgeRole.PEER
        else:
            phase = EdgeRole.DOWN
    return True


@dataclasses.dataclass(frozen=True)
class RoutingState:
    """
    到某个目的 AS 的路由表

    只保存每个 AS 的下一跳和路径长度，完整路径按需沿下一跳展开。
    不可达的 AS 不出现在表中。
    """

    destination: AsId
    next_hop: dict
    length: dict

    def __contains__(self, asn):
        return asn in self.next_hop

    def path(self, src):
        """src 选中的完整路径；不可达时返回 None"""
        if src not in self.next_hop:
            return None
        hops = [src]
        nxt = self.next_hop[src]
        while nxt is not None:
            hops.append(nxt)
            nxt = self.next_hop[nxt]
        return tuple(hops)

    def sources(self):
        return sorted(asn for asn in self.next_hop if asn != self.destination)


def _propagate(graph, origins):
    """
    三阶段路由传播

    1. customer 路由：从起源向 provider 方向逐层扩散；
    2. peer 路由：拥有 customer 路由（或自身即起源）的 AS 向 peer 导出；
    3. provider 路由：所有已有路由的 AS 按路径长度分桶，逐桶向 customer 导出。

    每个阶段内先比较路径长度，再比较下一跳 AS 号（取较小者），
    逐跳确定，因此结果是图的确定函数。起源 AS 永远保留自己的路由。

    Returns:
        tuple: (next_hop, length, origin_of) 三个字典
    """
    next_hop = {}
    length = {}
    origin_of = {}
    for o in sorted(set(origins)):
        next_hop[o] = None
        length[o] = 1
        origin_of[o] = o

    def adopt(asn, via):
        next_hop[asn] = via
        length[asn] = length[via] + 1
        origin_of[asn] = origin_of[via]

    frontier = sorted(next_hop)
    while frontier:
        offers = {}
        for u in frontier:
            for p in graph.providers_of(u):
                if p in next_hop:
                    continue
                if p not in offers or u < offers[p]:
                    offers[p] = u
        for p, u in offers.items():
            adopt(p, u)
        frontier = sorted(offers)

    peer_offers = {}
    for u in sorted(next_hop):
        for p in graph.peers_of(u):
            if p in next_hop:
                continue
            offer = (length[u] + 1, u)
            if p not in peer_offers or offer < peer_offers[p]:
                peer_offers[p] = offer
    for p, (_, u) in peer_offers.items():
        adopt(p, u)

    buckets = defaultdict(list)
    for asn, n in length.items():
        buckets[n].append(asn)
    level = min(buckets) if buckets else 0
    while buckets and level <= max(buckets):
        offers = {}
        for u in sorted(buckets.get(level, ())):
            for c in graph.customers_of(u):
                if c in next_hop:
                    continue
                if c not in offers or u < offers[c]:
                    offers[c] = u
        for c, u in offers.items():
            adopt(c, u)
            buckets[level + 1].append(c)
        level += 1

    return next_hop, length, origin_of


def routing_state(graph, destination):
    """
    计算所有 AS 到 destination 的最优 valley-free 路由

    选路规则：本地偏好 customer > peer > provider，其次路径最短，
    最后下一跳 AS 号最小。导出遵循 Gao-Rexford 规则。
    每个目的 AS 只传播一次，结果缓存在图上。
    """
    graph.require(destination)

    def compute():
        next_hop, length, _ = _propagate(graph, [destination])
        return RoutingState(destination, next_hop, length)

    return graph.memo(("routing", destination), compute)


def best_path(graph, src, dst):
    """src 到 dst 的最优路径；src == dst 时为单点路径，不可达时为 None"""
    graph.require(src)
    return routing_state(graph, dst).path(src)


def penultimate_hop(graph, src, dst):
    """
    最优路径上目的 AS 的前一跳

    路径为 [src, dst] 时返回 src 本身。不可达时返回 None。
    """
    if src == dst:
        raise ValueError("penultimate_hop 要求 src != dst")
    path = best_path(graph, src, dst)
    if path is None:
        return None
    return path[-2]


def simulate_hijack(graph, origin, attacker):
    """
    同等前缀长度的源劫持

    origin 与 attacker 同时宣告同一前缀，各 AS 按与 routing_state
    相同的决策过程选择路由。所选路由起源为 attacker 的 AS 视为被劫持。
    attacker 可以不在图中（此时只有它自己被劫持）。

    Returns:
        dict: AS → 是否被劫持；图中所有 AS 以及 attacker 都有条目
    """
    if attacker == origin:
        raise ValueError("attacker 不能与 origin 相同")
    hijacked = _hijacked_set(graph, origin, attacker)
    result = {asn: asn in hijacked for asn in sorted(graph.nodes)}
    result[attacker] = True
    return result


@functools.lru_cache(maxsize=1 << 16)
def _hijacked_set(graph, origin, attacker):
    graph.require(origin)
    _, _, origin_of = _propagate(graph, [origin, attacker])
    return frozenset(asn for asn, o in origin_of.items() if o == attacker)


def is_hijacked(graph, origin, attacker, asn):
    """asn 是否被 attacker 对 origin 前缀的劫持所吸引，attacker 自身总是 True"""
    if asn == attacker:
        return True
    if attacker == origin:
        raise ValueError("attacker 不能与 origin 相同")
    return asn in _hijacked_set(graph, origin, attacker)


def attacker_candidates(graph, client, guard_as):
    """resilience 的候选攻击者：除 client 与 guard 所在 AS 外的所有 AS"""
    return sorted(graph.nodes - {client, guard_as})


def resilience_fraction(graph, client, guard_as):
    """resilience 的精确分数形式，供需要精确加权的调用方使用"""
    if client == guard_as:
        raise ValueError("resilience 要求 client != guard_as")
    graph.require(client, guard_as)
    candidates = attacker_candidates(graph, client, guard_as)
    if not candidates:
        return Fraction(1)
    failures = sum(1 for a in candidates if client not in _hijacked_set(graph, guard_as, a))
    return Fraction(failures, len(candidates))


def resilience(graph, client, guard_as):
    """
    client 对 guard 所在前缀的劫持抵抗度

    候选攻击者中无法劫持 client 的比例；没有候选攻击者时为 1.0。
    """
    return float(resilience_fraction(graph, client, guard_as))


def iter_valley_free_paths(graph, start, max_peer_links, max_len, banned=frozenset()):
    """
    深度优先枚举从 start 出发的所有简单 valley-free 路径（含每个前缀）

    valley-free 关系对路径反转封闭，所以同一个遍历既能用于正向选路，
    也能用于“哪些 AS 能以给定长度到达某个前驱”这类反向查询。
    """
    if start in banned:
        return
    path = [start]
    on_path = {start}

    def extend(phase, peer_links):
        yield tuple(path)
        if len(path) >= max_len:
            return
        u = path[-1]
        moves = []
        if phase == EdgeRole.UP:
            moves.extend((v, EdgeRole.UP, peer_links) for v in graph.providers_of(u))
        if phase != EdgeRole.DOWN and peer_links < max_peer_links:
            moves.extend((v, EdgeRole.PEER, peer_links + 1) for v in graph.peers_of(u))
        moves.extend((v, EdgeRole.DOWN, peer_links) for v in graph.customers_of(u))
        for v, next_phase, links in sorted(moves):
            if v in on_path or v in banned:
                continue
            path.append(v)
            on_path.add(v)
            yield from extend(next_phase, links)
            path.pop()
            on_path.discard(v)

    yield from extend(EdgeRole.UP, 0)


@functools.lru_cache(maxsize=4096)
def sorted_routable_paths(graph, src, dst, max_peer_links, max_len):
    found = []
    for path in iter_valley_free_paths(graph, src, max_peer_links, max_len):
        if path[-1] == dst:
            found.append(path)
    return tuple(sorted(found))


def routable_paths(graph, src, dst, max_peer_links=1, max_len=8):
    """
    源路由网络中 src 可以使用的全部路径

    即所有 peer 边不超过 max_peer_links、长度不超过 max_len 的
    简单 valley-free 路径。
    """
    if src == dst:
        raise ValueError("routable_paths 要求 src != dst")
    graph.require(src, dst)
    return frozenset(sorted_routable_paths(graph, src, dst, max_peer_links, max_len))


def client_isp_ases(graph):
    """没有 customer 的 AS，可作为客户端所在 ISP"""
    return frozenset(asn for asn in graph.nodes if not graph.customers_of(asn))
