# -*- coding: utf-8 -*-
"""
合成数据与穷举 oracle 模块
=======================

桌面规模的可复现输入，以及测试和命令行共用的暴力参照实现：
- 分层拓扑生成（含按快照重连 provider 的拓扑序列）
- 签到轨迹、中继表、国家 → AS 映射的生成
- 基于 valley-free 剪枝的简单路径穷举，以及在其上迭代求稳定路由的路由、劫持、resilience 参照
- T6 回归表的生成

所有生成器都只依赖显式给出的种子，同一种子得到逐字节相同的结果。
oracle 只用于小图，超过 MAX_ORACLE_ASES 个 AS 时拒绝运行。
"""

import dataclasses
import datetime
import logging
from fractions import Fraction

import numpy as np

from src.core import anonnet, mobility, netlayer, topology
from src.core.errors import OracleGuardError
from src.core.topology import Relationship, RelKind

logger = logging.getLogger(__name__)

MAX_ORACLE_ASES = 16

# 合成签到轨迹的起始日期
TRACE_EPOCH = datetime.date(2016, 1, 1)

COUNTRY_CODES = (
    "US", "DE", "FR", "GB", "NL", "CA", "RU", "JP", "BR", "SE",
    "IT", "ES", "PL", "AU", "IN", "CH", "UA", "CZ", "KR", "MX",
)


@dataclasses.dataclass(frozen=True)
class TopologyGenParams:
    n_ases: int
    n_tiers: int = 3
    peer_prob: float = 0.1
    multihome_prob: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_ases < 1:
            raise ValueError("n_ases 至少为 1")
        if self.n_tiers < 1:
            raise ValueError("n_tiers 至少为 1")
        for name in ("peer_prob", "multihome_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} 必须在 [0, 1] 内: {value}")


def _tier_sizes(n, n_tiers):
    # 自顶向下每层规模按 2 的幂增长，每层至少一个 AS
    n_tiers = min(n_tiers, n)
    weights = np.array([2.0**t for t in range(n_tiers)])
    sizes = np.maximum(1, np.floor(n * weights / weights.sum()).astype(int))
    sizes[-1] += n - sizes.sum()
    while sizes[-1] < 1:
        i = int(np.argmax(sizes[:-1]))
        sizes[i] -= 1
        sizes[-1] += 1
    return [int(s) for s in sizes]


def _pairs_from_index(k):
    # 下三角线性编号 k → (i, j)，j < i
    i = np.floor((1 + np.sqrt(1 + 8 * k.astype(np.float64))) / 2).astype(np.int64)
    i -= (i * (i - 1) // 2 > k).astype(np.int64)
    i += ((i + 1) * i // 2 <= k).astype(np.int64)
    j = k - i * (i - 1) // 2
    return i, j


@dataclasses.dataclass
class _Layout:
    tiers: list
    providers: dict
    peers: set

    def graph(self):
        rels = [
            Relationship(p, c, RelKind.PROVIDER_CUSTOMER)
            for c in sorted(self.providers)
            for p in sorted(self.providers[c])
        ]
        rels.extend(Relationship(a, b, RelKind.PEER_PEER) for a, b in sorted(self.peers))
        nodes = [asn for tier in self.tiers for asn in tier]
        return topology.AsGraph(rels, nodes)


def _draw_providers(tiers, level, multihome_prob, rng):
    above = tiers[level - 1]
    first = above[int(rng.integers(len(above)))]
    chosen = {first}
    if len(above) > 1 and rng.random() < multihome_prob:
        rest = [a for a in above if a != first]
        chosen.add(rest[int(rng.integers(len(rest)))])
    return frozenset(chosen)


def _layout(params, rng):
    sizes = _tier_sizes(params.n_ases, params.n_tiers)
    tiers = []
    start = 1
    for size in sizes:
        tiers.append(list(range(start, start + size)))
        start += size

    providers = {}
    for level in range(1, len(tiers)):
        for asn in tiers[level]:
            providers[asn] = _draw_providers(tiers, level, params.multihome_prob, rng)

    top = tiers[0]
    peers = {(a, b) for i, a in enumerate(top) for b in top[i + 1 :]}
    for tier in tiers[1:]:
        m = len(tier)
        total = m * (m - 1) // 2
        if total == 0 or params.peer_prob == 0.0:
            continue
        count = int(rng.binomial(total, params.peer_prob))
        if count == 0:
            continue
        k = np.sort(rng.choice(total, size=count, replace=False))
        i, j = _pairs_from_index(k)
        peers.update((tier[int(b)], tier[int(a)]) for a, b in zip(i, j))
    return _Layout(tiers, providers, peers)


def gen_topology(params):
    """
    生成分层 AS 拓扑

    AS 按层连续编号（顶层从 1 开始）。顶层两两对等；其余每个 AS 从上一层
    选一个 provider，以 multihome_prob 的概率再选第二个；同层 AS 之间以
    peer_prob 的概率对等。provider 关系只从上层指向下层，因此天然无环，
    且每个 AS 都能沿 provider 链到达顶层，整图连通。
    """
    rng = np.random.default_rng(params.seed)
    graph = _layout(params, rng).graph()
    logger.debug("generated %r from seed %d", graph, params.seed)
    return graph


def gen_topology_series(params, n_snapshots, rewire_prob):
    """
    共享同一分层布局的拓扑快照序列

    第 0 个快照与 gen_topology(params) 相同；之后每个快照在前一个的基础上，
    让每个非顶层 AS 以 rewire_prob 的概率重新选择 provider。
    """
    if n_snapshots < 1:
        raise ValueError("n_snapshots 至少为 1")
    if not 0.0 <= rewire_prob <= 1.0:
        raise ValueError(f"rewire_prob 必须在 [0, 1] 内: {rewire_prob}")
    layout = _layout(params, np.random.default_rng(params.seed))
    rng = np.random.default_rng([params.seed, 1])
    graphs = [layout.graph()]
    for _ in range(1, n_snapshots):
        for level in range(1, len(layout.tiers)):
            for asn in layout.tiers[level]:
                if rng.random() < rewire_prob:
                    layout.providers[asn] = _draw_providers(layout.tiers, level, params.multihome_prob, rng)
        graphs.append(layout.graph())
    return graphs


def gen_mobility_traces(n_users, n_days, countries, move_prob, seed, checkin_prob=1.0):
    """
    生成每日签到轨迹

    每个用户从均匀随机的国家出发，之后每天以 move_prob 的概率移动到
    另一个国家，并以 checkin_prob 的概率签到一次。

    Returns:
        list[MobilityTrace]: 每个用户一条（可能为空的）轨迹，按用户 id 排序
    """
    countries = list(countries)
    if not countries:
        raise ValueError("countries 不能为空")
    rng = np.random.default_rng(seed)
    width = len(str(max(n_users, 1)))
    base = TRACE_EPOCH.toordinal()
    traces = []
    for u in range(n_users):
        user = f"u{u:0{width}d}"
        current = countries[int(rng.integers(len(countries)))]
        checkins = []
        for day in range(n_days):
            if day > 0 and len(countries) > 1 and rng.random() < move_prob:
                others = [c for c in countries if c != current]
                current = others[int(rng.integers(len(others)))]
            if rng.random() < checkin_prob:
                checkins.append(mobility.CheckIn(user, base + day, current))
        traces.append(mobility.MobilityTrace(user, tuple(checkins)))
    return traces


def gen_relays(graph, n_relays, guard_prob, seed):
    """
    生成中继表：所在 AS 在全部 AS 中均匀抽取，带宽为 [10, 1000) 的整数

    保证至少有一个 guard。
    """
    if n_relays < 1:
        raise ValueError("n_relays 至少为 1")
    rng = np.random.default_rng(seed)
    ases = sorted(graph.nodes)
    width = len(str(n_relays))
    hosts = rng.integers(len(ases), size=n_relays)
    bandwidths = rng.integers(10, 1000, size=n_relays)
    flags = rng.random(n_relays) < guard_prob
    if not flags.any():
        flags[0] = True
    return anonnet.RelaySet(
        tuple(
            anonnet.Relay(f"r{i:0{width}d}", ases[int(h)], float(bw), bool(f))
            for i, (h, bw, f) in enumerate(zip(hosts, bandwidths, flags))
        )
    )


def gen_country_map(graph, countries, seed):
    """每个国家映射到一个均匀抽取的客户端 ISP"""
    rng = np.random.default_rng(seed)
    clients = sorted(topology.client_isp_ases(graph))
    return mobility.CountryAsMap({c: clients[int(rng.integers(len(clients)))] for c in countries})


# --------------------------------------------------------------------------
# 穷举 oracle
# --------------------------------------------------------------------------


def _guard(graph):
    if len(graph) > MAX_ORACLE_ASES:
        raise OracleGuardError(f"oracle 只能用于不超过 {MAX_ORACLE_ASES} 个 AS 的图，当前 {len(graph)} 个")


def oracle_enumerate_paths(graph, src, dst, max_peer_links=1, max_len=None):
    """
    穷举 src 到 dst 的全部简单 valley-free 路径

    Raises:
        OracleGuardError: 图的规模超过上限
        ValueError: src == dst
    """
    _guard(graph)
    if src == dst:
        raise ValueError("oracle_enumerate_paths 要求 src != dst")
    graph.require(src, dst)
    limit = len(graph) if max_len is None else max_len
    return graph.memo(
        ("oracle-paths", src, dst, max_peer_links, limit),
        lambda: frozenset(_walk_valley_free(graph, src, dst, max_peer_links, limit)),
    )


def _walk_valley_free(graph, src, dst, max_peer_links, max_len):
    """
    沿 networkx 邻接做深度优先搜索，只扩展仍然 valley-free 的前缀

    前缀的合法性用 validate_path 的同一套角色规则逐边判断：
    UP 之后可以接任何边，PEER 计数不超过 max_peer_links，进入 DOWN 后只能继续 DOWN。
    """
    nxg = graph.nx_graph
    path = [src]
    on_path = {src}

    def extend(phase, peer_links):
        u = path[-1]
        if u == dst:
            yield tuple(path)
            return
        if len(path) >= max_len:
            return
        for v in sorted(nxg.neighbors(u)):
            if v in on_path:
                continue
            role = graph.role(u, v)
            if role == topology.EdgeRole.UP:
                if phase != topology.EdgeRole.UP:
                    continue
                step = (role, peer_links)
            elif role == topology.EdgeRole.PEER:
                if phase == topology.EdgeRole.DOWN or peer_links >= max_peer_links:
                    continue
                step = (role, peer_links + 1)
            else:
                step = (topology.EdgeRole.DOWN, peer_links)
            path.append(v)
            on_path.add(v)
            yield from extend(*step)
            path.pop()
            on_path.discard(v)

    yield from extend(topology.EdgeRole.UP, 0)


def _route_key(graph, path):
    # 本地偏好（首条边的角色）→ 路径长度 → 下一跳
    return (graph.role(path[0], path[1]), len(path), path[1])


def _stable_routes(graph, origins):
    """
    逐轮迭代求稳定路由

    每个 AS 的候选是它到各起源的全部 valley-free 路径。一条候选路径
    只有在其尾部恰好是下一跳当前所选路由时才可用，所以每轮只需检查
    (src,) + best[邻居] 是否在候选集合中。迭代到所有 AS 的选择不再变化。
    """
    _guard(graph)
    origins = tuple(sorted(set(origins)))
    return graph.memo(("oracle-routes", origins), lambda: _iterate_routes(graph, origins))


def _iterate_routes(graph, origins):
    present = [o for o in origins if o in graph]
    candidates = {}
    for src in sorted(graph.nodes):
        if src in origins:
            continue
        paths = set()
        for o in present:
            paths |= oracle_enumerate_paths(graph, src, o, max_peer_links=1)
        candidates[src] = paths

    best = {o: (o,) for o in origins}
    for _ in range(4 * len(graph) + 4):
        updated = dict(best)
        for src, paths in candidates.items():
            usable = [
                (src,) + best[v]
                for v in graph.nx_graph.neighbors(src)
                if v in best and (src,) + best[v] in paths
            ]
            if usable:
                updated[src] = min(usable, key=lambda p: _route_key(graph, p))
            else:
                updated.pop(src, None)
        if updated == best:
            return best
        best = updated
    raise OracleGuardError("路由迭代没有收敛")


def oracle_routing_state(graph, destination):
    graph.require(destination)

    def compute():
        best = _stable_routes(graph, [destination])
        next_hop = {asn: (p[1] if len(p) > 1 else None) for asn, p in best.items()}
        length = {asn: len(p) for asn, p in best.items()}
        return topology.RoutingState(destination, next_hop, length)

    return graph.memo(("oracle-routing", destination), compute)


def oracle_best_path(graph, src, dst):
    graph.require(src)
    return oracle_routing_state(graph, dst).path(src)


def oracle_simulate_hijack(graph, origin, attacker):
    if attacker == origin:
        raise ValueError("attacker 不能与 origin 相同")
    graph.require(origin)
    best = _stable_routes(graph, [origin, attacker])
    result = {asn: best.get(asn, (None,))[-1] == attacker for asn in sorted(graph.nodes)}
    result[attacker] = True
    return result


def oracle_resilience(graph, client, guard_as):
    """返回精确有理数"""
    if client == guard_as:
        raise ValueError("resilience 要求 client != guard_as")
    graph.require(client, guard_as)
    candidates = topology.attacker_candidates(graph, client, guard_as)
    if not candidates:
        return Fraction(1)
    failures = sum(1 for a in candidates if not oracle_simulate_hijack(graph, guard_as, a)[client])
    return Fraction(failures, len(candidates))


def oracle_location_set(graph, predecessor, position, max_peer_links=1, observer=None):
    """逐个客户端 ISP 穷举恰含 (position - 1) 个 AS、以前驱结尾的路径"""
    _guard(graph)
    length = position - 1
    found = set()
    for client in sorted(topology.client_isp_ases(graph)):
        if client == predecessor:
            if length == 1 and client != observer:
                found.add(client)
            continue
        for path in oracle_enumerate_paths(graph, client, predecessor, max_peer_links, max_len=length):
            if len(path) == length and observer not in path:
                found.add(client)
                break
    return frozenset(found)


def oracle_gselect(graph, relays, client, suspects):
    suspects = frozenset(suspects)
    weights = {}
    for g in relays.eligible_guards():
        path = oracle_best_path(graph, client, g.host_as)
        if path is not None and suspects.isdisjoint(path):
            weights[g.id] = Fraction(g.bandwidth)
    total = sum(weights.values())
    return {k: float(w / total) for k, w in sorted(weights.items())}


def oracle_counter_raptor(graph, relays, client, alpha):
    guards = relays.eligible_guards()
    alpha = Fraction(alpha)
    total_bw = sum(Fraction(g.bandwidth) for g in guards)
    weights = {}
    for g in guards:
        r = Fraction(1) if g.host_as == client else oracle_resilience(graph, client, g.host_as)
        weights[g.id] = alpha * r + (1 - alpha) * Fraction(g.bandwidth) / total_bw
    total = sum(weights.values())
    return {k: float(w / total) for k, w in sorted(weights.items()) if w > 0}


def oracle_phi_build(graph, src, helper, dst, max_peer_links=1):
    half = oracle_best_path(graph, src, helper)
    if half is None:
        return None
    for i in range(len(half) - 1, -1, -1):
        route = oracle_best_path(graph, half[i], dst)
        if route is None:
            continue
        full = half[:i] + route
        if topology.validate_path(graph, full, max_peer_links):
            return netlayer.PhiPath(half, half[i], full, helper)
    return None


# --------------------------------------------------------------------------
# T6 回归表
# --------------------------------------------------------------------------

T6_GSELECT_RELAYS = anonnet.RelaySet(
    (anonnet.Relay("g5", 5, 300.0, True), anonnet.Relay("g3", 3, 100.0, True))
)
T6_CR_RELAYS = anonnet.RelaySet(
    (anonnet.Relay("g5", 5, 300.0, True), anonnet.Relay("g4", 4, 100.0, True))
)

T6_QUERIES = {
    "routable_paths": [(6, 5, 1, 5), (6, 5, 1, 4), (6, 5, 0, 5)],
    "gselect": [(6, (1,)), (4, (1,)), (6, (2,)), (5, (1,))],
    "counter_raptor": [(6, 0.5), (6, 0.0), (6, 1.0)],
    "hijack": [(5, 3), (4, 1), (4, 3), (5, 2)],
    "resilience": [(6, 4), (6, 5), (5, 6)],
    "location_set": [(4, 3, None), (4, 2, None), (1, 4, 2), (1, 4, None)],
    "phi": [(6, 1, 5), (6, 2, 5), (5, 3, 6), (3, 5, 6)],
    "hornet_source_set": [(5, 2), (5, 4)],
}


def freeze_t6_table(graph):
    """
    用 oracle 计算 T6 回归表

    输出结构与 fixtures/t6_regression.json 一致，快速实现的测试逐项比对。
    """
    _guard(graph)
    ases = sorted(graph.nodes)
    states = {dst: oracle_routing_state(graph, dst) for dst in ases}
    pairs = [(s, d) for d in ases for s in ases if s != d]

    table = {
        "best_path": [
            {"src": s, "dst": d, "path": _as_list(states[d].path(s))} for s, d in pairs
        ],
        "penultimate_hop": [
            {"src": s, "dst": d, "penultimate": (states[d].path(s) or (None, None))[-2]}
            for s, d in pairs
        ],
        "client_isp_ases": sorted(topology.client_isp_ases(graph)),
    }
    table["routable_paths"] = [
        {
            "src": s,
            "dst": d,
            "max_peer_links": peers,
            "max_len": max_len,
            "paths": sorted(list(p) for p in oracle_enumerate_paths(graph, s, d, peers, max_len)),
        }
        for s, d, peers, max_len in T6_QUERIES["routable_paths"]
    ]
    table["gselect"] = [
        {"client": c, "suspects": list(sus), "dist": oracle_gselect(graph, T6_GSELECT_RELAYS, c, sus)}
        for c, sus in T6_QUERIES["gselect"]
    ]
    table["counter_raptor"] = [
        {"client": c, "alpha": alpha, "dist": oracle_counter_raptor(graph, T6_CR_RELAYS, c, alpha)}
        for c, alpha in T6_QUERIES["counter_raptor"]
    ]
    table["hijack"] = [
        {
            "origin": o,
            "attacker": a,
            "hijacked": [asn for asn, hit in sorted(oracle_simulate_hijack(graph, o, a).items()) if hit],
        }
        for o, a in T6_QUERIES["hijack"]
    ]
    table["resilience"] = [
        {"client": c, "guard_as": g, "value": str(oracle_resilience(graph, c, g))}
        for c, g in T6_QUERIES["resilience"]
    ]
    table["location_set"] = [
        {
            "predecessor": p,
            "position": k,
            "observer": obs,
            "set": sorted(oracle_location_set(graph, p, k, observer=obs)),
        }
        for p, k, obs in T6_QUERIES["location_set"]
    ]
    table["phi"] = []
    for s, h, d in T6_QUERIES["phi"]:
        path = oracle_phi_build(graph, s, h, d)
        table["phi"].append(
            {
                "src": s,
                "helper": h,
                "dst": d,
                "midway": None if path is None else path.midway,
                "full_path": None if path is None else list(path.full_path),
            }
        )
    table["hornet_source_set"] = [
        {
            "dst": d,
            "penultimate": x,
            "set": [s for s in ases if s != d and (states[d].path(s) or (None, None))[-2] == x],
        }
        for d, x in T6_QUERIES["hornet_source_set"]
    ]
    return table


def _as_list(path):
    return None if path is None else list(path)

