# -*- coding: utf-8 -*-
"""
时间维度攻击模块
==============

各攻击引擎都是 (拓扑, 协议模型, 场景参数, 随机数流) 的确定函数：
- 移动性攻击：Vanilla / Counter-RAPTOR / DeNASA 下客户端-guard 连接被观测的概率
- 多次 guard 观测下的贝叶斯位置推断（DeNASA、Counter-RAPTOR）
- Dovetail 的 (前驱, 位置) 交集攻击与 dovetail 频率统计
- PHI 的 midway 频率统计与猜测攻击
- HORNET 的移动性分类攻击与倒数第二跳变化分析
- TAPS 的簇交集攻击

连接关联（linking）作为对手的能力直接给出：模拟中同一客户端的观测
天然归为一组，引擎只使用对手能看到的观测内容。
"""

import csv
import dataclasses
import enum
import functools
import io
import logging
import math
from collections import Counter, defaultdict

import numpy as np

from src.core import anonnet, mobility, netlayer, topology
from src.core.errors import (
    InconsistentObservationError,
    NoEligibleGuardError,
    ParseError,
)
from src.core.metrics import entropy_bits

logger = logging.getLogger(__name__)

# HORNET 移动性攻击中权重 e^(a·N) 的默认指数
DEFAULT_WEIGHT_EXPONENT = 0.1

ROUTE_CHANGE_HEADER = ["probe", "day", "origin_as", "penultimate_as"]


@dataclasses.dataclass(frozen=True)
class AnonymitySet:
    """
    候选集合

    inconsistent 为 True 表示某次求交得到了空集，说明观测关联有误。
    """

    members: frozenset
    inconsistent: bool = False

    def __contains__(self, item):
        return item in self.members

    def __len__(self):
        return len(self.members)

    @property
    def size(self):
        return len(self.members)


def intersect(anonset, update):
    """求交；结果为空时只做标记并记录警告，不抛异常"""
    members = anonset.members & frozenset(update)
    if not members and not anonset.inconsistent:
        logger.warning("anonymity set became empty, observations are inconsistent")
    return AnonymitySet(members, anonset.inconsistent or not members)


@dataclasses.dataclass(frozen=True)
class PosteriorBelief:
    """对手关于客户端位置的概率分布，只保存正概率项"""

    probabilities: dict

    def __post_init__(self):
        total = math.fsum(self.probabilities.values())
        if self.probabilities and abs(total - 1.0) > 1e-9:
            raise ValueError(f"后验概率之和应为 1，实际 {total}")
        if any(p < 0 for p in self.probabilities.values()):
            raise ValueError("后验概率不能为负")

    @classmethod
    def uniform(cls, candidates):
        candidates = sorted(set(candidates))
        if not candidates:
            raise ValueError("候选集合不能为空")
        return cls({c: 1.0 / len(candidates) for c in candidates})

    def probability(self, location):
        return self.probabilities.get(location, 0.0)

    def support(self):
        return frozenset(self.probabilities)

    def top(self):
        """概率最大的位置及其概率；并列时取编号较小者"""
        best = min(self.probabilities.items(), key=lambda kv: (-kv[1], kv[0]))
        return best


def bayes_location_inference(candidates, likelihood, prior, observations):
    """
    贝叶斯位置推断

    posterior(L) ∝ prior(L) · Π likelihood(obs_i, L)，在对数空间累加，
    归一化前减去最大值，避免多次观测后下溢。

    Args:
        candidates: 候选位置集合
        likelihood: 函数 (observation, location) -> 概率
        prior (PosteriorBelief): 先验，支撑集必须在候选集合内
        observations (list): 观测序列

    Raises:
        ValueError: 先验的支撑集超出候选集合
        InconsistentObservationError: 所有候选的后验质量都为零
    """
    candidates = sorted(set(candidates))
    if not prior.support() <= set(candidates):
        raise ValueError("先验的支撑集必须包含在候选集合内")
    observations = list(observations)
    if not observations:
        return prior

    locations = [c for c in candidates if prior.probability(c) > 0]
    log_mass = np.full(len(locations), -np.inf)
    for i, location in enumerate(locations):
        total = math.log(prior.probability(location))
        for obs in observations:
            p = likelihood(obs, location)
            if p <= 0:
                total = -np.inf
                break
            total += math.log(p)
        log_mass[i] = total

    if not np.isfinite(log_mass).any():
        raise InconsistentObservationError(f"{len(observations)} 条观测在所有候选位置下的似然均为零")
    weights = np.exp(log_mass - log_mass.max())
    weights /= weights.sum()
    return PosteriorBelief(
        {loc: float(w) for loc, w in zip(locations, weights) if w > 0}
    )


class Decision(enum.Enum):
    GUESS = "guess"
    REJECT = "reject"


@dataclasses.dataclass(frozen=True)
class GuessOutcome:
    """
    一次猜测的结果

    candidate 为得分最高的候选（拒绝时也保留，便于换阈值重新判定），
    score 为其权重占比或后验概率。
    """

    decision: Decision
    candidate: object
    score: float

    @classmethod
    def decide(cls, candidate, score, threshold):
        if candidate is not None and score >= threshold:
            return cls(Decision.GUESS, candidate, score)
        return cls(Decision.REJECT, candidate, score)

    @classmethod
    def reject(cls):
        return cls(Decision.REJECT, None, 0.0)

    @property
    def is_guess(self):
        return self.decision == Decision.GUESS

    @property
    def guess(self):
        return self.candidate if self.is_guess else None

    def rethreshold(self, threshold):
        return GuessOutcome.decide(self.candidate, self.score, threshold)


# --------------------------------------------------------------------------
# 移动性攻击
# --------------------------------------------------------------------------


def on_path_predicate(graph, adversary):
    """对手是否出现在客户端到 guard 所在 AS 的最优路径上（端点也算）"""

    def compromised(client, guard_as):
        if adversary not in graph or client not in graph or guard_as not in graph:
            return False
        path = topology.best_path(graph, client, guard_as)
        return path is not None and adversary in path

    return compromised


def suspects_predicate(graph, suspects):
    """任意一个嫌疑 AS 出现在客户端到 guard 的最优路径上"""
    suspects = frozenset(suspects)

    def compromised(client, guard_as):
        if client not in graph or guard_as not in graph:
            return False
        return anonnet.path_contains(graph, client, guard_as, suspects) is True

    return compromised


def hijack_predicate(graph, adversary):
    """
    对手能否通过同等前缀劫持 guard 所在前缀而截获客户端流量

    对手本身就是客户端或 guard 所在 AS 时直接视为成功。
    """

    def compromised(client, guard_as):
        if adversary in (client, guard_as):
            return True
        if adversary not in graph or client not in graph or guard_as not in graph:
            return False
        return topology.is_hijacked(graph, guard_as, adversary, client)

    return compromised


def mobility_compromise_prob(graph, locations, guard_dist_fn, compromised):
    """
    客户端移动过程中至少一次被观测到的概率

    guard 在 locations[0] 处选定后保持不变，概率按该处的 guard 分布加权：
    Σ_g Pr(g) · 1[存在某个位置 ℓ 使 compromised(ℓ, host_as(g))]。

    Args:
        graph (AsGraph): 拓扑
        locations (list): 按时间排列的客户端 AS 序列
        guard_dist_fn: 函数 location -> GuardDistribution
        compromised: 函数 (client_as, guard_as) -> bool

    Raises:
        ValueError: locations 为空
        NoEligibleGuardError: 初始位置没有可选 guard
    """
    if not locations:
        raise ValueError("locations 不能为空")
    dist = guard_dist_fn(locations[0])
    terms = []
    for relay_id in dist.ids():
        host = dist.hosts[relay_id]
        if any(compromised(loc, host) for loc in locations):
            terms.append(dist.support[relay_id])
    return math.fsum(terms)


def mobility_compromise_curve(graph, locations, guard_dist_fn, compromised):
    """依次取 locations 的前缀，返回每个前缀下的被观测概率"""
    return [
        mobility_compromise_prob(graph, locations[: i + 1], guard_dist_fn, compromised)
        for i in range(len(locations))
    ]


# --------------------------------------------------------------------------
# 多次 guard 观测的贝叶斯推断
# --------------------------------------------------------------------------


def _candidate_dists(candidates, guard_dist_fn):
    dists = {}
    for location in candidates:
        try:
            dists[location] = guard_dist_fn(location)
        except NoEligibleGuardError:
            # 该位置选不出 guard，任何观测在它下面的似然都为零
            dists[location] = None
    return dists


def guard_inference_sim(candidates, guard_dist_fn, true_client, n_observations, rng):
    """
    重复 guard 观测下的位置推断

    真实客户端按自身的 guard 分布有放回地选择 guard，对手每看到一次
    选择就用各候选位置的 guard 分布作为似然更新后验，先验为均匀分布。

    Returns:
        list[PosteriorBelief]: 长度为 n_observations + 1，第 0 项为先验
    """
    candidates = sorted(set(candidates))
    if true_client not in candidates:
        raise ValueError(f"真实客户端 AS{true_client} 不在候选集合中")
    if n_observations < 0:
        raise ValueError("n_observations 不能为负")
    true_dist = guard_dist_fn(true_client)
    dists = _candidate_dists(candidates, guard_dist_fn)

    def likelihood(relay_id, location):
        dist = dists[location]
        return 0.0 if dist is None else dist.probability(relay_id)

    belief = PosteriorBelief.uniform(candidates)
    beliefs = [belief]
    for i in range(n_observations):
        relay_id = true_dist.sample(rng)
        belief = bayes_location_inference(candidates, likelihood, belief, [relay_id])
        beliefs.append(belief)
        logger.debug("observation %d: guard %s, entropy %.4f", i + 1, relay_id, entropy_bits(belief))
    return beliefs


def denasa_guard_inference_sim(graph, relays, suspects, true_client, candidates, n_observations, rng):
    """DeNASA g-select 下的多 guard 推断"""
    suspects = frozenset(suspects)
    return guard_inference_sim(
        candidates,
        lambda location: anonnet.gselect_guard_dist(graph, relays, location, suspects),
        true_client,
        n_observations,
        rng,
    )


def counter_raptor_guard_inference_sim(graph, relays, cfg, true_client, candidates, n_observations, rng):
    """Counter-RAPTOR 下的多 guard 推断"""
    return guard_inference_sim(
        candidates,
        lambda location: anonnet.counter_raptor_guard_dist(graph, relays, location, cfg),
        true_client,
        n_observations,
        rng,
    )


def rank_leaky_clients(candidates, guard_dist_fn, top_n=None):
    """
    按单次观测后的期望后验熵升序排列候选客户端

    期望对客户端自身的 guard 分布求取，先验为均匀分布。
    选不出 guard 的位置不参与排序。

    Returns:
        list[tuple]: (客户端 AS, 期望熵) 列表，熵相同时按 AS 号排序
    """
    dists = {k: v for k, v in _candidate_dists(sorted(set(candidates)), guard_dist_fn).items() if v}
    if not dists:
        return []
    # 均匀先验下，观测到 g 后的后验 ∝ Pr(g | L)
    posterior_entropy = {}
    for relay_id in sorted({r for d in dists.values() for r in d.ids()}):
        weights = {loc: d.probability(relay_id) for loc, d in dists.items()}
        total = math.fsum(weights.values())
        posterior_entropy[relay_id] = entropy_bits({loc: w / total for loc, w in weights.items()})

    ranking = []
    for location, dist in dists.items():
        expected = math.fsum(p * posterior_entropy[r] for r, p in dist.support.items())
        ranking.append((location, expected))
    ranking.sort(key=lambda item: (item[1], item[0]))
    return ranking if top_n is None else ranking[:top_n]


# --------------------------------------------------------------------------
# Dovetail
# --------------------------------------------------------------------------


def _choose(pool, rng):
    return pool[int(rng.integers(len(pool)))]


def iter_dovetail_anonymity_sets(graph, adversary, true_client, matchmakers, n_connections, params, rng):
    """
    逐次连接给出对手维护的候选集合

    初始集合为全部客户端 ISP。每次连接客户端从 matchmaker 池中
    均匀选一个（排除自身）构造 head 路径；对手恰好处于 dovetail 位置时，
    用 (前驱, 位置) 反推的位置集合求交，否则集合不变。
    """
    clients = topology.client_isp_ases(graph)
    if true_client not in clients:
        raise ValueError(f"AS{true_client} 不是客户端 ISP")
    pool = sorted(set(matchmakers) - {true_client})
    if not pool:
        raise ValueError("matchmaker 池为空")
    anonset = AnonymitySet(clients)
    for i in range(n_connections):
        matchmaker = _choose(pool, rng)
        path = netlayer.dovetail_build(
            graph,
            true_client,
            matchmaker,
            params.min_head_len,
            params.max_peer_links,
            params.max_len,
            rng,
        )
        obs = path.observation_at(adversary) if path is not None else None
        if obs is not None:
            update = netlayer.dovetail_location_set(graph, obs, params.max_peer_links, observer=adversary)
            anonset = intersect(anonset, update)
            logger.debug("connection %d: observed %s, set size %d", i + 1, obs, anonset.size)
        yield anonset


def dovetail_intersection_sim(graph, adversary, true_client, matchmakers, n_connections, params, rng):
    """每次连接后候选集合的大小"""
    return [
        s.size
        for s in iter_dovetail_anonymity_sets(
            graph, adversary, true_client, matchmakers, n_connections, params, rng
        )
    ]


def dovetail_frequency(graph, n_samples, params, rng, sources=None, matchmakers=None):
    """
    dovetail 位置的选中频率

    均匀抽取 (源, matchmaker) 对并构造 head 路径，统计各 AS 担任
    dovetail 的比例。构造失败的样本不计入任何 AS，因此比例之和不超过 1。

    Args:
        sources: 源 AS 池，默认全部客户端 ISP
        matchmakers: matchmaker 池，默认全部 AS
    """
    if n_samples < 1:
        raise ValueError("n_samples 至少为 1")
    sources = sorted(sources if sources is not None else topology.client_isp_ases(graph))
    matchmakers = sorted(matchmakers if matchmakers is not None else graph.nodes)
    counts = Counter()
    for _ in range(n_samples):
        src = _choose(sources, rng)
        pool = [m for m in matchmakers if m != src]
        if not pool:
            continue
        path = netlayer.dovetail_build(
            graph, src, _choose(pool, rng), params.min_head_len, params.max_peer_links, params.max_len, rng
        )
        if path is not None:
            counts[path.dovetail] += 1
    return {asn: counts[asn] / n_samples for asn in sorted(counts)}


# --------------------------------------------------------------------------
# PHI
# --------------------------------------------------------------------------


def phi_midway_frequency(graph, n_samples, rng, sources=None, helpers=None, destinations=None):
    """
    midway 的选中频率

    均匀抽取互不相同的 (源, helper, 目的) 三元组构造 PHI 路径，
    统计各 AS 担任 midway 的比例。
    """
    if n_samples < 1:
        raise ValueError("n_samples 至少为 1")
    everyone = sorted(graph.nodes)
    sources = sorted(sources) if sources is not None else everyone
    helpers = sorted(helpers) if helpers is not None else everyone
    destinations = sorted(destinations) if destinations is not None else everyone
    counts = Counter()
    for _ in range(n_samples):
        src = _choose(sources, rng)
        helper_pool = [h for h in helpers if h != src]
        if not helper_pool:
            continue
        helper = _choose(helper_pool, rng)
        dst_pool = [d for d in destinations if d not in (src, helper)]
        if not dst_pool:
            continue
        path = netlayer.phi_build(graph, src, helper, _choose(dst_pool, rng))
        if path is not None:
            counts[path.midway] += 1
    return {asn: counts[asn] / n_samples for asn in sorted(counts)}


@functools.lru_cache(maxsize=1 << 16)
def _phi_likelihood(graph, obs, location, adversary, helpers):
    pool = [h for h in helpers if h not in (location, obs.destination)]
    if not pool or location == obs.destination:
        return 0.0
    hits = 0
    for helper in pool:
        path = netlayer.phi_build(graph, location, helper, obs.destination)
        if path is not None and netlayer.phi_observe(path, adversary) == obs:
            hits += 1
    return hits / len(pool)


def phi_observation_likelihood(graph, obs, location, adversary, helpers):
    """
    位于 location 的客户端在 adversary 处产生恰好为 obs 的观测的概率

    对手假设客户端从 helpers 中均匀选择 helper。不经过对手的连接
    （即非观测）不计入似然。
    """
    return _phi_likelihood(graph, obs, location, adversary, tuple(sorted(set(helpers))))


def phi_guess_sim(graph, adversary, true_client, dst, helpers, n_connections, candidates, threshold, rng, assumed_helpers=None):
    """
    PHI 重复连接攻击

    客户端每次从 helpers 中有放回地均匀选择 helper 连接固定的目的 AS。
    对手每次得到可用观测就更新后验，以最大后验概率作为猜测得分。

    Args:
        assumed_helpers: 对手计算似然时假设的 helper 池，默认全部 AS

    Returns:
        list[GuessOutcome]: 第 i 项为 i + 1 次连接后的判定
    """
    candidates = sorted(set(candidates))
    if true_client not in candidates:
        raise ValueError(f"真实客户端 AS{true_client} 不在候选集合中")
    pool = sorted(set(helpers) - {true_client, dst})
    if not pool:
        raise ValueError("helper 池为空")
    assumed = tuple(sorted(set(assumed_helpers if assumed_helpers is not None else graph.nodes)))

    def likelihood(obs, location):
        return phi_observation_likelihood(graph, obs, location, adversary, assumed)

    belief = PosteriorBelief.uniform(candidates)
    outcomes = []
    for i in range(n_connections):
        path = netlayer.phi_build(graph, true_client, _choose(pool, rng), dst)
        obs = netlayer.phi_observe(path, adversary) if path is not None else None
        if obs is not None:
            belief = bayes_location_inference(candidates, likelihood, belief, [obs])
            logger.debug("connection %d: observed %s", i + 1, obs)
        location, score = belief.top()
        outcomes.append(GuessOutcome.decide(location, score, threshold))
    return outcomes


# --------------------------------------------------------------------------
# HORNET
# --------------------------------------------------------------------------


def _location_penultimate(graph, asn, dst, day):
    # 与目的 AS 同处或不可达时没有观测，记为 None
    obs = netlayer.hornet_observe(graph, asn, dst, day)
    return None if obs is None else obs.penultimate


def hornet_daily_observations(trace, country_map, graph, dst):
    """
    目标假名在每个有签到的日子里，目的 AS 观察到的倒数第二跳

    Returns:
        dict: 天序号 → 倒数第二跳（可能为 None）
    """
    return {
        day: _location_penultimate(graph, asn, dst, day)
        for day, asn in mobility.daily_locations(trace, country_map).items()
    }


def hornet_mobility_attack(traces, country_map, graph, dst, target_connections, a=DEFAULT_WEIGHT_EXPONENT, threshold=0.75):
    """
    HORNET 移动性分类攻击

    从全部用户出发，逐日剔除当天签到位置给出不同倒数第二跳的用户，
    当天没有签到的用户保留。幸存者权重为 e^(a·N_i)，N_i 为签到点数；
    权重最大者的占比不低于阈值时猜测该用户，否则拒绝。

    Args:
        traces (list[MobilityTrace]): 候选用户轨迹
        country_map (CountryAsMap): 国家到 AS 的映射
        graph (AsGraph): 拓扑
        dst (int): 目的 AS
        target_connections (dict): 天序号 → 假名连接的倒数第二跳
        a (float): 权重指数
        threshold (float): 猜测阈值，取值 (0, 1]
    """
    if a <= 0:
        raise ValueError("a 必须为正")
    if not 0 < threshold <= 1:
        raise ValueError("threshold 必须在 (0, 1] 内")

    daily = {trace.user: mobility.daily_locations(trace, country_map) for trace in traces}
    points = {trace.user: trace.n_points for trace in traces}
    survivors = set(daily)
    for day, observed in sorted(target_connections.items()):
        for user in sorted(survivors):
            asn = daily[user].get(day)
            if asn is None:
                continue
            if _location_penultimate(graph, asn, dst, day) != observed:
                survivors.discard(user)

    if not survivors:
        return GuessOutcome.reject()
    # 减去最大指数后求和，避免 e^(a·N) 溢出
    top_n = max(points[u] for u in survivors)
    top = min(u for u in survivors if points[u] == top_n)
    denominator = math.fsum(math.exp(a * (points[u] - top_n)) for u in survivors)
    return GuessOutcome.decide(top, 1.0 / denominator, threshold)


@dataclasses.dataclass(frozen=True)
class RouteChangeRecord:
    probe: str
    day: int
    origin_as: int
    penultimate: int


@dataclasses.dataclass(frozen=True)
class RouteChange:
    """某个探针在相邻两条记录之间的一次倒数第二跳变化"""

    probe: str
    origin_as: int
    day_before: int
    day_after: int
    old_penultimate: int
    new_penultimate: int
    before: AnonymitySet
    after: AnonymitySet


@dataclasses.dataclass(frozen=True)
class RouteChangeReport:
    frequency: dict
    changes: tuple

    def changed_fraction(self):
        """至少发生过一次变化的 AS 占比"""
        if not self.frequency:
            return 0.0
        return sum(1 for v in self.frequency.values() if v > 0) / len(self.frequency)


def parse_route_changes(text, source="<string>"):
    """
    解析路由变化日志 CSV（表头 `probe,day,origin_as,penultimate_as`）

    Returns:
        list[RouteChangeRecord]: 按 (probe, day) 排序

    Raises:
        ParseError: 行格式错误或同一探针同一天重复，包含行号
    """
    reader = csv.reader(io.StringIO(text))
    records = []
    seen = set()
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1:
            if [c.strip() for c in row] != ROUTE_CHANGE_HEADER:
                raise ParseError(source, lineno, f"表头应为 {','.join(ROUTE_CHANGE_HEADER)}")
            continue
        if not row or not "".join(row).strip():
            continue
        if len(row) != 4:
            raise ParseError(source, lineno, f"应有 4 列，实际 {len(row)} 列")
        probe = row[0].strip()
        try:
            day, origin_as, penultimate = (int(c) for c in row[1:])
        except ValueError:
            raise ParseError(source, lineno, "day、origin_as、penultimate_as 必须为整数") from None
        if (probe, day) in seen:
            raise ParseError(source, lineno, f"探针 {probe} 在第 {day} 天有重复记录")
        seen.add((probe, day))
        records.append(RouteChangeRecord(probe, day, origin_as, penultimate))
    records.sort(key=lambda r: (r.probe, r.day))
    logger.info("read %s: %d route records, %d probes", source, len(records), len({r.probe for r in records}))
    return records


def route_change_log(graphs, probes, dst):
    """
    由一串拓扑快照生成路由变化日志

    第 i 个快照对应第 i 天；每个探针记录其所在 AS 当天到 dst 的
    倒数第二跳，不可达或与 dst 同处的探针当天不产生记录。

    Args:
        graphs (list[AsGraph]): 拓扑快照
        probes (dict): 探针 id → 所在 AS
        dst (int): 目的 AS
    """
    records = []
    for day, graph in enumerate(graphs):
        for probe, asn in sorted(probes.items()):
            obs = netlayer.hornet_observe(graph, asn, dst, day)
            if obs is not None:
                records.append(RouteChangeRecord(probe, day, asn, obs.penultimate))
    records.sort(key=lambda r: (r.probe, r.day))
    return records


def route_change_analysis(records):
    """
    倒数第二跳变化的频率与影响

    变化定义为同一探针相邻两条记录的倒数第二跳不同。变化前的集合是
    较早那天倒数第二跳等于旧值的探针所在 AS，变化后的集合再与较晚那天
    倒数第二跳等于新值的探针所在 AS 求交。

    每个 AS 的变化频率为该 AS 内探针的变化总数除以探针数。
    """
    by_day = defaultdict(list)
    by_probe = defaultdict(list)
    for r in records:
        by_day[r.day].append(r)
        by_probe[r.probe].append(r)

    def origins(day, penultimate):
        return frozenset(r.origin_as for r in by_day[day] if r.penultimate == penultimate)

    changes = []
    probe_changes = Counter()
    probe_as = {}
    for probe, rows in sorted(by_probe.items()):
        rows.sort(key=lambda r: r.day)
        probe_as[probe] = rows[0].origin_as
        for prev, cur in zip(rows, rows[1:]):
            if prev.penultimate == cur.penultimate:
                continue
            probe_changes[probe] += 1
            before = AnonymitySet(origins(prev.day, prev.penultimate))
            after = intersect(before, origins(cur.day, cur.penultimate))
            changes.append(
                RouteChange(probe, prev.origin_as, prev.day, cur.day, prev.penultimate, cur.penultimate, before, after)
            )

    probes_per_as = Counter(probe_as.values())
    changes_per_as = Counter()
    for probe, n in probe_changes.items():
        changes_per_as[probe_as[probe]] += n
    frequency = {asn: changes_per_as[asn] / probes_per_as[asn] for asn in sorted(probes_per_as)}
    logger.info("route changes: %d changes across %d probes", len(changes), len(by_probe))
    return RouteChangeReport(frequency, tuple(changes))


# --------------------------------------------------------------------------
# TAPS
# --------------------------------------------------------------------------


def taps_intersection_attack(clusterings, client):
    """
    多次成簇后对客户端所在簇成员求交

    Raises:
        ValueError: 没有聚类结果，或客户端在某次聚类中未被分配
    """
    if not clusterings:
        raise ValueError("clusterings 不能为空")
    anonset = None
    for i, clustering in enumerate(clusterings):
        cluster_id = clustering.cluster_of(client)
        if cluster_id is None:
            raise ValueError(f"AS{client} 在第 {i + 1} 次聚类中没有被分配")
        members = clustering.members(cluster_id)
        anonset = AnonymitySet(members) if anonset is None else intersect(anonset, members)
    return anonset


def taps_set_sizes(clusterings, clients=None):
    """
    每个稳定客户端在第 1..n 次成簇后的候选集合大小

    稳定客户端指在每次聚类中都被分配的客户端。

    Returns:
        dict: 客户端 AS → 集合大小列表
    """
    if not clusterings:
        return {}
    stable = set(clusterings[0].assignment)
    for clustering in clusterings[1:]:
        stable &= set(clustering.assignment)
    if clients is not None:
        stable &= set(clients)
    member_cache = [clustering.clusters() for clustering in clusterings]
    sizes = {}
    for client in sorted(stable):
        members = None
        row = []
        for clustering, clusters in zip(clusterings, member_cache):
            cluster = clusters[clustering.cluster_of(client)]
            members = cluster if members is None else members & cluster
            row.append(len(members))
        sizes[client] = row
    return sizes
