# -*- coding: utf-8 -*-
"""
实验运行模块
==========

把 ExperimentConfig 绑定到对应的攻击引擎：
- 读取（或生成）拓扑、中继表、签到轨迹、国家映射和路由变化日志
- 每种实验类型一个 Experiment 子类，按试验拆分工作
- 第 t 个试验的随机数流固定为 default_rng([seed, t])，与执行顺序和进程数无关
- 汇总为 ResultTable 并写出 CSV 与元数据
"""

import concurrent.futures
import dataclasses
import functools
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.cli.result_table import ResultTable
from src.core import anonnet, attacks, metrics, mobility, netlayer, synth, topology
from src.core.errors import ConfigError, EmptySuspectFreeSetError, NoEligibleGuardError

logger = logging.getLogger(__name__)

# 辅助随机数流的编号从 2^32 开始，不会与试验编号重叠
AUX_STREAM_BASE = 1 << 32


def trial_rng(seed, trial):
    return np.random.default_rng([seed, trial])


def aux_rng(seed, index):
    return np.random.default_rng([seed, AUX_STREAM_BASE + index])


def top_by_degree(graph, n):
    """度数最大的 n 个 AS，度数相同时按 AS 号排序"""
    return sorted(graph.nodes, key=lambda a: (-len(graph.neighbors_of(a)), a))[:n]


def _top_of(frequency):
    return min(frequency.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def _frequency_frame(frequency):
    return pd.DataFrame(sorted(frequency.items()), columns=["asn", "fraction"])


@dataclasses.dataclass
class Inputs:
    graph: object = None
    graphs: list = dataclasses.field(default_factory=list)
    relays: object = None
    traces: list = dataclasses.field(default_factory=list)
    country_map: object = None
    route_records: list = dataclasses.field(default_factory=list)


def _synthetic_call(key, fn, block, **extra):
    try:
        return fn(**block, **extra)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"inputs.{key}.synthetic", str(e)) from None


def _read_text(config, key):
    path = config.input_paths(key)[0]
    try:
        return path.read_text(encoding="utf-8"), str(path)
    except FileNotFoundError:
        raise ConfigError(f"inputs.{key}", f"文件不存在: {path}") from None


def _topology_params(config):
    block = config.synthetic("topology")
    if block is None:
        return None
    return _synthetic_call("topology", synth.TopologyGenParams, block)


def load_inputs(config):
    """
    按配置读取或生成全部输入

    Raises:
        ConfigError: 文件不存在或生成块参数非法
        ParseError: 输入文件格式错误（带文件名与行号）
    """
    inputs = Inputs()
    params = config.params

    if "topology" in config.inputs:
        gen_params = _topology_params(config)
        if gen_params is not None:
            if config.kind == "taps":
                inputs.graphs = synth.gen_topology_series(gen_params, params["n_formations"], params["rewire_prob"])
            else:
                inputs.graphs = [synth.gen_topology(gen_params)]
        else:
            paths = config.input_paths("topology")
            for path in paths:
                if not path.exists():
                    raise ConfigError("inputs.topology", f"文件不存在: {path}")
            inputs.graphs = [topology.load_as_graph(path) for path in paths]
        inputs.graph = inputs.graphs[0]

    if "relays" in config.inputs:
        block = config.synthetic("relays")
        if block is not None:
            inputs.relays = _synthetic_call("relays", synth.gen_relays, block, graph=inputs.graph)
        else:
            inputs.relays = anonnet.parse_relays(*_read_text(config, "relays"))

    if "checkins" in config.inputs:
        block = config.synthetic("checkins")
        if block is not None:
            block = dict(block)
            countries = block.pop("countries", 10)
            if isinstance(countries, int):
                countries = synth.COUNTRY_CODES[:countries]
            inputs.traces = _synthetic_call("checkins", synth.gen_mobility_traces, block, countries=countries)
        else:
            inputs.traces = mobility.parse_checkins(*_read_text(config, "checkins"))

    if "country_map" in config.inputs:
        block = config.synthetic("country_map")
        if block is not None:
            block = dict(block)
            countries = block.pop("countries", None)
            if countries is None:
                countries = sorted({c.country for t in inputs.traces for c in t.checkins})
            elif isinstance(countries, int):
                countries = synth.COUNTRY_CODES[:countries]
            inputs.country_map = _synthetic_call(
                "country_map", synth.gen_country_map, block, graph=inputs.graph, countries=countries
            )
        else:
            inputs.country_map = mobility.parse_country_map(*_read_text(config, "country_map"))

    if "route_changes" in config.inputs:
        block = config.synthetic("route_changes")
        if block is not None:
            inputs.route_records = _synthetic_route_log(config, block)
        else:
            inputs.route_records = attacks.parse_route_changes(*_read_text(config, "route_changes"))
    return inputs


def _synthetic_route_log(config, block):
    gen_params = _topology_params(config)
    if gen_params is None:
        raise ConfigError("inputs.topology", "合成路由变化日志需要拓扑生成块")
    params = config.params
    graphs = synth.gen_topology_series(gen_params, params["n_snapshots"], params["rewire_prob"])
    dst = params["dst"] if params["dst"] is not None else top_by_degree(graphs[0], 1)[0]
    rng = np.random.default_rng(block.get("seed", config.seed))
    clients = sorted(topology.client_isp_ases(graphs[0]) - {dst})
    if not clients:
        raise ConfigError("inputs.route_changes", "拓扑中没有可放置探针的客户端 AS")
    n = params["n_probes"]
    width = len(str(n))
    probes = {f"p{i:0{width}d}": clients[int(rng.integers(len(clients)))] for i in range(n)}
    return attacks.route_change_log(graphs, probes, dst)


@dataclasses.dataclass
class TrialResult:
    """
    一个试验的输出

    outcomes 中每项为 (step, GuessOutcome, 真实身份)，供换阈值统计准确率。
    observations 中每项为一条带试验编号的观测行。
    """

    rows: list = dataclasses.field(default_factory=list)
    outcomes: list = dataclasses.field(default_factory=list)
    observations: list = dataclasses.field(default_factory=list)


class Experiment:
    """
    实验类型的基类

    prepare 在主进程中执行一次；run_trial 可能在工作进程中执行，
    只能依赖 prepare 之后的实例状态和试验编号。
    """

    kind = None

    def __init__(self, config, inputs):
        self.config = config
        self.inputs = inputs
        self.params = config.params
        self.graph = inputs.graph

    def prepare(self):
        pass

    def trials(self):
        return range(0)

    def run_trial(self, trial):
        raise NotImplementedError

    def finalize(self, table, results):
        pass

    def rng(self, trial):
        return trial_rng(self.config.seed, trial)

    def observation_frame(self, results):
        rows = [row for result in results for row in result.observations]
        return pd.DataFrame(rows, columns=["trial", *netlayer.OBSERVATION_HEADER])

    def accuracy_frame(self, results, thresholds):
        """按阈值与步数统计准确率和拒绝率"""
        grouped = {}
        for result in results:
            for step, outcome, truth in result.outcomes:
                grouped.setdefault(step, []).append((outcome, truth))
        rows = []
        for threshold in thresholds:
            for step in sorted(grouped):
                report = metrics.accuracy_rejection(
                    (o.rethreshold(threshold), truth) for o, truth in grouped[step]
                )
                rows.append(
                    {
                        "threshold": threshold,
                        "step": step,
                        "accuracy": report.accuracy,
                        "rejection_rate": report.rejection_rate,
                        "n_guesses": report.n_guesses,
                        "n_total": report.n_total,
                    }
                )
        return pd.DataFrame(
            rows, columns=["threshold", "step", "accuracy", "rejection_rate", "n_guesses", "n_total"]
        )


class _MobilityExperiment(Experiment):
    """每个用户一个试验；第 k 步表示到访了 k 个国家"""

    def prepare(self):
        traces = [t for t in self.inputs.traces if t.n_points > 0]
        if self.params["max_users"] is not None:
            traces = traces[: self.params["max_users"]]
        self.traces = traces

    def trials(self):
        return range(len(self.traces))

    def guard_dist(self, location):
        raise NotImplementedError

    def predicates(self):
        raise NotImplementedError

    def run_trial(self, trial):
        trace = self.traces[trial]
        countries = mobility.country_sequence(trace)
        cmap = self.inputs.country_map
        predicates = self.predicates()
        result = TrialResult()
        for k in range(1, len(countries) + 1):
            locations = mobility.as_sequence(trace, cmap, k)
            try:
                probs = [
                    attacks.mobility_compromise_prob(self.graph, locations, self.guard_dist, p)
                    for p in predicates
                ]
            except EmptySuspectFreeSetError:
                logger.debug("user %s: no suspect-free guard at AS%d", trace.user, locations[0])
                return result
            result.rows.append((trial, k, "compromise_prob", float(np.mean(probs))))
        return result


class VanillaMobility(_MobilityExperiment):
    kind = "vanilla-mobility"

    def prepare(self):
        super().prepare()
        self.dist = anonnet.vanilla_guard_dist(self.inputs.relays)
        self.adversaries = self.params["adversaries"] or top_by_degree(self.graph, self.params["n_adversaries"])

    def guard_dist(self, location):
        return self.dist

    def predicates(self):
        return [attacks.on_path_predicate(self.graph, a) for a in self.adversaries]


class CounterRaptorMobility(_MobilityExperiment):
    kind = "cr-mobility"

    def prepare(self):
        super().prepare()
        self.cfg = anonnet.CounterRaptorConfig(self.params["alpha"])
        self.adversaries = self.params["adversaries"] or top_by_degree(self.graph, self.params["n_adversaries"])

    def guard_dist(self, location):
        return anonnet.counter_raptor_guard_dist(self.graph, self.inputs.relays, location, self.cfg)

    def predicates(self):
        return [attacks.hijack_predicate(self.graph, a) for a in self.adversaries]


class DenasaMobility(_MobilityExperiment):
    kind = "denasa-mobility"

    def prepare(self):
        super().prepare()
        self.suspects = frozenset(self.params["suspects"])

    def guard_dist(self, location):
        return anonnet.gselect_guard_dist(self.graph, self.inputs.relays, location, self.suspects)

    def predicates(self):
        return [attacks.suspects_predicate(self.graph, self.suspects)]


class HornetMobility(Experiment):
    """每个目标用户一个试验，步数记为目标的签到点数"""

    kind = "hornet-mobility"

    def prepare(self):
        self.graph.require(self.params["dst"])
        self.traces = list(self.inputs.traces)
        n = self.params["n_trials"]
        self.targets = self.traces if n is None else self.traces[:n]

    def trials(self):
        return range(len(self.targets))

    def run_trial(self, trial):
        target = self.targets[trial]
        dst = self.params["dst"]
        cmap = self.inputs.country_map
        observed = attacks.hornet_daily_observations(target, cmap, self.graph, dst)
        outcome = attacks.hornet_mobility_attack(
            self.traces, cmap, self.graph, dst, observed, self.params["a"], min(self.params["thresholds"])
        )
        step = target.n_points
        observations = []
        for day, asn in sorted(mobility.daily_locations(target, cmap).items()):
            obs = netlayer.hornet_observe(self.graph, asn, dst, day)
            if obs is not None:
                observations.append([trial, *netlayer.hornet_observation_row(obs)])
        return TrialResult(
            rows=[
                (trial, step, "score", outcome.score),
                (trial, step, "top_is_target", float(outcome.candidate == target.user)),
            ],
            outcomes=[(step, outcome, target.user)],
            observations=observations,
        )

    def finalize(self, table, results):
        table.add_extra("accuracy", self.accuracy_frame(results, self.params["thresholds"]))
        table.add_extra("observations", self.observation_frame(results))


class _InferenceExperiment(Experiment):
    """每个 (客户端, 重复) 一个试验；第 i 步为观测到 i 次 guard 之后的后验"""

    def prepare(self):
        clients = topology.client_isp_ases(self.graph)
        self.candidates = sorted(self.params["candidates"] or clients)
        self.clients = sorted(self.params["clients"] or self.candidates)
        missing = [c for c in self.clients if c not in self.candidates]
        if missing:
            raise ConfigError("params.clients", f"客户端不在候选集合中: {missing}")
        self.graph.require(*self.candidates)
        stranded = []
        for client in self.clients:
            try:
                self.guard_dist(client)
            except NoEligibleGuardError:
                stranded.append(client)
        if stranded and self.params["clients"]:
            raise ConfigError("params.clients", f"这些客户端选不出 guard: {stranded}")
        if stranded:
            logger.warning("skipping %d clients without an eligible guard", len(stranded))
            self.clients = [c for c in self.clients if c not in stranded]

    def trials(self):
        return range(len(self.clients) * self.params["n_trials"])

    def guard_dist(self, location):
        raise NotImplementedError

    def run_trial(self, trial):
        client = self.clients[trial // self.params["n_trials"]]
        beliefs = attacks.guard_inference_sim(
            self.candidates, self.guard_dist, client, self.params["n_observations"], self.rng(trial)
        )
        result = TrialResult()
        for step, belief in enumerate(beliefs):
            top, _ = belief.top()
            result.rows.append((trial, step, "entropy", metrics.entropy_bits(belief)))
            result.rows.append((trial, step, "true_prob", belief.probability(client)))
            result.rows.append((trial, step, "map_correct", float(top == client)))
            if self.params["emit_posterior"]:
                for location in self.candidates:
                    result.rows.append((trial, step, f"posterior:{location}", belief.probability(location)))
        return result

    def finalize(self, table, results):
        ranking = attacks.rank_leaky_clients(self.candidates, self.guard_dist, self.params["n_leaky"])
        table.add_extra("leaky", pd.DataFrame(ranking, columns=["client", "expected_entropy"]))


class DenasaInference(_InferenceExperiment):
    kind = "denasa-inference"

    def guard_dist(self, location):
        return anonnet.gselect_guard_dist(self.graph, self.inputs.relays, location, self.params["suspects"])


class CounterRaptorInference(_InferenceExperiment):
    kind = "cr-inference"

    def prepare(self):
        self.cfg = anonnet.CounterRaptorConfig(self.params["alpha"])
        super().prepare()

    def guard_dist(self, location):
        return anonnet.counter_raptor_guard_dist(self.graph, self.inputs.relays, location, self.cfg)


class Dovetail(Experiment):
    """每个试验抽取一个客户端与一组 matchmaker；第 i 步为 i 次连接后的集合大小"""

    kind = "dovetail"

    def prepare(self):
        p = self.params
        self.dovetail_params = netlayer.DovetailParams(p["min_head_len"], p["max_peer_links"], p["max_len"])
        self.clients = sorted(p["clients"] or topology.client_isp_ases(self.graph))
        self.frequency = attacks.dovetail_frequency(
            self.graph, p["n_frequency_samples"], self.dovetail_params, aux_rng(self.config.seed, 0)
        )
        if p["adversary"] is not None:
            self.adversary = p["adversary"]
        elif self.frequency:
            self.adversary = _top_of(self.frequency)
        else:
            raise ConfigError("params.min_head_len", "抽样中没有构造出任何 head 路径，请调小 min_head_len")
        logger.info("dovetail adversary: AS%d", self.adversary)

    def trials(self):
        return range(self.params["n_trials"])

    def run_trial(self, trial):
        rng = self.rng(trial)
        client = self.clients[int(rng.integers(len(self.clients)))]
        pool = sorted(self.graph.nodes - {client})
        size = min(self.params["n_matchmakers"], len(pool))
        matchmakers = sorted(int(m) for m in rng.choice(pool, size=size, replace=False))
        result = TrialResult(rows=[(trial, 0, "set_size", len(topology.client_isp_ases(self.graph)))])
        sets = attacks.iter_dovetail_anonymity_sets(
            self.graph, self.adversary, client, matchmakers, self.params["n_connections"], self.dovetail_params, rng
        )
        for i, anonset in enumerate(sets, start=1):
            result.rows.append((trial, i, "set_size", anonset.size))
            result.rows.append((trial, i, "inconsistent", float(anonset.inconsistent)))
        return result

    def finalize(self, table, results):
        by_step = {}
        for result in results:
            for _, step, metric, value in result.rows:
                if metric == "set_size":
                    by_step.setdefault(step, []).append(value)
        table.add_extra("percentiles", metrics.percentile_table(by_step, self.params["percentiles"]))
        table.add_extra("frequency", _frequency_frame(self.frequency))
        table.meta["adversary"] = self.adversary


class Phi(Experiment):
    """每个试验抽取 (源, 目的, helper 池)；第 i 步为 i 次连接后的猜测"""

    kind = "phi"

    def prepare(self):
        p = self.params
        self.everyone = sorted(self.graph.nodes)
        self.candidates = sorted(p["candidates"] or self.everyone)
        self.frequency = attacks.phi_midway_frequency(self.graph, p["n_frequency_samples"], aux_rng(self.config.seed, 0))
        if p["adversary"] is not None:
            self.adversary = p["adversary"]
        elif self.frequency:
            self.adversary = _top_of(self.frequency)
        else:
            raise ConfigError("params.adversary", "抽样中没有构造出任何 PHI 路径，请显式指定对手 AS")
        logger.info("phi adversary: AS%d", self.adversary)

    def trials(self):
        return range(self.params["n_trials"])

    def run_trial(self, trial):
        rng = self.rng(trial)
        dst = self.params["dst"]
        sources = [c for c in self.candidates if c != dst]
        src = sources[int(rng.integers(len(sources)))]
        if dst is None:
            others = [a for a in self.everyone if a != src]
            dst = others[int(rng.integers(len(others)))]
        pool = [a for a in self.everyone if a not in (src, dst)]
        size = min(self.params["n_helpers"], len(pool))
        helpers = sorted(int(h) for h in rng.choice(pool, size=size, replace=False))
        outcomes = attacks.phi_guess_sim(
            self.graph,
            self.adversary,
            src,
            dst,
            helpers,
            self.params["n_connections"],
            self.candidates,
            min(self.params["thresholds"]),
            rng,
        )
        result = TrialResult()
        for i, outcome in enumerate(outcomes, start=1):
            result.rows.append((trial, i, "score", outcome.score))
            result.rows.append((trial, i, "top_is_source", float(outcome.candidate == src)))
            result.outcomes.append((i, outcome, src))
        return result

    def finalize(self, table, results):
        table.add_extra("accuracy", self.accuracy_frame(results, self.params["thresholds"]))
        table.add_extra("frequency", _frequency_frame(self.frequency))
        table.meta["adversary"] = self.adversary


class Taps(Experiment):
    """每个稳定客户端一个试验；第 n 步为 n 次成簇后的集合大小"""

    kind = "taps"

    def prepare(self):
        p = self.params
        first = self.inputs.graphs[0]
        if len(self.inputs.graphs) == 1:
            logger.warning("taps: only one topology snapshot, sets cannot shrink")
        clients = sorted(topology.client_isp_ases(first))
        if p["medoids"] is not None:
            medoids = sorted(p["medoids"])
        else:
            n = min(p["n_clusters"], len(clients))
            medoids = sorted(int(m) for m in aux_rng(self.config.seed, 0).choice(clients, size=n, replace=False))
        adversaries = p["adversary_ases"] or top_by_degree(first, p["n_adversaries"])
        self.clusterings = []
        for graph in self.inputs.graphs:
            universe = topology.client_isp_ases(graph)
            self.clusterings.append(
                anonnet.taps_cluster(
                    graph,
                    universe,
                    [m for m in medoids if m in universe],
                    adversaries,
                    self.inputs.relays,
                    p["top_k_guards"],
                )
            )
        self.sizes = attacks.taps_set_sizes(self.clusterings)
        self.clients = sorted(self.sizes)

    def trials(self):
        return range(len(self.clients))

    def run_trial(self, trial):
        client = self.clients[trial]
        rows = [(trial, 0, "client_as", client)]
        rows.extend((trial, n, "set_size", size) for n, size in enumerate(self.sizes[client], start=1))
        return TrialResult(rows=rows)


class HornetRouting(Experiment):
    """每次倒数第二跳变化一个试验：第 0 步为变化前集合大小，第 1 步为变化后"""

    kind = "hornet-routing"

    def prepare(self):
        self.report = attacks.route_change_analysis(self.inputs.route_records)

    def trials(self):
        return range(len(self.report.changes))

    def run_trial(self, trial):
        change = self.report.changes[trial]
        return TrialResult(
            rows=[
                (trial, 0, "set_size", change.before.size),
                (trial, 1, "set_size", change.after.size),
                (trial, 1, "inconsistent", float(change.after.inconsistent)),
            ]
        )

    def finalize(self, table, results):
        table.add_extra(
            "frequency",
            pd.DataFrame(sorted(self.report.frequency.items()), columns=["asn", "mean_changes"]),
        )
        table.meta["changed_fraction"] = self.report.changed_fraction()
        records = self.inputs.route_records
        table.add_extra(
            "route_log",
            pd.DataFrame(
                [(r.probe, r.day, r.origin_as, r.penultimate) for r in records], columns=attacks.ROUTE_CHANGE_HEADER
            ),
        )
        table.meta["n_changes"] = len(self.report.changes)


EXPERIMENTS = {
    cls.kind: cls
    for cls in (
        VanillaMobility,
        CounterRaptorMobility,
        DenasaMobility,
        HornetMobility,
        DenasaInference,
        CounterRaptorInference,
        Dovetail,
        Phi,
        Taps,
        HornetRouting,
    )
}

_WORKER_EXPERIMENT = None


def _init_worker(experiment):
    global _WORKER_EXPERIMENT
    _WORKER_EXPERIMENT = experiment


def _run_in_worker(trial):
    return _WORKER_EXPERIMENT.run_trial(trial)


def _map_trials(experiment, trials, workers, show_progress):
    progress = functools.partial(tqdm, total=len(trials), desc=experiment.kind, disable=not show_progress)
    if workers <= 1 or len(trials) <= 1:
        return [experiment.run_trial(t) for t in progress(trials)]
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(experiment,)
    ) as executor:
        # map 按提交顺序返回，结果顺序与试验编号一致
        return list(progress(executor.map(_run_in_worker, trials, chunksize=max(1, len(trials) // (4 * workers)))))


def execute(config, workers=1, show_progress=False):
    """
    运行实验并返回 ResultTable（不写文件）

    Raises:
        TempestError: 配置、输入或引擎错误
    """
    logger.info("running %s (%s, seed %d)", config.name, config.kind, config.seed)
    inputs = load_inputs(config)
    experiment = EXPERIMENTS[config.kind](config, inputs)
    experiment.prepare()
    trials = list(experiment.trials())
    results = _map_trials(experiment, trials, workers, show_progress)

    table = ResultTable(
        config.name,
        meta={
            "name": config.name,
            "kind": config.kind,
            "seed": config.seed,
            "config_hash": config.config_hash(),
            "trials": len(trials),
        },
    )
    for result in results:
        table.extend(result.rows)
    experiment.finalize(table, results)
    logger.info("finished %s: %d trials, %d rows", config.name, len(trials), len(table.rows))
    return table


def run_experiment(config, output_dir, workers=1, show_progress=False, float_format="%.10g"):
    """运行实验并写出结果，返回主结果 CSV 的路径"""
    table = execute(config, workers=workers, show_progress=show_progress)
    return table.write(output_dir, float_format=float_format)
