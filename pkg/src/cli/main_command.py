# -*- coding: utf-8 -*-
"""
命令行入口模块
============

click 命令组：
- run         运行一个实验配置，写出结果 CSV 与元数据
- summarize   按列分组输出四分位汇总
- paths       查询最优路径与源路由可用路径
- oracle      调用穷举 oracle（只用于小图）

领域错误统一记录日志并以状态码 1 退出；参数用法错误由 click 以状态码 2 退出。
"""

import functools
import json
import logging

import click

from src.cli import experiments
from src.cli.result_table import read_results, summarize
from src.core import synth, topology
from src.core.experiment_config import ExperimentConfig
from src.core.settings_manager import SettingsManager

logger = logging.getLogger(__name__)

TOPOLOGY_FILE = click.Path(exists=True, dir_okay=False)


def _handle_errors(fn):
    """把领域错误转成退出码 1"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError as e:
            # TempestError 继承自 ValueError；引擎的前置条件检查也抛 ValueError
            logger.error("%s", e)
            click.echo(f"错误: {e}", err=True)
            raise SystemExit(1) from None

    return wrapper


def _format_path(path):
    return "-" if path is None else " ".join(str(a) for a in path)


def _echo_json(data):
    click.echo(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True))


@click.group()
@click.option("--config", "settings_path", default="config.json", show_default=True, help="运行设置文件")
@click.option("--verbose", is_flag=True, help="输出 DEBUG 级别日志")
@click.pass_context
def cli(ctx, settings_path, verbose):
    """Tempest 去匿名化攻击模拟实验室"""
    settings = SettingsManager(settings_path)
    logging.getLogger().setLevel(logging.DEBUG if verbose else settings.log_level)
    ctx.obj = settings


@cli.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", default=None, help="结果目录，默认取设置中的 output_dir")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="并行进程数，默认取设置中的 workers")
@click.pass_obj
@_handle_errors
def run(settings, config_path, output_dir, workers):
    """运行一个实验配置"""
    config = ExperimentConfig.from_file(config_path)
    main = experiments.run_experiment(
        config,
        output_dir or settings.get_settings(SettingsManager.KEY_OUTPUT_DIR),
        workers=workers or settings.get_settings(SettingsManager.KEY_WORKERS),
        show_progress=settings.get_settings(SettingsManager.KEY_SHOW_PROGRESS),
        float_format=settings.get_settings(SettingsManager.KEY_FLOAT_FORMAT),
    )
    click.echo(str(main))


@cli.command("summarize")
@click.argument("results_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--group-by", "group_by", multiple=True, default=("step",), show_default=True, help="分组列，可重复")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="写入文件而不是标准输出")
@click.pass_obj
@_handle_errors
def summarize_command(settings, results_path, group_by, output):
    """按列分组输出中位数、四分位与 1.5 IQR 区间"""
    frame = summarize(read_results(results_path), list(group_by))
    float_format = settings.get_settings(SettingsManager.KEY_FLOAT_FORMAT)
    if output:
        frame.to_csv(output, index=False, float_format=float_format, lineterminator="\n")
        logger.info("wrote %s (%d groups)", output, len(frame))
    else:
        click.echo(frame.to_csv(index=False, float_format=float_format, lineterminator="\n"), nl=False)


@cli.command()
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.argument("src", type=int)
@click.argument("dst", type=int)
@click.option("--max-peer-links", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--max-len", type=click.IntRange(min=2), default=8, show_default=True)
@_handle_errors
def paths(topology_path, src, dst, max_peer_links, max_len):
    """src 到 dst 的最优路径，以及源路由下的全部可用路径"""
    graph = topology.load_as_graph(topology_path)
    click.echo(f"best: {_format_path(topology.best_path(graph, src, dst))}")
    for path in sorted(topology.routable_paths(graph, src, dst, max_peer_links, max_len)):
        click.echo(f"routable: {_format_path(path)}")


@cli.group()
def oracle():
    """穷举 oracle（不超过 16 个 AS 的图）"""


@oracle.command("paths")
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.argument("src", type=int)
@click.argument("dst", type=int)
@click.option("--max-peer-links", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--max-len", type=click.IntRange(min=2), default=None)
@_handle_errors
def oracle_paths(topology_path, src, dst, max_peer_links, max_len):
    """全部简单 valley-free 路径"""
    graph = topology.load_as_graph(topology_path)
    for path in sorted(synth.oracle_enumerate_paths(graph, src, dst, max_peer_links, max_len)):
        click.echo(_format_path(path))


@oracle.command("routing")
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.argument("dst", type=int)
@_handle_errors
def oracle_routing(topology_path, dst):
    """每个 AS 到 dst 的稳定路由"""
    graph = topology.load_as_graph(topology_path)
    state = synth.oracle_routing_state(graph, dst)
    for src in sorted(graph.nodes):
        if src != dst:
            click.echo(f"{src}: {_format_path(state.path(src))}")


@oracle.command("hijack")
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.argument("origin", type=int)
@click.argument("attacker", type=int)
@_handle_errors
def oracle_hijack(topology_path, origin, attacker):
    """attacker 宣告 origin 前缀后被劫持的 AS"""
    graph = topology.load_as_graph(topology_path)
    hijacked = synth.oracle_simulate_hijack(graph, origin, attacker)
    click.echo(" ".join(str(a) for a, hit in sorted(hijacked.items()) if hit))


@oracle.command("resilience")
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.argument("client", type=int)
@click.argument("guard_as", type=int)
@_handle_errors
def oracle_resilience(topology_path, client, guard_as):
    """client 对 guard 所在 AS 的 resilience（精确分数）"""
    graph = topology.load_as_graph(topology_path)
    click.echo(str(synth.oracle_resilience(graph, client, guard_as)))


@oracle.command("freeze-t6")
@click.argument("topology_path", type=TOPOLOGY_FILE)
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="写入文件而不是标准输出")
@_handle_errors
def freeze_t6(topology_path, output):
    """用 oracle 重新生成 T6 回归表"""
    graph = topology.load_as_graph(topology_path)
    table = synth.freeze_t6_table(graph)
    if output:
        with open(output, "w", encoding="utf-8") as f:
            json.dump(table, f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write("\n")
        logger.info("wrote %s", output)
    else:
        _echo_json(table)
