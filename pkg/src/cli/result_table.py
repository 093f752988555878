# -*- coding: utf-8 -*-
"""
结果表模块
========

实验输出统一为整洁的长表，每行 (trial, step, metric, value)，
写出前按 (trial, step) 排序，保证并行执行不改变输出字节。
附加表（频率、百分位、准确率等）另存为 `<name>.<key>.csv`，
元数据写入 `<name>.meta.json`。
"""

import datetime
import json
import logging
import platform
from importlib import metadata
from pathlib import Path

import pandas as pd

from src.core.errors import ConfigError
from src.core.metrics import quartile_summary

logger = logging.getLogger(__name__)

COLUMNS = ["trial", "step", "metric", "value"]

VERSIONED_PACKAGES = ("tempest-lab", "networkx", "numpy", "pandas")


def _package_versions():
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ResultTable:
    """
    一次实验运行的结果

    Attributes:
        rows (list): (trial, step, metric, value) 元组
        extras (dict): 附加表名 → pandas.DataFrame
        meta (dict): 配置哈希、种子等元数据
    """

    def __init__(self, name, meta=None):
        self.name = name
        self.rows = []
        self.extras = {}
        self.meta = dict(meta or {})

    def add(self, trial, step, metric, value):
        self.rows.append((int(trial), int(step), str(metric), float(value)))

    def extend(self, rows):
        for row in rows:
            self.add(*row)

    def add_extra(self, key, frame):
        self.extras[key] = frame

    def to_frame(self):
        frame = pd.DataFrame(self.rows, columns=COLUMNS)
        # 稳定排序：同一 (trial, step) 内保持指标的产生顺序
        return frame.sort_values(["trial", "step"], kind="mergesort").reset_index(drop=True)

    def write(self, output_dir, float_format="%.10g"):
        """
        写出结果 CSV、附加表与元数据

        Returns:
            Path: 主结果 CSV 的路径
        """
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        main = out / f"{self.name}.csv"
        self.to_frame().to_csv(main, index=False, float_format=float_format, lineterminator="\n")
        for key, frame in sorted(self.extras.items()):
            frame.to_csv(
                out / f"{self.name}.{key}.csv", index=False, float_format=float_format, lineterminator="\n"
            )
        meta = {
            **self.meta,
            "rows": len(self.rows),
            "extras": sorted(self.extras),
            "versions": _package_versions(),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
        (out / f"{self.name}.meta.json").write_text(
            json.dumps(meta, indent=4, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8"
        )
        logger.info("wrote %s (%d rows, %d extra tables)", main, len(self.rows), len(self.extras))
        return main


def read_results(filepath):
    frame = pd.read_csv(filepath)
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError("results", f"{filepath} 缺少列: {', '.join(missing)}")
    return frame


def summarize(frame, group_by):
    """
    按列分组的四分位汇总

    metric 列存在时总是参与分组，不同指标不会混在一起。

    Args:
        frame (pandas.DataFrame): 结果长表
        group_by (str | list): 分组列

    Returns:
        pandas.DataFrame: 每组一行，包含 n、q1、median、q3、iqr、band_lo、band_hi

    Raises:
        ConfigError: 分组列不存在
    """
    columns = [group_by] if isinstance(group_by, str) else list(group_by)
    for column in columns:
        if column not in frame.columns:
            raise ConfigError("group_by", f"结果表中没有列 '{column}'")
    if "metric" in frame.columns and "metric" not in columns:
        columns = ["metric", *columns]

    rows = []
    for key, group in frame.groupby(columns, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        summary = quartile_summary(group["value"].to_numpy())
        rows.append({**dict(zip(columns, key)), **summary.as_row()})
    return pd.DataFrame(rows, columns=[*columns, "n", "q1", "median", "q3", "iqr", "band_lo", "band_hi"])
