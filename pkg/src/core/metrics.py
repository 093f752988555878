# -*- coding: utf-8 -*-
"""
匿名度量模块
==========

所有实验共用的度量与汇总统计：后验熵、猜测准确率/拒绝率、
四分位汇总（含 Q1 − 1.5·IQR 到 Q3 + 1.5·IQR 的阴影带）和百分位曲线。
"""

import dataclasses

import numpy as np
import pandas as pd

# 四分位数取法：零基秩 (n - 1) * q 上的线性插值
QUANTILE_METHOD = "linear"

DEFAULT_PERCENTILES = (5, 25, 50, 75, 95)


def entropy_bits(belief):
    """
    后验分布的熵（比特），0·log 0 记为 0

    Args:
        belief: PosteriorBelief 或 概率字典
    """
    probabilities = getattr(belief, "probabilities", belief)
    p = np.array([v for v in probabilities.values() if v > 0], dtype=float)
    if p.size == 0:
        return 0.0
    return float(max(0.0, -np.sum(p * np.log2(p))))


@dataclasses.dataclass(frozen=True)
class AccuracyReport:
    """accuracy 为 None 表示没有做出任何猜测"""

    accuracy: float | None
    rejection_rate: float
    n_guesses: int
    n_total: int

    @property
    def n_rejects(self):
        return self.n_total - self.n_guesses


def accuracy_rejection(outcomes):
    """
    猜测结果的准确率与拒绝率

    Args:
        outcomes: (GuessOutcome, 真实身份) 的列表

    Returns:
        AccuracyReport: 准确率只在做出的猜测中计算
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("outcomes 不能为空")
    guesses = [(o, truth) for o, truth in outcomes if o.is_guess]
    correct = sum(1 for o, truth in guesses if o.guess == truth)
    n_total = len(outcomes)
    accuracy = correct / len(guesses) if guesses else None
    return AccuracyReport(accuracy, (n_total - len(guesses)) / n_total, len(guesses), n_total)


@dataclasses.dataclass(frozen=True)
class QuartileSummary:
    q1: float
    median: float
    q3: float
    n: int

    @property
    def iqr(self):
        return self.q3 - self.q1

    @property
    def band_lo(self):
        return self.q1 - 1.5 * self.iqr

    @property
    def band_hi(self):
        return self.q3 + 1.5 * self.iqr

    def as_row(self):
        return {
            "n": self.n,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "iqr": self.iqr,
            "band_lo": self.band_lo,
            "band_hi": self.band_hi,
        }


def quartile_summary(values):
    """
    四分位汇总

    Raises:
        ValueError: values 为空
    """
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        raise ValueError("quartile_summary 需要至少一个值")
    q1, median, q3 = np.quantile(data, [0.25, 0.5, 0.75], method=QUANTILE_METHOD)
    return QuartileSummary(float(q1), float(median), float(q3), int(data.size))


def percentile_table(values_by_step, percentiles=DEFAULT_PERCENTILES):
    """
    每一步的百分位曲线

    Args:
        values_by_step (dict): 步数 → 该步所有试验的取值
        percentiles: 要计算的百分位（0 到 100）

    Returns:
        pandas.DataFrame: 列为 step 与 p<百分位>，按 step 升序
    """
    rows = []
    for step in sorted(values_by_step):
        data = np.asarray(list(values_by_step[step]), dtype=float)
        if data.size == 0:
            continue
        qs = np.percentile(data, list(percentiles), method=QUANTILE_METHOD)
        row = {"step": step}
        row.update({f"p{p}": float(q) for p, q in zip(percentiles, qs)})
        rows.append(row)
    return pd.DataFrame(rows, columns=["step", *(f"p{p}" for p in percentiles)])
