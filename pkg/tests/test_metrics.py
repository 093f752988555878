# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.core import metrics
from src.core.attacks import GuessOutcome, PosteriorBelief


def test_entropy_examples():
    assert metrics.entropy_bits(PosteriorBelief.uniform([1, 2, 3, 4])) == pytest.approx(2.0)
    assert metrics.entropy_bits(PosteriorBelief({7: 1.0})) == 0.0
    assert metrics.entropy_bits({1: 0.5, 2: 0.25, 3: 0.25}) == pytest.approx(1.5)
    assert metrics.entropy_bits({1: 1.0, 2: 0.0}) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_entropy_bounded_by_support(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(8))
    belief = {i: float(v) for i, v in enumerate(p)}
    assert metrics.entropy_bits(belief) <= math.log2(8) + 1e-9


def _outcomes(n_total, n_guesses, n_correct):
    out = []
    for i in range(n_total):
        if i < n_correct:
            out.append((GuessOutcome.decide("a", 1.0, 0.5), "a"))
        elif i < n_guesses:
            out.append((GuessOutcome.decide("b", 1.0, 0.5), "a"))
        else:
            out.append((GuessOutcome.decide("a", 0.1, 0.5), "a"))
    return out


def test_accuracy_rejection():
    report = metrics.accuracy_rejection(_outcomes(10, 2, 1))
    assert (report.accuracy, report.rejection_rate) == (0.5, 0.8)
    assert report.n_guesses + report.n_rejects == report.n_total

    report = metrics.accuracy_rejection(_outcomes(4, 0, 0))
    assert report.accuracy is None
    assert report.rejection_rate == 1.0

    report = metrics.accuracy_rejection(_outcomes(3, 3, 3))
    assert (report.accuracy, report.rejection_rate) == (1.0, 0.0)


def test_accuracy_rejection_empty():
    with pytest.raises(ValueError):
        metrics.accuracy_rejection([])


def test_quartile_summary():
    s = metrics.quartile_summary([1, 2, 3, 4, 100])
    assert (s.q1, s.median, s.q3) == (2.0, 3.0, 4.0)
    assert (s.band_lo, s.band_hi) == (-1.0, 7.0)
    assert s.n == 5

    s = metrics.quartile_summary([5])
    assert (s.q1, s.median, s.q3, s.band_lo, s.band_hi) == (5, 5, 5, 5, 5)

    s = metrics.quartile_summary([1, 1, 1, 1])
    assert s.iqr == 0
    assert (s.band_lo, s.band_hi) == (1, 1)


def test_quartile_summary_is_permutation_invariant():
    values = [9, 1, 4, 4, 7, 2, 8]
    assert metrics.quartile_summary(values) == metrics.quartile_summary(sorted(values))


def test_quartile_summary_empty():
    with pytest.raises(ValueError):
        metrics.quartile_summary([])


def test_percentile_table():
    frame = metrics.percentile_table({2: [10, 20, 30], 1: [5]}, percentiles=(50, 95))
    assert list(frame.columns) == ["step", "p50", "p95"]
    assert frame["step"].tolist() == [1, 2]
    assert frame["p50"].tolist() == [5.0, 20.0]
    assert frame.loc[1, "p95"] == pytest.approx(29.0)
