import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from customs_selection.metrics import (
    ScoringError,
    WeeklyReport,
    moving_average,
    normalize,
    oracle_precision_at,
    oracle_revenue_at,
    precision_at,
    read_reports,
    revenue_at,
    score_week,
    summarize,
    write_metric_series,
    write_reports,
    cumulative_normalized,
)


class TestRawMetrics:
    def test_precision_example(self):
        illicit = np.zeros(500, int)
        illicit[:10] = 1
        selected = np.r_[np.arange(9), np.arange(100, 141)]  # 9 frauds among 50
        assert precision_at(illicit, selected) == pytest.approx(0.18)
        assert oracle_precision_at(illicit, 50) == pytest.approx(0.2)
        assert normalize(0.18, 0.2) == 0.9

    def test_revenue_example(self):
        assert revenue_at([10.0, 5.0, 0.0], [0]) == pytest.approx(10 / 15)

    def test_oracle_revenue_example(self):
        assert oracle_revenue_at([5.0, 4.0, 3.0, 0.0, 0.0], 2) == pytest.approx(0.75)

    def test_empty_selection(self):
        assert precision_at([1, 0], []) == 0.0
        assert revenue_at([1.0, 0.0], []) == 0.0

    def test_zero_revenue(self):
        assert revenue_at([0.0, 0.0], [0]) == 0.0
        assert oracle_revenue_at([0.0, 0.0], 1) == 0.0

    def test_oracle_k_positive(self):
        with pytest.raises(ValueError):
            oracle_precision_at([1], 0)
        with pytest.raises(ValueError):
            oracle_revenue_at([1.0], 0)

    def test_full_inspection_reaches_one(self):
        rev = np.random.default_rng(0).exponential(3, 37)
        assert revenue_at(rev, np.arange(37)) == 1.0
        assert oracle_revenue_at(rev, 37) == 1.0

    @settings(max_examples=200, deadline=None)
    @given(
        rev=st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=40),
        frac=st.floats(0.01, 1.0),
        seed=st.integers(0, 10_000),
    )
    def test_oracle_dominates_any_selection(self, rev, frac, seed):
        rev = np.array(rev)
        n = len(rev)
        k = max(1, math.floor(frac * n))
        sel = np.random.default_rng(seed).choice(n, k, replace=False)
        illicit = (rev > 0).astype(int)
        assert revenue_at(rev, sel) <= oracle_revenue_at(rev, k)
        assert precision_at(illicit, sel) <= oracle_precision_at(illicit, k)
        normalize(revenue_at(rev, sel), oracle_revenue_at(rev, k))


class TestNormalize:
    def test_zero_oracle(self):
        assert normalize(0.0, 0.0) == 0.0

    def test_above_oracle_raises(self):
        with pytest.raises(ScoringError):
            normalize(0.5, 0.4)

    def test_float_slack_tolerated(self):
        assert normalize(0.3 + 1e-16, 0.3) == 1.0


class TestMovingAverage:
    def test_brute_force(self):
        x = np.random.default_rng(1).random(40)
        ma = moving_average(x, 13)
        for t in range(40):
            lo = max(0, t - 12)
            assert ma[t] == pytest.approx(sum(x[lo : t + 1]) / (t + 1 - lo))

    def test_window_one_is_identity(self):
        x = [0.1, 0.5, 0.2]
        np.testing.assert_allclose(moving_average(x, 1), x)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            moving_average([1.0], 0)


class TestScoreWeek:
    def test_flags(self):
        assert score_week([0, 0], [0.0, 0.0], [0], 1)["flags"] == "no_fraud;no_revenue"
        out = score_week([], [], [], 0)
        assert out["flags"] == "empty_batch" and out["norm_pre_at_n"] == 0.0

    def test_values(self):
        out = score_week([1, 0, 1, 0], [8.0, 0.0, 2.0, 0.0], [0, 1], 2)
        assert out["frauds_caught"] == 1 and out["revenue_caught"] == 8.0
        assert out["pre_at_n"] == 0.5 and out["oracle_pre"] == 1.0
        assert out["rev_at_n"] == 0.8 and out["oracle_rev"] == 1.0
        assert out["norm_pre_at_n"] == 0.5 and out["norm_rev_at_n"] == 0.8
        assert out["batch_revenue"] == 10.0


def _report(t, pre, rev, size=10):
    return WeeklyReport(
        week_index=t, start_date="2013-02-01", end_date="2013-02-07", inspection_rate=0.1,
        batch_size=size, budget=1, num_inspected=1, num_illicit=1, frauds_caught=1,
        revenue_caught=1.0, pre_at_n=pre, rev_at_n=rev, oracle_pre=1.0, oracle_rev=1.0,
        norm_pre_at_n=pre, norm_rev_at_n=rev,
    )


class TestOutput:
    def test_round_trip(self, tmp_path):
        reports = [_report(t, 0.1 * t, 1 / 3) for t in range(4)]
        write_reports(reports, tmp_path / "r.csv")
        rows = read_reports(tmp_path / "r.csv")
        assert len(rows) == 4 and list(rows[0]) == WeeklyReport.columns()
        assert float(rows[2]["rev_at_n"]) == 1 / 3

    def test_metric_series(self, tmp_path):
        reports = [_report(t, 0.5, 0.25) for t in range(3)]
        paths = write_metric_series(reports, tmp_path, "run")
        assert [p.name for p in paths] == ["run.precision.csv", "run.revenue.csv"]
        lines = paths[1].read_text().splitlines()
        assert lines[0] == "week_index,raw,normalized,moving_average,cumulative" and len(lines) == 4

    def test_summarize(self):
        reports = [_report(0, 1.0, 1.0), _report(1, 0.2, 0.4), _report(2, 0.0, 0.0, size=0), _report(3, 0.4, 0.6)]
        s = summarize(reports, eval_from=1)
        assert s.weeks == 4 and s.post_decay_weeks == 2
        assert s.post_decay_norm_pre == pytest.approx(0.3)
        assert s.post_decay_norm_rev == pytest.approx(0.5)
        assert s.mean_norm_pre == pytest.approx(1.6 / 3)


class TestCumulative:
    def test_pooled_ratio(self):
        a = dataclasses.replace(_report(0, 0.5, 0.5), budget=2, frauds_caught=1, oracle_pre=1.0, revenue_caught=5.0, oracle_rev=1.0, batch_revenue=10.0)
        b = dataclasses.replace(_report(1, 0.0, 0.0), budget=8, frauds_caught=0, oracle_pre=0.25, revenue_caught=0.0, oracle_rev=0.5, batch_revenue=20.0)
        np.testing.assert_allclose(cumulative_normalized([a, b], "precision"), [0.5, 0.25])
        np.testing.assert_allclose(cumulative_normalized([a, b], "revenue"), [0.5, 0.25])

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            cumulative_normalized([], "recall")
