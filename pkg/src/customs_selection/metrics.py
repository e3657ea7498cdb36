"""Precision/revenue at the inspection budget, oracle bounds and smoothing."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

PROVENANCE_KINDS = ("exploit", "random", "badge", "bate", "gate")
_TOL = 1e-12


class ScoringError(ValueError):
    """A strategy scored above the oracle bound: a bookkeeping bug."""


def precision_at(illicit, selected) -> float:
    """Fraud share among the selected rows; 0.0 if nothing was selected."""
    selected = np.asarray(selected, dtype=np.intp)
    if len(selected) == 0:
        return 0.0
    return float(np.asarray(illicit)[selected].sum() / len(selected))


def revenue_at(revenue, selected) -> float:
    """Share of the batch's total revenue held by the selected rows."""
    revenue = np.asarray(revenue, dtype=float)
    total = math.fsum(revenue)
    if total <= 0:
        return 0.0
    return math.fsum(revenue[np.asarray(selected, dtype=np.intp)]) / total


def oracle_precision_at(illicit, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return min(int(np.asarray(illicit).sum()), k) / k


def oracle_revenue_at(revenue, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    revenue = np.asarray(revenue, dtype=float)
    total = math.fsum(revenue)
    if total <= 0:
        return 0.0
    return math.fsum(np.sort(revenue)[::-1][:k]) / total


def normalize(raw: float, oracle: float) -> float:
    """raw / oracle, 0.0 when the oracle is 0.

    The quotient is rounded to 12 decimals so division noise does not leak
    into reports (0.18 / 0.2 gives 0.9, not 0.8999999999999999).

    Raises:
        ScoringError: raw exceeds oracle beyond float tolerance.
    """
    if oracle <= 0:
        return 0.0
    if raw > oracle * (1 + _TOL) + _TOL:
        raise ScoringError(f"raw metric {raw} exceeds oracle {oracle}")
    return min(round(raw / oracle, 12), 1.0)


def moving_average(series: Sequence[float], window: int = 13) -> np.ndarray:
    """Trailing mean over up to ``window`` values ending at each position."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    out = np.empty_like(x)
    for t in range(len(x)):
        out[t] = x[max(0, t - window + 1) : t + 1].mean()
    return out


@dataclass
class WeeklyReport:
    week_index: int
    start_date: str
    end_date: str
    inspection_rate: float
    batch_size: int
    budget: int
    num_inspected: int
    num_illicit: int
    frauds_caught: int
    revenue_caught: float
    pre_at_n: float
    rev_at_n: float
    oracle_pre: float
    oracle_rev: float
    norm_pre_at_n: float
    norm_rev_at_n: float
    n_exploit: int = 0
    n_random: int = 0
    n_badge: int = 0
    n_bate: int = 0
    n_gate: int = 0
    gate_branch: str = ""
    train_size: int = 0
    val_size: int = 0
    flags: str = ""
    batch_revenue: float = 0.0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def score_week(illicit, revenue, selected, budget: int) -> dict:
    """Raw, oracle and normalized metrics of one week's selection.

    Flags: ``empty_batch``, ``no_fraud`` and ``no_revenue`` mark weeks whose
    metrics are reported as zero by convention.
    """
    illicit = np.asarray(illicit)
    revenue = np.asarray(revenue, dtype=float)
    selected = np.asarray(selected, dtype=np.intp)
    flags = []
    if len(illicit) == 0:
        flags.append("empty_batch")
    elif illicit.sum() == 0:
        flags.append("no_fraud")
    if len(illicit) and revenue.sum() <= 0:
        flags.append("no_revenue")
    pre = precision_at(illicit, selected)
    rev = revenue_at(revenue, selected)
    o_pre = oracle_precision_at(illicit, budget) if budget > 0 else 0.0
    o_rev = oracle_revenue_at(revenue, budget) if budget > 0 else 0.0
    return {
        "num_illicit": int(illicit.sum()),
        "frauds_caught": int(illicit[selected].sum()) if len(selected) else 0,
        "revenue_caught": math.fsum(revenue[selected]) if len(selected) else 0.0,
        "pre_at_n": pre,
        "rev_at_n": rev,
        "oracle_pre": o_pre,
        "oracle_rev": o_rev,
        "norm_pre_at_n": normalize(pre, o_pre),
        "norm_rev_at_n": normalize(rev, o_rev),
        "flags": ";".join(flags),
        "batch_revenue": math.fsum(revenue),
    }


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_reports(reports: Sequence[WeeklyReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WeeklyReport.columns())
        for r in reports:
            writer.writerow([_fmt(v) for v in asdict(r).values()])


def read_reports(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cumulative_normalized(reports: Sequence[WeeklyReport], metric: str) -> np.ndarray:
    """Running caught / running oracle-attainable, pooled over weeks.

    ``metric`` is ``"precision"`` (frauds) or ``"revenue"`` (raised revenue).
    """
    if metric not in ("precision", "revenue"):
        raise ValueError(f"unknown metric {metric!r}")
    caught = attainable = 0.0
    out = []
    for r in reports:
        if metric == "precision":
            caught += r.frauds_caught
            attainable += round(r.oracle_pre * r.budget)
        else:
            caught += r.revenue_caught
            attainable += r.oracle_rev * r.batch_revenue
        out.append(min(caught / attainable, 1.0) if attainable > 0 else 0.0)
    return np.array(out)


def write_metric_series(reports: Sequence[WeeklyReport], out_dir: str | Path, stem: str, window: int = 13) -> list[Path]:
    """One plot-ready CSV per metric: week_index, raw, normalized, moving_average, cumulative."""
    out_dir = Path(out_dir)
    paths = []
    for name, raw_key, norm_key in (("precision", "pre_at_n", "norm_pre_at_n"), ("revenue", "rev_at_n", "norm_rev_at_n")):
        norm = [getattr(r, norm_key) for r in reports]
        ma = moving_average(norm, window) if norm else []
        cum = cumulative_normalized(reports, name)
        path = out_dir / f"{stem}.{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["week_index", "raw", "normalized", "moving_average", "cumulative"])
            for r, m, c in zip(reports, ma, cum):
                writer.writerow(
                    [r.week_index, repr(getattr(r, raw_key)), repr(getattr(r, norm_key)), repr(float(m)), repr(float(c))]
                )
        paths.append(path)
    return paths


@dataclass
class Summary:
    weeks: int
    mean_norm_rev: float
    mean_norm_pre: float
    post_decay_weeks: int
    post_decay_norm_rev: float
    post_decay_norm_pre: float


def summarize(reports: Sequence[WeeklyReport], eval_from: int) -> Summary:
    """Whole-run and post-decay (``week_index >= eval_from``) means, skipping empty weeks."""
    live = [r for r in reports if r.batch_size > 0]
    post = [r for r in live if r.week_index >= eval_from]

    def mean(rs, key):
        return float(np.mean([getattr(r, key) for r in rs])) if rs else float("nan")

    return Summary(
        weeks=len(reports),
        mean_norm_rev=mean(live, "norm_rev_at_n"),
        mean_norm_pre=mean(live, "norm_pre_at_n"),
        post_decay_weeks=len(post),
        post_decay_norm_rev=mean(post, "norm_rev_at_n"),
        post_decay_norm_pre=mean(post, "norm_pre_at_n"),
    )
