"""Weekly select -> inspect -> score -> retrain loop."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .features import NUM_FEATURES, FeatureEncoder
from .ingest import DeclarationTable, LabelVault
from .metrics import PROVENANCE_KINDS, WeeklyReport, score_week
from .model import ModelSnapshot, TrainConfig, train
from .selection import BatchContext, StrategySpec, select

log = logging.getLogger(__name__)

POLICIES = ("fast_linear_decay", "constant")
DECAY_STEP = 0.10
ROLES = {"train": 0, "select": 1, "tiebreak": 2}


@dataclass(frozen=True)
class InspectionPlan:
    policy: str
    initial_rate: float
    final_rate: float
    rates: tuple[float, ...]

    @property
    def decay_end(self) -> int:
        """First week running at the final rate (len(rates) if never reached)."""
        for t, r in enumerate(self.rates):
            if r <= self.final_rate:
                return t
        return len(self.rates)


def make_plan(policy: str, r0: float, r: float, num_weeks: int) -> InspectionPlan:
    """Weekly inspection rates.

    ``fast_linear_decay`` drops 10 points a week from ``r0`` until it hits
    ``r`` and stays there; ``constant`` runs at ``r`` throughout. Rates are
    rounded to 12 decimals so 1.0 - 0.1 * 3 lands exactly on 0.7.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown inspection plan {policy!r}")
    if not 0 < r <= r0 <= 1:
        raise ValueError(f"need 0 < final_rate <= initial_rate <= 1, got {r0}, {r}")
    if policy == "constant":
        rates = (r,) * num_weeks
    else:
        rates = tuple(round(max(r, r0 - DECAY_STEP * t), 12) for t in range(num_weeks))
    return InspectionPlan(policy, r0, r, rates)


def budget_for(rate: float, batch_size: int) -> int:
    """floor(rate * |batch|), at least 1 for a non-empty batch."""
    if batch_size == 0:
        return 0
    return min(batch_size, max(1, math.floor(rate * batch_size + 1e-9)))


def derive_seed(master: int, week: int, role: str) -> int:
    """Child seed for (week, role), from ``SeedSequence(master, spawn_key=(week, role_id))``."""
    ss = np.random.SeedSequence(master, spawn_key=(week, ROLES[role]))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class SimulationConfig:
    train_from: dt.date
    test_from: dt.date
    num_weeks: int
    plan: InspectionPlan
    strategy: StrategySpec
    train: TrainConfig = field(default_factory=TrainConfig)
    test_length: int = 7
    valid_length: int = 28
    seed: int = 0
    risk_percentile: float = 0.9
    eval_from: int | None = None  # defaults to plan.decay_end

    def __post_init__(self):
        if self.test_from <= self.train_from:
            raise ValueError("test_from must come after train_from")
        if self.num_weeks < 1 or self.test_length < 1 or self.valid_length < 1:
            raise ValueError("num_weeks, test_length and valid_length must be positive")
        if len(self.plan.rates) < self.num_weeks:
            raise ValueError("inspection plan shorter than the simulation")

    @property
    def evaluation_start(self) -> int:
        return self.plan.decay_end if self.eval_from is None else self.eval_from


class Simulation:
    """State of one simulated deployment over a labeled stream.

    ``train_rows`` is the inspected set X_t in order of inspection. All label
    reads except the final scoring go through ``vault.visible``; after a run
    ``vault.violations`` must be zero.
    """

    def __init__(
        self,
        cfg: SimulationConfig,
        table: DeclarationTable,
        vault: LabelVault,
        snapshot_dir: str | Path | None = None,
    ):
        self.cfg = cfg
        self.table = table
        self.vault = vault
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self.week = 0
        self.reports: list[WeeklyReport] = []
        self.provenance_totals = {k: 0 for k in PROVENANCE_KINDS}
        history = table.between(cfg.train_from, cfg.test_from)
        vault.reveal(history)
        self.train_rows: list[int] = history.tolist()
        self._inspected = np.zeros(len(table), dtype=bool)
        self._inspected[history] = True

    def fit_model(self, x, y_cls, y_rev, cfg: TrainConfig, batch_rows: np.ndarray) -> ModelSnapshot:
        """Weekly training hook; tests may override it with a stand-in model."""
        return train(x, y_cls, y_rev, cfg)

    def week_bounds(self, t: int) -> tuple[dt.date, dt.date]:
        start = self.cfg.test_from + dt.timedelta(days=t * self.cfg.test_length)
        return start, start + dt.timedelta(days=self.cfg.test_length)

    def step(self) -> WeeklyReport:
        cfg, t = self.cfg, self.week
        start, end = self.week_bounds(t)
        batch = self.table.between(start, end)
        rate = cfg.plan.rates[t]
        k = budget_for(rate, len(batch))
        train_rows = np.array(self.train_rows, dtype=np.intp)
        common = dict(
            week_index=t,
            start_date=start.isoformat(),
            end_date=(end - dt.timedelta(days=1)).isoformat(),
            inspection_rate=rate,
            batch_size=len(batch),
            budget=k,
            train_size=len(train_rows),
        )
        if len(batch) == 0:
            report = WeeklyReport(
                **common, num_inspected=0, num_illicit=0, frauds_caught=0, revenue_caught=0.0,
                pre_at_n=0.0, rev_at_n=0.0, oracle_pre=0.0, oracle_rev=0.0,
                norm_pre_at_n=0.0, norm_rev_at_n=0.0, flags="empty_batch",
            )
            self.reports.append(report)
            self.week += 1
            return report

        ctx = self._context(t, batch, train_rows, rate)
        sel_seed = derive_seed(cfg.seed, t, "select")
        res = select(
            cfg.strategy,
            ctx,
            k,
            np.random.default_rng(sel_seed),
            np.random.default_rng(derive_seed(cfg.seed, t, "tiebreak")),
            seed=sel_seed,
        )
        chosen = batch[res.indices]
        if len(np.unique(chosen)) != len(chosen) or self._inspected[chosen].any():
            raise RuntimeError(f"week {t}: selection repeats an inspected item")
        self.vault.reveal(chosen)
        self._inspected[chosen] = True
        self.train_rows.extend(chosen.tolist())

        illicit, revenue = self.vault.oracle(batch)
        scores = score_week(illicit, revenue, res.indices, k)
        counts = res.counts()
        for kind, c in counts.items():
            self.provenance_totals[kind] += c
        report = WeeklyReport(
            **common,
            num_inspected=len(chosen),
            **scores,
            **{f"n_{kind}": counts.get(kind, 0) for kind in PROVENANCE_KINDS},
            gate_branch=res.gate_branch,
            val_size=0 if ctx.val_revenue is None else len(ctx.val_revenue),
        )
        self.reports.append(report)
        self.week += 1
        return report

    def _context(self, t: int, batch: np.ndarray, train_rows: np.ndarray, rate: float) -> BatchContext:
        cfg = self.cfg
        if not cfg.strategy.needs_model:
            return BatchContext(None, np.zeros((len(batch), NUM_FEATURES)), rate=rate)
        y_cls, y_rev = self.vault.visible(train_rows)
        enc = FeatureEncoder.fit(self.table, train_rows, y_cls, cfg.risk_percentile)
        x_train = enc.transform(self.table, train_rows)
        tcfg = replace(cfg.train, seed=derive_seed(cfg.seed, t, "train") % 2**63)
        model = self.fit_model(x_train, y_cls, y_rev, tcfg, batch)
        if self.snapshot_dir is not None and isinstance(model, ModelSnapshot):
            model.save(self.snapshot_dir / f"model-week{t:03d}.json")

        start, _ = self.week_bounds(t)
        lo = (start - dt.timedelta(days=cfg.valid_length) - dt.date(1970, 1, 1)).days
        in_val = self.table.day[train_rows] >= lo
        val_x = x_train[in_val]
        val_rev = y_rev[in_val]
        return BatchContext(model, enc.transform(self.table, batch), val_x, val_rev, rate)

    def run(self) -> list[WeeklyReport]:
        while self.week < self.cfg.num_weeks:
            r = self.step()
            log.debug(
                "week %d: |B|=%d k=%d norm_pre=%.3f norm_rev=%.3f",
                r.week_index, r.batch_size, r.budget, r.norm_pre_at_n, r.norm_rev_at_n,
            )
        return self.reports


def run(cfg: SimulationConfig, table: DeclarationTable, vault: LabelVault, **kw) -> list[WeeklyReport]:
    return Simulation(cfg, table, vault, **kw).run()
