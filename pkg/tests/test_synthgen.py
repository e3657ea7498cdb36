import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score

from customs_selection.features import FeatureEncoder
from customs_selection.ingest import DeclarationTable, write_declarations
from customs_selection.synthgen import DriftEvent, GeneratorConfig, emission_log, generate


@pytest.fixture(scope="module")
def default_shape():
    cfg = GeneratorConfig(num_items=100_000, num_weeks=52, base_illicit_rate=0.076, seed=7)
    return cfg, DeclarationTable.from_items(generate(cfg))


def _weeks(table, cfg, a, b):
    s = cfg.start_date
    return table.between(s + dt.timedelta(days=7 * a), s + dt.timedelta(days=7 * b))


def _probe_auc(table, vault, cfg, train_weeks, eval_weeks):
    tr = _weeks(table, cfg, *train_weeks)
    ev = _weeks(table, cfg, *eval_weeks)
    y_tr, _ = vault.oracle(tr)
    y_ev, _ = vault.oracle(ev)
    enc = FeatureEncoder.fit(table, tr, y_tr)
    probe = LogisticRegression(max_iter=2000).fit(enc.transform(table, tr), y_tr)
    return roc_auc_score(y_ev, probe.predict_proba(enc.transform(table, ev))[:, 1])


def test_realized_illicit_rate(default_shape):
    cfg, (table, vault) = default_shape
    ill, _ = vault.oracle(np.arange(len(table)))
    assert len(table) == 100_000
    assert abs(ill.mean() - 0.076) <= 0.01


def test_stationary_without_drift(default_shape):
    cfg, (table, vault) = default_shape
    ill, _ = vault.oracle(np.arange(len(table)))
    p = ill.mean()
    for w in range(cfg.num_weeks):
        rows = _weeks(table, cfg, w, w + 1)
        sigma = np.sqrt(p * (1 - p) / len(rows))
        assert abs(ill[rows].mean() - p) <= 3 * sigma, w


def test_label_consistency(default_shape):
    _, (table, vault) = default_shape
    ill, rev = vault.oracle(np.arange(len(table)))
    assert np.all(rev[ill == 0] == 0)
    assert np.all(rev[ill == 1] > 0)


def test_declaration_invariants(default_shape):
    _, (table, _) = default_shape
    for col in ("quantity", "gross_weight", "fob_value", "cif_value", "total_taxes"):
        assert np.all(getattr(table, col) >= 0)
    assert np.all(table.cif_value >= table.fob_value)
    assert all(len(c) == 10 and c.isdigit() for c in np.unique(table.tariff_code))
    assert all(len(c) == 3 for c in np.unique(table.country))


def test_revenue_right_skewed(default_shape):
    _, (table, vault) = default_shape
    ill, rev = vault.oracle(np.arange(len(table)))
    fraud_rev = rev[ill == 1]
    assert fraud_rev.mean() > 1.5 * np.median(fraud_rev)


def test_learnability_floor(default_shape):
    cfg, (table, vault) = default_shape
    assert _probe_auc(table, vault, cfg, (0, 8), (8, 12)) >= 0.65


def test_drift_degrades_pre_drift_probe():
    cfg = GeneratorConfig(seed=7, drift_schedule=("12:importer_resample:1.0", "12:country_remap:0.5"))
    table, vault = DeclarationTable.from_items(generate(cfg))
    holdout = _probe_auc(table, vault, cfg, (0, 8), (8, 12))
    post = _probe_auc(table, vault, cfg, (0, 8), (12, 16))
    assert holdout - post >= 0.05


def test_same_seed_byte_identical():
    cfg = GeneratorConfig(num_items=3000, num_weeks=6, num_importers=300, num_tariff_codes=50, seed=11,
                          drift_schedule=("3:country_remap:0.5",))
    a, b = io.StringIO(), io.StringIO()
    write_declarations(generate(cfg), a)
    write_declarations(generate(cfg), b)
    assert a.getvalue() == b.getvalue()
    c = io.StringIO()
    write_declarations(generate(GeneratorConfig(**{**cfg.__dict__, "seed": 12})), c)
    assert c.getvalue() != a.getvalue()


class TestEmissionLog:
    def test_uniform(self):
        assert emission_log(GeneratorConfig(num_items=520, num_weeks=52)) == [10] * 52

    def test_remainder_to_earliest_week(self):
        assert emission_log(GeneratorConfig(num_items=521, num_weeks=52)) == [11] + [10] * 51

    @settings(max_examples=100)
    @given(weeks=st.integers(1, 200), extra=st.integers(0, 10_000))
    def test_sums_to_num_items(self, weeks, extra):
        log = emission_log(GeneratorConfig(num_items=weeks + extra, num_weeks=weeks))
        assert sum(log) == weeks + extra
        assert max(log) - min(log) <= 1
        assert log == sorted(log, reverse=True)

    def test_generate_follows_log(self):
        cfg = GeneratorConfig(num_items=1003, num_weeks=10, num_importers=100, num_tariff_codes=20)
        days = [(it.declaration.sgd_date - cfg.start_date).days for it in generate(cfg)]
        counts = np.bincount(np.array(days) // 7, minlength=10)
        assert counts.tolist() == emission_log(cfg)


@pytest.mark.parametrize(
    "kw",
    [
        dict(base_illicit_rate=0.0),
        dict(base_illicit_rate=1.0),
        dict(num_items=5, num_weeks=10),
        dict(drift_schedule=("60:country_remap:0.5",)),
        dict(drift_schedule=("3:teleport:0.5",)),
        dict(drift_schedule=("3:country_remap:1.5",)),
        dict(seed=-1),
    ],
)
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        GeneratorConfig(**kw)


def test_config_file(tmp_path):
    path = tmp_path / "gen.cfg"
    path.write_text(
        "# demo\nnum_items = 2000\nnum_weeks = 4\nbase_illicit_rate = 0.1\n"
        "drift_schedule = 2:importer_resample:0.5, 3:country_remap:0.2\nstart_date = 2014-03-01\nseed = 9\n"
    )
    cfg = GeneratorConfig.from_file(path)
    assert cfg.num_items == 2000 and cfg.seed == 9 and cfg.start_date == dt.date(2014, 3, 1)
    assert cfg.drift_schedule == (DriftEvent(2, "importer_resample", 0.5), DriftEvent(3, "country_remap", 0.2))
    path.write_text("bogus = 1\n")
    with pytest.raises(ValueError):
        GeneratorConfig.from_file(path)
