import datetime as dt

import pytest

from customs_selection.ingest import Declaration, InspectionLabel, LabeledDeclaration
from customs_selection.synthgen import GeneratorConfig, generate

DAY0 = dt.date(2013, 1, 1)


def make_item(i=0, day=0, importer="IMP1", illicit=0, revenue=0.0, **kw):
    fields = dict(
        sgd_id=f"SGD{i}",
        sgd_date=DAY0 + dt.timedelta(days=day),
        importer_id=importer,
        declarant_id="DEC1",
        country="USA",
        office_id="OFFICE1",
        tariff_code="8703232926",
        quantity=1.0,
        gross_weight=150.0,
        fob_value=350.0,
        cif_value=400.0,
        total_taxes=50.0,
    )
    fields.update(kw)
    return LabeledDeclaration(Declaration(**fields), InspectionLabel(illicit, revenue))


@pytest.fixture(scope="session")
def small_stream():
    """~13 weeks of synthetic data starting 2013-01-01."""
    cfg = GeneratorConfig(num_items=6500, num_weeks=13, num_importers=800, num_tariff_codes=150, seed=3)
    return cfg, generate(cfg)


def expected_budget(rate, batch_size):
    """Independent budget oracle in exact rational arithmetic."""
    from fractions import Fraction
    import math

    if batch_size == 0:
        return 0
    return min(batch_size, max(1, math.floor(Fraction(repr(rate)) * batch_size)))


def bookkeeping_violations(sim, reports):
    """Count budget, ledger, monotonicity and leakage violations of a finished run."""
    bad = []
    rows = sim.train_rows
    if len(set(rows)) != len(rows):
        bad.append("duplicate inspections")
    for prev, cur in zip(reports, reports[1:]):
        if cur.train_size != prev.train_size + prev.num_inspected:
            bad.append(f"week {cur.week_index}: training set not monotone")
    last = reports[-1]
    if len(rows) != last.train_size + last.num_inspected:
        bad.append("final ledger size mismatch")
    for r in reports:
        k = expected_budget(r.inspection_rate, r.batch_size)
        if r.budget != k or r.num_inspected != k:
            bad.append(f"week {r.week_index}: budget {r.budget}/{r.num_inspected} != {k}")
        if r.n_exploit + r.n_random + r.n_badge + r.n_bate + r.n_gate != r.num_inspected:
            bad.append(f"week {r.week_index}: provenance does not add up")
    if sim.vault.violations:
        bad.append(f"{sim.vault.violations} hidden labels read")
    return bad
