"""Risk profiling and numeric encoding of declarations.

Feature layout (``FEATURE_NAMES``), 15 columns:

    0-9   standardized numerics: quantity, gross.weight, fob.value, cif.value,
          total.taxes, unit.value, value/kg, tax.ratio, unit.tax, face.ratio
    10-14 binary risk indicators: importer, declarant, tariff, country, office

Money-like columns (fob, cif, taxes, unit.value, value/kg, unit.tax) go
through ``log1p`` before standardization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .ingest import Declaration, DeclarationTable, LabeledDeclaration

ENTITY_KINDS = ("importer", "declarant", "tariff_code", "country", "office")
_ENTITY_FIELD = {
    "importer": "importer_id",
    "declarant": "declarant_id",
    "tariff_code": "tariff_code",
    "country": "country",
    "office": "office_id",
}
NUMERIC_NAMES = (
    "quantity",
    "gross.weight",
    "fob.value",
    "cif.value",
    "total.taxes",
    "unit.value",
    "value/kg",
    "tax.ratio",
    "unit.tax",
    "face.ratio",
)
FEATURE_NAMES = NUMERIC_NAMES + tuple(f"risk.{k}" for k in ENTITY_KINDS)
LOG_COLUMNS = np.array([2, 3, 4, 5, 6, 8])
NUM_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class RiskProfile:
    """Historical fraud rates for one entity kind.

    An entity is high-risk when its rate is positive and at or above
    ``cutoff``. Unseen entities are never high-risk.
    """

    entity_kind: str
    fraud_rate: Mapping[str, float]
    cutoff: float

    def is_high_risk(self, entity_id) -> bool:
        rate = self.fraud_rate.get(entity_id)
        return rate is not None and rate > 0 and rate >= self.cutoff

    def indicators(self, ids: np.ndarray) -> np.ndarray:
        flagged = {e for e, r in self.fraud_rate.items() if r > 0 and r >= self.cutoff}
        if not flagged:
            return np.zeros(len(ids))
        return np.fromiter((e in flagged for e in ids), dtype=float, count=len(ids))


def _profile(kind: str, ids: np.ndarray, illicit: np.ndarray, percentile: float) -> RiskProfile:
    if len(ids) == 0:
        return RiskProfile(kind, {}, 1.0)
    uniq, inverse = np.unique(ids.astype(str), return_inverse=True)
    counts = np.bincount(inverse, minlength=len(uniq))
    frauds = np.bincount(inverse, weights=illicit, minlength=len(uniq))
    rates = frauds / counts
    cutoff = float(np.quantile(rates, percentile))
    return RiskProfile(kind, dict(zip(uniq.tolist(), rates.tolist())), cutoff)


def risk_profiles_from_table(
    table: DeclarationTable, rows: np.ndarray, illicit: np.ndarray, percentile: float = 0.9
) -> dict[str, RiskProfile]:
    """Risk profiles from the given (already inspected) table rows."""
    if not 0 < percentile < 1:
        raise ValueError("percentile must lie in (0, 1)")
    illicit = np.asarray(illicit, dtype=float)
    return {
        kind: _profile(kind, getattr(table, _ENTITY_FIELD[kind])[rows], illicit, percentile)
        for kind in ENTITY_KINDS
    }


def build_risk_profiles(
    history: Sequence[LabeledDeclaration], percentile: float = 0.9
) -> dict[str, RiskProfile]:
    """Rank every entity kind by past fraud rate among inspected items.

    Args:
        history: Inspected items; every one must have ``label_visible``.
        percentile: Quantile of the per-entity rates used as the high-risk
            cutoff (0.9 flags roughly the top decile).
    """
    if not 0 < percentile < 1:
        raise ValueError("percentile must lie in (0, 1)")
    if any(not it.label_visible for it in history):
        raise ValueError("risk profiles may only use inspected items")
    illicit = np.array([it.label.illicit for it in history], dtype=float)
    out = {}
    for kind in ENTITY_KINDS:
        ids = np.array([getattr(it.declaration, _ENTITY_FIELD[kind]) for it in history], dtype=object)
        out[kind] = _profile(kind, ids, illicit, percentile)
    return out


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def cross_features(quantity, gross_weight, fob, cif, taxes) -> np.ndarray:
    """unit.value, value/kg, tax.ratio, unit.tax, face.ratio (zero denominators -> 0)."""
    quantity, gross_weight, fob, cif, taxes = (
        np.asarray(a, dtype=float) for a in (quantity, gross_weight, fob, cif, taxes)
    )
    return np.stack(
        [
            _ratio(cif, quantity),
            _ratio(cif, gross_weight),
            _ratio(taxes, cif),
            _ratio(taxes, quantity),
            _ratio(fob, cif),
        ],
        axis=-1,
    )


def raw_numeric(quantity, gross_weight, fob, cif, taxes) -> np.ndarray:
    """Unstandardized numeric block (log1p applied to money-like columns)."""
    base = np.stack([np.asarray(a, dtype=float) for a in (quantity, gross_weight, fob, cif, taxes)], axis=-1)
    out = np.concatenate([base, cross_features(quantity, gross_weight, fob, cif, taxes)], axis=-1)
    out[..., LOG_COLUMNS] = np.log1p(out[..., LOG_COLUMNS])
    return out


def table_numeric(table: DeclarationTable, rows=None) -> np.ndarray:
    rows = slice(None) if rows is None else rows
    return raw_numeric(
        table.quantity[rows],
        table.gross_weight[rows],
        table.fob_value[rows],
        table.cif_value[rows],
        table.total_taxes[rows],
    )


def declaration_numeric(d: Declaration) -> np.ndarray:
    return raw_numeric(d.quantity, d.gross_weight, d.fob_value, d.cif_value, d.total_taxes)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            return cls(np.zeros(x.shape[1]), np.ones(x.shape[1]))
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std


def encode(d: Declaration, profiles: Mapping[str, RiskProfile], scaler: Scaler) -> np.ndarray:
    """Encode a single declaration into its 15-dimensional feature vector."""
    numeric = scaler.transform(declaration_numeric(d))
    risk = [
        float(profiles[k].is_high_risk(getattr(d, _ENTITY_FIELD[k]))) if k in profiles else 0.0
        for k in ENTITY_KINDS
    ]
    return np.concatenate([numeric, risk])


def encode_table(
    table: DeclarationTable, rows: np.ndarray, profiles: Mapping[str, RiskProfile], scaler: Scaler
) -> np.ndarray:
    """Vectorized :func:`encode` over table rows; returns shape (len(rows), 15)."""
    numeric = scaler.transform(table_numeric(table, rows))
    risk = np.zeros((len(rows), len(ENTITY_KINDS)))
    for j, kind in enumerate(ENTITY_KINDS):
        if kind in profiles:
            risk[:, j] = profiles[kind].indicators(getattr(table, _ENTITY_FIELD[kind])[rows])
    return np.concatenate([numeric, risk], axis=1)


class FeatureEncoder:
    """Risk profiles plus scaler, fit on inspected rows of a table."""

    def __init__(self, profiles: dict[str, RiskProfile], scaler: Scaler):
        self.profiles = profiles
        self.scaler = scaler

    @classmethod
    def fit(cls, table: DeclarationTable, rows: np.ndarray, illicit: np.ndarray, percentile: float = 0.9):
        profiles = risk_profiles_from_table(table, rows, illicit, percentile)
        return cls(profiles, Scaler.fit(table_numeric(table, rows)))

    def transform(self, table: DeclarationTable, rows: np.ndarray) -> np.ndarray:
        return encode_table(table, rows, self.profiles, self.scaler)
