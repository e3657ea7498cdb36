"""Parametric generator of labeled import streams with scheduled drift.

Generative story, per item:

* an importer (heavy-tailed activity) declares goods under a tariff code,
  usually shipped from the code's dominant source country;
* the importer under-invoices by a degree ``u`` in [0, 0.8) that grows with
  its dishonesty and the code's latent risk; the declared FOB value is the
  fair value times ``1 - u`` while freight stays honest, so under-invoicing
  depresses value/kg and fob/cif;
* the item is illicit with probability
  ``sigmoid(b0 + 1.0*zscore(u) - 1.0*honesty + 0.7*tariff_risk + 0.5*country_risk)``,
  with ``b0`` solved so the mean probability equals the configured rate;
* raised revenue is ``tariff_rate * (fair CIF - declared CIF)``, at least 1.0.

Drift events, applied from the start of their week onward:

* ``country_remap:f`` gives a fraction ``f`` of tariff codes a new dominant
  source country;
* ``importer_resample:f`` redraws the honesty of a fraction ``f`` of importers.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .ingest import Declaration, InspectionLabel, LabeledDeclaration

DRIFT_KINDS = ("country_remap", "importer_resample")
COUNTRIES = (
    "USA", "CHN", "IND", "FRA", "DEU", "GBR", "JPN", "KOR", "BRA", "ZAF",
    "NGA", "KEN", "EGY", "TUR", "ARE", "SAU", "ITA", "ESP", "NLD", "BEL",
    "CAN", "MEX", "ARG", "THA", "VNM", "MYS", "IDN", "PAK", "BGD", "RUS",
    "UKR", "POL", "SWE", "CHE", "AUS", "SGP", "GHA", "TZA", "ETH", "MAR",
)
_COEF_UNDERINVOICE = 1.0
_COEF_DISHONESTY = 1.0
_COEF_TARIFF = 0.7
_COEF_COUNTRY = 0.5


@dataclass(frozen=True)
class DriftEvent:
    week: int
    kind: str
    fraction: float

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if not 0 < self.fraction <= 1:
            raise ValueError("drift fraction must lie in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "DriftEvent":
        week, kind, fraction = text.strip().split(":")
        return cls(int(week), kind, float(fraction))

    def __str__(self):
        return f"{self.week}:{self.kind}:{self.fraction:g}"


@dataclass(frozen=True)
class GeneratorConfig:
    num_items: int = 100_000
    num_weeks: int = 52
    num_importers: int = 8_000
    num_tariff_codes: int = 1_000
    num_declarants: int = 500
    num_offices: int = 30
    base_illicit_rate: float = 0.076
    drift_schedule: tuple[DriftEvent, ...] = ()
    start_date: dt.date = dt.date(2013, 1, 1)
    seed: int = 7

    def __post_init__(self):
        if self.num_weeks < 1 or self.num_items < self.num_weeks:
            raise ValueError("need num_weeks >= 1 and num_items >= num_weeks")
        if min(self.num_importers, self.num_tariff_codes, self.num_declarants, self.num_offices) < 1:
            raise ValueError("entity counts must be positive")
        if not 0 < self.base_illicit_rate < 1:
            raise ValueError("base_illicit_rate must lie in (0, 1)")
        schedule = tuple(DriftEvent.parse(e) if isinstance(e, str) else e for e in self.drift_schedule)
        object.__setattr__(self, "drift_schedule", schedule)
        for e in schedule:
            if not 0 <= e.week < self.num_weeks:
                raise ValueError(f"drift week {e.week} outside [0, {self.num_weeks})")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "GeneratorConfig":
        """Read a flat ``key = value`` file (``#`` comments allowed).

        ``drift_schedule`` is a comma-separated list of ``week:kind:fraction``.
        """
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in types:
                raise ValueError(f"unknown generator key {key!r}")
            kw[key] = _coerce(key, value)
        kw.update(overrides)
        return cls(**kw)


def _coerce(key: str, value: str):
    if key == "drift_schedule":
        return tuple(DriftEvent.parse(v) for v in value.split(",") if v.strip())
    if key == "start_date":
        return dt.date.fromisoformat(value)
    if key == "base_illicit_rate":
        return float(value)
    return int(value)


def emission_log(cfg: GeneratorConfig) -> list[int]:
    """Items per week: an even split, remainder to the earliest weeks."""
    base, extra = divmod(cfg.num_items, cfg.num_weeks)
    return [base + (1 if w < extra else 0) for w in range(cfg.num_weeks)]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _calibrate_intercept(score: np.ndarray, rate: float) -> float:
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _sigmoid(mid + score).mean() < rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _tariff_codes(rng: np.random.Generator, n: int) -> list[str]:
    codes: set[int] = set()
    while len(codes) < n:
        codes.update(rng.integers(1_000_000_000, 9_999_999_999, size=n - len(codes)).tolist())
    return [str(c) for c in sorted(codes)]


def _pick(rng, cdf: np.ndarray, size: int) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right"), len(cdf) - 1)


def generate_columns(cfg: GeneratorConfig) -> dict[str, np.ndarray]:
    """Columnar generation; :func:`generate` wraps the result in dataclasses."""
    rng = np.random.default_rng(cfg.seed)
    n_c = len(COUNTRIES)

    # entities
    country_risk = rng.normal(size=n_c)
    freight_per_kg = rng.lognormal(np.log(0.4), 0.3, size=n_c)
    tariff_ids = _tariff_codes(rng, cfg.num_tariff_codes)
    tariff_cdf = np.cumsum(rng.lognormal(0.0, 1.0, size=cfg.num_tariff_codes))
    tariff_risk = rng.normal(size=cfg.num_tariff_codes)
    tariff_rate = rng.uniform(0.05, 0.30, size=cfg.num_tariff_codes)
    price_per_kg = rng.lognormal(np.log(4.0), 0.5, size=cfg.num_tariff_codes)
    unit_weight = rng.lognormal(np.log(10.0), 1.0, size=cfg.num_tariff_codes)
    dominant = rng.integers(n_c, size=cfg.num_tariff_codes)
    importer_cdf = np.cumsum(rng.lognormal(0.0, 1.2, size=cfg.num_importers))
    honesty = rng.normal(size=cfg.num_importers)
    home_declarant = rng.integers(cfg.num_declarants, size=cfg.num_importers)
    home_office = rng.integers(cfg.num_offices, size=cfg.num_importers)

    events: dict[int, list[DriftEvent]] = {}
    for e in cfg.drift_schedule:
        events.setdefault(e.week, []).append(e)

    parts = []
    for week, count in enumerate(emission_log(cfg)):
        for e in events.get(week, []):
            if e.kind == "country_remap":
                hit = rng.random(cfg.num_tariff_codes) < e.fraction
                dominant = dominant.copy()
                dominant[hit] = (dominant[hit] + rng.integers(1, n_c, size=hit.sum())) % n_c
            else:
                hit = rng.random(cfg.num_importers) < e.fraction
                honesty = honesty.copy()
                honesty[hit] = rng.normal(size=hit.sum())

        day = week * 7 + np.sort(rng.integers(7, size=count))
        imp = _pick(rng, importer_cdf, count)
        tar = _pick(rng, tariff_cdf, count)
        ctry = np.where(rng.random(count) < 0.85, dominant[tar], rng.integers(n_c, size=count))
        decl = np.where(rng.random(count) < 0.8, home_declarant[imp], rng.integers(cfg.num_declarants, size=count))
        office = np.where(rng.random(count) < 0.9, home_office[imp], rng.integers(cfg.num_offices, size=count))
        parts.append(
            {
                "day": day,
                "importer": imp,
                "tariff": tar,
                "country": ctry,
                "declarant": decl,
                "office": office,
                "honesty": honesty[imp],
                "noise": rng.normal(0.0, 0.7, size=count),
                "quantity": rng.geometric(0.35, size=count).astype(float),
                "weight_noise": rng.lognormal(0.0, 0.25, size=count),
                "price_noise": rng.lognormal(0.0, 0.3, size=count),
                "freight_noise": rng.lognormal(0.0, 0.2, size=count),
            }
        )
    col = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    n = len(col["day"])

    tar, ctry = col["tariff"], col["country"]
    gross_weight = np.maximum(np.round(col["quantity"] * unit_weight[tar] * col["weight_noise"], 1), 0.1)
    fair_fob = gross_weight * price_per_kg[tar] * col["price_noise"]
    propensity = _sigmoid(-1.3 * col["honesty"] + 0.4 * tariff_risk[tar] - 1.2 + col["noise"])
    underinvoice = 0.8 * propensity
    fob = np.round(fair_fob * (1.0 - underinvoice), 2)
    freight = gross_weight * freight_per_kg[ctry] * col["freight_noise"]
    cif = np.round(fob * 1.01 + freight, 2)
    fair_cif = fair_fob * 1.01 + freight
    taxes = np.round(tariff_rate[tar] * cif, 2)

    u_std = underinvoice.std() or 1.0
    score = (
        _COEF_UNDERINVOICE * (underinvoice - underinvoice.mean()) / u_std
        - _COEF_DISHONESTY * col["honesty"]
        + _COEF_TARIFF * tariff_risk[tar]
        + _COEF_COUNTRY * country_risk[ctry]
    )
    b0 = _calibrate_intercept(score, cfg.base_illicit_rate)
    illicit = (rng.random(n) < _sigmoid(b0 + score)).astype(np.int8)
    revenue = np.where(illicit == 1, np.maximum(np.round(tariff_rate[tar] * (fair_cif - cif), 2), 1.0), 0.0)

    return {
        "sgd_id": np.array([f"SGD{i:07d}" for i in range(n)], dtype=object),
        "day": col["day"],
        "importer_id": np.array([f"IMP{i:06d}" for i in col["importer"]], dtype=object),
        "declarant_id": np.array([f"DEC{i:05d}" for i in col["declarant"]], dtype=object),
        "country": np.array(COUNTRIES, dtype=object)[ctry],
        "office_id": np.array([f"OFFICE{i}" for i in col["office"]], dtype=object),
        "tariff_code": np.array(tariff_ids, dtype=object)[tar],
        "quantity": col["quantity"],
        "gross_weight": gross_weight,
        "fob_value": fob,
        "cif_value": cif,
        "total_taxes": taxes,
        "illicit": illicit,
        "revenue": revenue,
    }


def generate(cfg: GeneratorConfig) -> list[LabeledDeclaration]:
    """Generate the full labeled stream (all labels hidden), in date order."""
    c = generate_columns(cfg)
    start = cfg.start_date
    dates = [start + dt.timedelta(days=int(d)) for d in range(int(c["day"].max()) + 1)]
    out = []
    for i in range(len(c["day"])):
        decl = Declaration(
            sgd_id=c["sgd_id"][i],
            sgd_date=dates[c["day"][i]],
            importer_id=c["importer_id"][i],
            declarant_id=c["declarant_id"][i],
            country=c["country"][i],
            office_id=c["office_id"][i],
            tariff_code=c["tariff_code"][i],
            quantity=float(c["quantity"][i]),
            gross_weight=float(c["gross_weight"][i]),
            fob_value=float(c["fob_value"][i]),
            cif_value=float(c["cif_value"][i]),
            total_taxes=float(c["total_taxes"][i]),
        )
        out.append(LabeledDeclaration(decl, InspectionLabel(int(c["illicit"][i]), float(c["revenue"][i]))))
    return out
