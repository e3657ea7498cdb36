"""Parsing, validation and weekly slicing of import declarations."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

NUMERIC_FIELDS = (
    "quantity",
    "gross_weight",
    "fob_value",
    "cif_value",
    "total_taxes",
)
ID_FIELDS = (
    "sgd_id",
    "importer_id",
    "declarant_id",
    "country",
    "office_id",
    "tariff_code",
)
LABEL_FIELDS = ("illicit", "revenue")

# field name -> canonical CSV header
DEFAULT_SCHEMA: dict[str, str] = {
    "sgd_id": "sgd.id",
    "sgd_date": "sgd.date",
    "importer_id": "importer.id",
    "declarant_id": "declarant.id",
    "country": "country",
    "office_id": "office.id",
    "tariff_code": "tariff.code",
    "quantity": "quantity",
    "gross_weight": "gross.weight",
    "fob_value": "fob.value",
    "cif_value": "cif.value",
    "total_taxes": "total.taxes",
    "illicit": "illicit",
    "revenue": "revenue",
}
REQUIRED_FIELDS = tuple(f for f in DEFAULT_SCHEMA if f not in LABEL_FIELDS)


class SchemaError(ValueError):
    """The CSV header does not carry a required column."""


@dataclass(frozen=True)
class Declaration:
    sgd_id: str
    sgd_date: dt.date
    importer_id: str
    declarant_id: str
    country: str
    office_id: str
    tariff_code: str
    quantity: float
    gross_weight: float
    fob_value: float
    cif_value: float
    total_taxes: float


@dataclass(frozen=True)
class InspectionLabel:
    illicit: int
    revenue: float

    def __post_init__(self):
        if self.illicit not in (0, 1):
            raise ValueError(f"illicit must be 0 or 1, got {self.illicit!r}")
        if self.revenue < 0:
            raise ValueError("revenue must be non-negative")
        if self.illicit == 0 and self.revenue != 0:
            raise ValueError("non-illicit items carry no revenue")


@dataclass
class LabeledDeclaration:
    """A declaration with its (possibly still hidden) inspection outcome.

    ``label_visible`` only ever goes from False to True; use :meth:`reveal`.
    """

    declaration: Declaration
    label: InspectionLabel | None
    label_visible: bool = False

    def __setattr__(self, name, value):
        if name == "label_visible" and not value and getattr(self, "label_visible", False):
            raise AttributeError("label_visible cannot be reset once revealed")
        super().__setattr__(name, value)

    def reveal(self) -> InspectionLabel:
        if self.label is None:
            raise ValueError(f"declaration {self.declaration.sgd_id} has no label")
        self.label_visible = True
        return self.label


@dataclass(frozen=True)
class Reject:
    line_number: int
    reason: str


@dataclass
class ParseResult:
    items: list[LabeledDeclaration] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)


@dataclass
class WeeklyBatch:
    week_index: int
    start_date: dt.date
    end_date: dt.date
    items: list[LabeledDeclaration]

    def __len__(self):
        return len(self.items)


def _parse_number(raw: str, name: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"non-numeric {name}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite {name}")
    if value < 0:
        raise ValueError(f"negative {name}")
    return value


def _parse_row(row: Mapping[str, str], schema: Mapping[str, str], has_labels: bool):
    values = {}
    for name in ID_FIELDS:
        raw = (row[schema[name]] or "").strip()
        if not raw:
            raise ValueError(f"missing {name}")
        values[name] = raw
    try:
        values["sgd_date"] = dt.date.fromisoformat(row[schema["sgd_date"]].strip())
    except (AttributeError, ValueError):
        raise ValueError("bad sgd_date") from None
    for name in NUMERIC_FIELDS:
        values[name] = _parse_number(row[schema[name]], name)
    if values["cif_value"] < values["fob_value"]:
        raise ValueError("cif<fob")
    decl = Declaration(**values)

    if not has_labels:
        return LabeledDeclaration(decl, None)
    raw_illicit = (row[schema["illicit"]] or "").strip()
    if raw_illicit not in ("0", "1"):
        raise ValueError("bad illicit flag")
    illicit = int(raw_illicit)
    raw_rev = (row.get(schema["revenue"]) or "").strip() if "revenue" in schema else ""
    if raw_rev == "":
        if illicit:
            raise ValueError("illicit row without revenue")
        revenue = 0.0
    else:
        revenue = _parse_number(raw_rev, "revenue")
        if not illicit and revenue != 0:
            raise ValueError("revenue on non-illicit row")
    return LabeledDeclaration(decl, InspectionLabel(illicit, revenue))


def parse_declarations(
    source: IO[str] | IO[bytes] | str | Path,
    schema: Mapping[str, str] | None = None,
) -> ParseResult:
    """Parse a declaration CSV into labeled declarations plus a rejects report.

    Args:
        source: Path or open text/binary stream with a header row.
        schema: Maps declaration field names to header names. Defaults to
            :data:`DEFAULT_SCHEMA`; label fields are optional.

    Returns:
        ParseResult with items in file order (all hidden) and rejected rows
        with their 1-based physical line number.

    Raises:
        SchemaError: a required column is absent from the header.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return parse_declarations(fh, schema)
    if isinstance(source, io.BufferedIOBase) or "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")

    reader = csv.DictReader(source)
    header = reader.fieldnames or []
    missing = [schema.get(f, f) for f in REQUIRED_FIELDS if schema.get(f) not in header]
    if missing:
        raise SchemaError(f"missing required column(s): {', '.join(missing)}")
    has_labels = schema.get("illicit") in header
    if not has_labels:
        schema.pop("illicit", None)
    if schema.get("revenue") not in header:
        schema.pop("revenue", None)

    result = ParseResult()
    for row in reader:
        line = reader.line_num
        try:
            result.items.append(_parse_row(row, schema, has_labels))
        except ValueError as exc:
            result.rejects.append(Reject(line, str(exc)))
    return result


def _fmt(x: float) -> str:
    return repr(float(x))


def write_declarations(items: Iterable[LabeledDeclaration], sink: IO[str]) -> None:
    """Canonical CSV writer; ``parse_declarations`` inverts it exactly."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(DEFAULT_SCHEMA.values())
    for item in items:
        d = item.declaration
        row = [
            d.sgd_id,
            d.sgd_date.isoformat(),
            d.importer_id,
            d.declarant_id,
            d.country,
            d.office_id,
            d.tariff_code,
            *(_fmt(getattr(d, f)) for f in NUMERIC_FIELDS),
        ]
        if item.label is None:
            row += ["", ""]
        else:
            row += [str(item.label.illicit), _fmt(item.label.revenue)]
        writer.writerow(row)


def write_rejects(rejects: Sequence[Reject], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line_number", "reason"])
        for r in rejects:
            writer.writerow([r.line_number, r.reason])


def slice_weeks(
    items: Sequence[LabeledDeclaration], start: dt.date, num_weeks: int
) -> list[WeeklyBatch]:
    """Partition items into fixed 7-day windows starting at ``start``.

    Items outside ``[start, start + 7 * num_weeks)`` are dropped. Within a
    batch, items are ordered by date, then by their position in ``items``.
    """
    if num_weeks < 1:
        raise ValueError("num_weeks must be >= 1")
    buckets: list[list[tuple[dt.date, int, LabeledDeclaration]]] = [[] for _ in range(num_weeks)]
    for pos, item in enumerate(items):
        offset = (item.declaration.sgd_date - start).days
        if 0 <= offset < 7 * num_weeks:
            buckets[offset // 7].append((item.declaration.sgd_date, pos, item))
    batches = []
    for w, bucket in enumerate(buckets):
        bucket.sort(key=lambda e: (e[0], e[1]))
        first = start + dt.timedelta(days=7 * w)
        batches.append(
            WeeklyBatch(w, first, first + dt.timedelta(days=6), [e[2] for e in bucket])
        )
    return batches


class LabelVault:
    """Hidden ground truth for a stream, with an audit of every read.

    Training-side code reads through :meth:`visible`; only metric code may use
    :meth:`oracle`. A ``visible`` read touching a still-hidden label bumps
    ``violations`` instead of failing, so the simulator can report leaks.
    """

    def __init__(self, illicit, revenue):
        self._illicit = np.asarray(illicit, dtype=np.int8)
        self._revenue = np.asarray(revenue, dtype=float)
        self.revealed = np.zeros(len(self._illicit), dtype=bool)
        self.violations = 0
        self.oracle_reads = 0

    def __len__(self):
        return len(self._illicit)

    def reveal(self, idx) -> None:
        self.revealed[np.asarray(idx, dtype=np.intp)] = True

    def visible(self, idx) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(idx, dtype=np.intp)
        self.violations += int(np.count_nonzero(~self.revealed[idx]))
        return self._illicit[idx].copy(), self._revenue[idx].copy()

    def oracle(self, idx) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(idx, dtype=np.intp)
        self.oracle_reads += len(idx)
        return self._illicit[idx].copy(), self._revenue[idx].copy()


_EPOCH = dt.date(1970, 1, 1)


@dataclass
class DeclarationTable:
    """Columnar view of a declaration stream, ordered by (date, input order)."""

    sgd_id: np.ndarray
    day: np.ndarray  # days since 1970-01-01
    importer_id: np.ndarray
    declarant_id: np.ndarray
    country: np.ndarray
    office_id: np.ndarray
    tariff_code: np.ndarray
    quantity: np.ndarray
    gross_weight: np.ndarray
    fob_value: np.ndarray
    cif_value: np.ndarray
    total_taxes: np.ndarray

    def __len__(self):
        return len(self.day)

    @classmethod
    def from_items(cls, items: Sequence[LabeledDeclaration]) -> tuple["DeclarationTable", LabelVault]:
        """Build the table and its label vault. Every item must carry a label."""
        days = np.array([(it.declaration.sgd_date - _EPOCH).days for it in items], dtype=np.int64)
        order = np.argsort(days, kind="stable")
        items = [items[i] for i in order]
        cols = {}
        for name in ID_FIELDS:
            cols[name] = np.array([getattr(it.declaration, name) for it in items], dtype=object)
        for name in NUMERIC_FIELDS:
            cols[name] = np.array([getattr(it.declaration, name) for it in items], dtype=float)
        if any(it.label is None for it in items):
            raise ValueError("simulation requires labeled declarations")
        vault = LabelVault(
            [it.label.illicit for it in items], [it.label.revenue for it in items]
        )
        vault.reveal([i for i, it in enumerate(items) if it.label_visible])
        return cls(day=days[order], **cols), vault

    def between(self, start: dt.date, end: dt.date) -> np.ndarray:
        """Row indices with ``start <= date < end``."""
        lo = np.searchsorted(self.day, (start - _EPOCH).days, side="left")
        hi = np.searchsorted(self.day, (end - _EPOCH).days, side="left")
        return np.arange(lo, hi)

    def date_of(self, i: int) -> dt.date:
        return _EPOCH + dt.timedelta(days=int(self.day[i]))
