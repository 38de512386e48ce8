"""Case-count ingestion and binning into generation time steps.

Raw data arrive as dated counts, usually cumulative. They are differenced into
pseudo-incidence (keeping negative reporting corrections) and then summed into
bins of one generation interval, which is the time step of every model in
this package.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import IO

import numpy as np

from .errors import ParseError, ValidationError


class SeriesKind(str, enum.Enum):
    CUMULATIVE = "cumulative"
    INCIDENT = "incident"
    # differenced cumulative data; may hold negative corrections
    PSEUDO_INCIDENT = "pseudo_incident"


@dataclass(frozen=True)
class CsvSchema:
    date_column: str = "date"
    count_column: str = "count"


@dataclass(frozen=True)
class RawSeries:
    """Dated counts, strictly increasing in date."""

    dates: tuple[date, ...]
    counts: tuple[float, ...]
    kind: SeriesKind

    def __post_init__(self):
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "counts", tuple(float(c) for c in self.counts))
        if len(self.dates) != len(self.counts):
            raise ValidationError("dates and counts differ in length")
        if not self.dates:
            raise ValidationError("series is empty")
        for k in range(1, len(self.dates)):
            if self.dates[k] <= self.dates[k - 1]:
                raise ValidationError(f"dates not strictly increasing at position {k}")
        for c in self.counts:
            if not math.isfinite(c):
                raise ValidationError("counts must be finite")
        if self.kind is SeriesKind.INCIDENT and any(c < 0 for c in self.counts):
            raise ValidationError("incident counts must be non-negative")

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def negative_flags(self) -> tuple[bool, ...]:
        """Per-record flag marking negative counts (downward corrections)."""
        return tuple(c < 0 for c in self.counts)


@dataclass(frozen=True)
class GenerationSeries:
    """Incidence per generation; element ``k`` has generation index ``i0_generation + k``."""

    values: np.ndarray
    generation_interval_days: float
    i0_generation: int = 0
    origin: date | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValidationError("a generation series needs at least one value")
        if not np.all(np.isfinite(values)):
            raise ValidationError("generation values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        g = float(self.generation_interval_days)
        if not g > 0:
            raise ValidationError("generation_interval_days must be positive")
        object.__setattr__(self, "generation_interval_days", g)
        object.__setattr__(self, "i0_generation", int(self.i0_generation))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, GenerationSeries):
            return NotImplemented
        return (self.i0_generation == other.i0_generation
                and self.generation_interval_days == other.generation_interval_days
                and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def generations(self) -> np.ndarray:
        return np.arange(self.i0_generation, self.i0_generation + self.values.size)

    @property
    def model_times(self) -> np.ndarray:
        """Model time of each element; the first element is generation t = 1."""
        return np.arange(1, self.values.size + 1)

    def generation_start(self, generation: int) -> date | None:
        """Calendar date at which ``generation`` begins, if an origin is known."""
        if self.origin is None:
            return None
        return self.origin + timedelta(days=generation * self.generation_interval_days)

    def head(self, n: int) -> GenerationSeries:
        return GenerationSeries(self.values[:n], self.generation_interval_days,
                                self.i0_generation, self.origin)

    def to_dict(self) -> dict:
        return {
            "i0_generation": self.i0_generation,
            "generation_interval_days": self.generation_interval_days,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> GenerationSeries:
        extra = set(data) - {"i0_generation", "generation_interval_days", "values"}
        if extra:
            raise ValidationError(f"unknown keys: {sorted(extra)}")
        try:
            return cls(data["values"], data["generation_interval_days"],
                       data.get("i0_generation", 0))
        except KeyError as exc:
            raise ValidationError(f"missing key {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["generation", "incidence"])
        for g, v in zip(self.generations, self.values):
            writer.writerow([int(g), format_float(v)])
        return buf.getvalue()


def format_float(x: float | None) -> str:
    """Fixed 12-significant-digit rendering used by every CSV writer."""
    if x is None:
        return ""
    return f"{float(x):.12g}"


def _read_rows(source: IO[bytes] | IO[str] | bytes | str) -> csv.DictReader:
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8-sig") if isinstance(raw, (bytes, bytearray)) else raw
    return csv.DictReader(io.StringIO(text))


def ingest_csv(source, schema: CsvSchema = CsvSchema(),
               kind: SeriesKind | str = SeriesKind.CUMULATIVE) -> RawSeries:
    """Parse dated counts from CSV text with a header row.

    Rows are sorted by date. Row numbers in errors count data rows from 1,
    excluding the header.
    """
    kind = SeriesKind(kind)
    reader = _read_rows(source)
    if reader.fieldnames is None:
        raise ValidationError("input is empty")
    for col in (schema.date_column, schema.count_column):
        if col not in reader.fieldnames:
            raise ParseError(f"missing column {col!r} in header {reader.fieldnames}")

    records: list[tuple[date, float]] = []
    seen: dict[date, int] = {}
    for row_no, row in enumerate(reader, start=1):
        raw_date = (row.get(schema.date_column) or "").strip()
        raw_count = (row.get(schema.count_column) or "").strip()
        try:
            day = date.fromisoformat(raw_date)
        except ValueError:
            raise ParseError(f"invalid date {raw_date!r}", row_no) from None
        try:
            count = float(raw_count)
        except ValueError:
            raise ParseError(f"invalid count {raw_count!r}", row_no) from None
        if not math.isfinite(count):
            raise ParseError(f"non-finite count {raw_count!r}", row_no)
        if kind is SeriesKind.INCIDENT and count < 0:
            raise ValidationError(f"row {row_no}: negative incident count {count}")
        if day in seen:
            raise ValidationError(f"row {row_no}: duplicate date {day} (first seen in row {seen[day]})")
        seen[day] = row_no
        records.append((day, count))

    if not records:
        raise ValidationError("input has no data rows")
    records.sort(key=lambda r: r[0])
    return RawSeries(tuple(r[0] for r in records), tuple(r[1] for r in records), kind)


def cumulative_to_pseudo_incidence(series: RawSeries) -> RawSeries:
    """Difference a cumulative series; each difference is dated at the later record.

    Negative differences are kept; see ``RawSeries.negative_flags``.
    """
    if series.kind is not SeriesKind.CUMULATIVE:
        raise ValidationError(f"expected a cumulative series, got {series.kind.value}")
    if len(series) < 2:
        raise ValidationError("need at least two cumulative records to difference")
    diffs = tuple(b - a for a, b in zip(series.counts[:-1], series.counts[1:]))
    return RawSeries(series.dates[1:], diffs, SeriesKind.PSEUDO_INCIDENT)


def aggregate_to_generations(series: RawSeries, generation_interval_days: float,
                             origin: date | None = None) -> GenerationSeries:
    """Sum counts into half-open bins ``[origin + k*g, origin + (k+1)*g)``.

    ``origin`` defaults to the first date. The output starts at the first
    occupied bin; empty bins between observations are zero.
    """
    if series.kind is SeriesKind.CUMULATIVE:
        raise ValidationError("difference cumulative data before binning")
    g = float(generation_interval_days)
    if not g > 0:
        raise ValidationError("generation_interval_days must be positive")
    if origin is None:
        origin = series.dates[0]
    if series.dates[0] < origin:
        raise ValidationError(f"observation on {series.dates[0]} precedes origin {origin}")

    bins = [math.floor((d - origin).days / g) for d in series.dates]
    first = bins[0]
    values = np.zeros(bins[-1] - first + 1)
    for b, c in zip(bins, series.counts):
        values[b - first] += c
    return GenerationSeries(values, g, first, origin)


def read_generation_csv(source, generation_interval_days: float,
                        origin: date | None = None) -> GenerationSeries:
    """Read the ``generation,incidence`` CSV written by ``GenerationSeries.to_csv``."""
    reader = _read_rows(source)
    if reader.fieldnames is None:
        raise ValidationError("input is empty")
    for col in ("generation", "incidence"):
        if col not in reader.fieldnames:
            raise ParseError(f"missing column {col!r} in header {reader.fieldnames}")
    gens: list[int] = []
    vals: list[float] = []
    for row_no, row in enumerate(reader, start=1):
        try:
            gens.append(int(row["generation"]))
        except (TypeError, ValueError):
            raise ParseError(f"invalid generation {row['generation']!r}", row_no) from None
        try:
            v = float(row["incidence"])
        except (TypeError, ValueError):
            raise ParseError(f"invalid incidence {row['incidence']!r}", row_no) from None
        if not math.isfinite(v):
            raise ParseError("non-finite incidence", row_no)
        vals.append(v)
    if not gens:
        raise ValidationError("input has no data rows")
    order = np.argsort(gens, kind="stable")
    gens_sorted = [gens[i] for i in order]
    if any(b - a != 1 for a, b in zip(gens_sorted[:-1], gens_sorted[1:])):
        raise ValidationError("generation indices must be contiguous and unique")
    return GenerationSeries([vals[i] for i in order], generation_interval_days,
                            gens_sorted[0], origin)

