"""Domain types shared by every module, plus the city-day CSV schema."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from datetime import date, datetime
from enum import Enum
from typing import IO, Iterable, Sequence


class GasKind(Enum):
    MQ135_AIR = "mq135"
    MQ3_ALCOHOL = "mq3"

    @property
    def channel(self) -> int:
        return 0 if self is GasKind.MQ135_AIR else 1

    @classmethod
    def for_channel(cls, channel: int) -> "GasKind":
        if channel == 0:
            return cls.MQ135_AIR
        if channel == 1:
            return cls.MQ3_ALCOHOL
        raise ValueError(f"mux channel must be 0 or 1, got {channel!r}")


class AqiBucket(Enum):
    GOOD = "Good"
    SATISFACTORY = "Satisfactory"
    MODERATE = "Moderate"
    POOR = "Poor"
    VERY_POOR = "Very Poor"
    SEVERE = "Severe"

    @property
    def rank(self) -> int:
        return _BUCKET_ORDER.index(self)

    @classmethod
    def parse(cls, text: str) -> "AqiBucket":
        key = " ".join(text.strip().lower().replace("_", " ").split())
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown AQI bucket {text!r}")

    def __str__(self) -> str:
        return self.value


_BUCKET_ORDER = list(AqiBucket)


@dataclass(frozen=True)
class SensorSample:
    device_id: str
    channel: int
    raw_counts: float
    ppm: float
    taken_at: datetime

    def __post_init__(self) -> None:
        if self.channel not in (0, 1):
            raise ValueError(f"channel must be 0 or 1, got {self.channel}")
        if not 0 <= self.raw_counts <= 1023:
            raise ValueError(f"raw_counts out of ADC range: {self.raw_counts}")
        if self.ppm < 0:
            raise ValueError(f"ppm must be non-negative, got {self.ppm}")


@dataclass(frozen=True)
class ChannelEntry:
    entry_id: int
    created_at: datetime
    field1: float | None = None
    field2: float | None = None

    def __post_init__(self) -> None:
        if self.entry_id < 1:
            raise ValueError("entry_id must be positive")
        for name in ("field1", "field2"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")


# Column header -> attribute name. Order is the on-disk order used when writing.
POLLUTANT_COLUMNS: dict[str, str] = {
    "PM2.5": "pm2_5",
    "PM10": "pm10",
    "NO": "no",
    "NO2": "no2",
    "NOx": "nox",
    "NH3": "nh3",
    "CO": "co",
    "SO2": "so2",
    "O3": "o3",
    "Benzene": "benzene",
    "Toluene": "toluene",
    "Xylene": "xylene",
}
POLLUTANTS: tuple[str, ...] = tuple(POLLUTANT_COLUMNS)
REQUIRED_HEADER: tuple[str, ...] = ("City", "Date", *POLLUTANTS, "AQI")
OPTIONAL_HEADER: tuple[str, ...] = ("AQI_Bucket",)
CSV_HEADER: tuple[str, ...] = REQUIRED_HEADER + OPTIONAL_HEADER

COLUMN_ATTRS: dict[str, str] = {
    "City": "city",
    "Date": "date",
    **POLLUTANT_COLUMNS,
    "AQI": "aqi",
    "AQI_Bucket": "aqi_bucket",
}


@dataclass(frozen=True)
class CityDayRecord:
    city: str
    date: date
    pm2_5: float | None = None
    pm10: float | None = None
    no: float | None = None
    no2: float | None = None
    nox: float | None = None
    nh3: float | None = None
    co: float | None = None
    so2: float | None = None
    o3: float | None = None
    benzene: float | None = None
    toluene: float | None = None
    xylene: float | None = None
    aqi: float | None = None
    aqi_bucket: AqiBucket | None = None

    def __post_init__(self) -> None:
        for column, attr in POLLUTANT_COLUMNS.items():
            value = getattr(self, attr)
            if value is not None and value < 0:
                raise ValueError(f"negative concentration for {column}: {value}")
        if self.aqi is not None and self.aqi < 0:
            raise ValueError(f"negative AQI: {self.aqi}")

    def get(self, column: str):
        """Value of a dataset column by its header name (``"PM2.5"``, ``"AQI"`` ...)."""
        return getattr(self, COLUMN_ATTRS[canonical_column(column)])

    def pollutants(self) -> dict[str, float]:
        """Present pollutant concentrations keyed by column name."""
        out = {}
        for column, attr in POLLUTANT_COLUMNS.items():
            value = getattr(self, attr)
            if value is not None:
                out[column] = value
        return out

    def with_values(self, **changes) -> "CityDayRecord":
        return replace(self, **changes)


class DatasetError(ValueError):
    """A city-day CSV that does not fit the schema."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


_CANONICAL = {name.strip().lower(): name for name in CSV_HEADER}


def canonical_column(name: str) -> str:
    try:
        return _CANONICAL[name.strip().lower()]
    except KeyError:
        raise KeyError(f"not a city-day column: {name!r}") from None


def _parse_float(cell: str, row: int, column: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"not a number: {cell!r}", row, column) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise DatasetError(f"not a finite number: {cell!r}", row, column)
    if value < 0:
        raise DatasetError(f"negative value {value}", row, column)
    return value


def parse_city_day_csv(stream: IO[bytes] | IO[str] | bytes | str) -> list[CityDayRecord]:
    """Parse a city-day CSV into records.

    Header names are matched case-insensitively after trimming and may appear in
    any order. Empty cells become ``None``; zero stays zero. Row numbers in
    errors count the header as row 1.
    """
    if isinstance(stream, bytes):
        text: IO[str] = io.StringIO(stream.decode("utf-8-sig"))
    elif isinstance(stream, str):
        text = io.StringIO(stream)
    else:
        raw = stream.read()
        text = io.StringIO(raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw)

    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty file, no header row") from None

    positions: dict[str, int] = {}
    for idx, name in enumerate(header):
        key = name.strip().lower()
        if key in _CANONICAL:
            positions[_CANONICAL[key]] = idx
    missing = [c for c in REQUIRED_HEADER if c not in positions]
    if missing:
        raise DatasetError(f"missing required column(s): {', '.join(missing)}")

    records = []
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue

        def cell(column: str) -> str:
            idx = positions.get(column)
            if idx is None or idx >= len(row):
                return ""
            return row[idx]

        city = cell("City").strip()
        if not city:
            raise DatasetError("empty city", rownum, "City")
        date_text = cell("Date").strip()
        try:
            day = date.fromisoformat(date_text[:10])
        except ValueError:
            raise DatasetError(f"unparseable date {date_text!r}", rownum, "Date") from None

        values = {
            attr: _parse_float(cell(column), rownum, column)
            for column, attr in POLLUTANT_COLUMNS.items()
        }
        aqi = _parse_float(cell("AQI"), rownum, "AQI")
        bucket_text = cell("AQI_Bucket").strip()
        try:
            bucket = AqiBucket.parse(bucket_text) if bucket_text else None
        except ValueError as exc:
            raise DatasetError(str(exc), rownum, "AQI_Bucket") from None
        records.append(CityDayRecord(city=city, date=day, aqi=aqi, aqi_bucket=bucket, **values))
    return records


def _format_float(value: float | None) -> str:
    if value is None:
        return ""
    return repr(float(value))


def serialize_city_day_csv(records: Iterable[CityDayRecord]) -> bytes:
    """Write records with the canonical 16-column header (AQI_Bucket last)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(
            [rec.city, rec.date.isoformat()]
            + [_format_float(getattr(rec, attr)) for attr in POLLUTANT_COLUMNS.values()]
            + [_format_float(rec.aqi), rec.aqi_bucket.value if rec.aqi_bucket else ""]
        )
    return buf.getvalue().encode("utf-8")


def drop_incomplete(
    records: Sequence[CityDayRecord], required_columns: Iterable[str]
) -> list[CityDayRecord]:
    """Keep only the records where every required column has a value."""
    attrs = [COLUMN_ATTRS[canonical_column(c)] for c in required_columns]
    return [r for r in records if all(getattr(r, a) is not None for a in attrs)]


# Default completeness requirement before modelling: all pollutants plus the target.
MODEL_COLUMNS_REGRESSION: tuple[str, ...] = (*POLLUTANTS, "AQI")
MODEL_COLUMNS_CLASSIFICATION: tuple[str, ...] = (*POLLUTANTS, "AQI_Bucket")
