"""CPCB (India) Air Quality Index: per-pollutant sub-indices, overall AQI and bucket.

Breakpoints live in ``data/cpcb_breakpoints.csv``. Bands are written contiguously
(each segment starts where the previous one ends) so the sub-index is a
continuous piecewise-linear function; above the last segment it stays at 500.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from typing import IO, Mapping, Sequence

from .core import AqiBucket, CityDayRecord, canonical_column

SEVERE_CAP = 500.0
PM_POLLUTANTS = ("PM2.5", "PM10")
MIN_SUB_INDICES = 3

# Upper edge of each bucket band (inclusive, after rounding); Severe is open-ended.
BUCKET_BANDS: tuple[tuple[int, AqiBucket], ...] = (
    (50, AqiBucket.GOOD),
    (100, AqiBucket.SATISFACTORY),
    (200, AqiBucket.MODERATE),
    (300, AqiBucket.POOR),
    (400, AqiBucket.VERY_POOR),
)


class NoSubIndexError(KeyError):
    def __init__(self, pollutant: str):
        super().__init__(f"no sub-index defined for {pollutant}")
        self.pollutant = pollutant


@dataclass(frozen=True)
class Segment:
    conc_low: float
    conc_high: float
    index_low: float
    index_high: float

    def interpolate(self, c: float) -> float:
        span = self.conc_high - self.conc_low
        return self.index_low + (self.index_high - self.index_low) * (c - self.conc_low) / span


class BreakpointTable:
    def __init__(self, segments: Mapping[str, Sequence[Segment]]):
        self.segments = {p: tuple(s) for p, s in segments.items()}
        for pollutant, segs in self.segments.items():
            _validate(pollutant, segs)

    @classmethod
    def from_csv(cls, stream: IO[str]) -> "BreakpointTable":
        table: dict[str, list[Segment]] = {}
        for row in csv.DictReader(stream):
            seg = Segment(*(float(row[k]) for k in ("conc_low", "conc_high", "index_low", "index_high")))
            table.setdefault(canonical_column(row["pollutant"]), []).append(seg)
        return cls(table)

    @classmethod
    def cpcb(cls) -> "BreakpointTable":
        text = resources.files("aeropipe").joinpath("data", "cpcb_breakpoints.csv").read_text("utf-8")
        return cls.from_csv(io.StringIO(text))

    @property
    def pollutants(self) -> tuple[str, ...]:
        return tuple(self.segments)

    def sub_index(self, pollutant: str, concentration: float) -> float:
        try:
            segs = self.segments[canonical_column(pollutant)]
        except KeyError:
            raise NoSubIndexError(pollutant) from None
        if concentration < 0 or math.isnan(concentration):
            raise ValueError(f"{pollutant}: concentration must be >= 0, got {concentration}")
        for seg in segs:
            if seg.conc_low <= concentration <= seg.conc_high:
                return seg.interpolate(concentration)
        return segs[-1].index_high

    def overall(self, record: CityDayRecord) -> tuple[float, str] | None:
        """(AQI, dominant pollutant), or ``None`` when the record has too few pollutants.

        Needs at least three sub-indexed pollutants, one of them PM2.5 or PM10.
        Ties for the maximum go to the pollutant listed first in the table.
        """
        subs = {}
        for pollutant in self.segments:
            value = record.get(pollutant)
            if value is not None:
                subs[pollutant] = self.sub_index(pollutant, value)
        if len(subs) < MIN_SUB_INDICES or not any(p in subs for p in PM_POLLUTANTS):
            return None
        dominant = max(subs, key=lambda p: (subs[p], -list(self.segments).index(p)))
        return subs[dominant], dominant


def _validate(pollutant: str, segs: Sequence[Segment]) -> None:
    if not segs:
        raise ValueError(f"{pollutant}: no segments")
    if segs[0].conc_low != 0:
        raise ValueError(f"{pollutant}: first segment must start at 0")
    for seg in segs:
        if not (seg.conc_high > seg.conc_low and seg.index_high >= seg.index_low):
            raise ValueError(f"{pollutant}: segment {seg} is not increasing")
    for a, b in zip(segs, segs[1:]):
        if b.conc_low != a.conc_high or b.index_low != a.index_high:
            raise ValueError(f"{pollutant}: segments {a} and {b} are not contiguous")


_DEFAULT: BreakpointTable | None = None


def default_table() -> BreakpointTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = BreakpointTable.cpcb()
    return _DEFAULT


def sub_index(pollutant: str, concentration: float, table: BreakpointTable | None = None) -> float:
    return (table or default_table()).sub_index(pollutant, concentration)


def overall_aqi(record: CityDayRecord, table: BreakpointTable | None = None) -> tuple[float, str] | None:
    return (table or default_table()).overall(record)


def bucket(aqi: float) -> AqiBucket:
    if aqi < 0 or math.isnan(aqi):
        raise ValueError(f"AQI must be >= 0, got {aqi}")
    rounded = math.floor(aqi + 0.5)
    for upper, name in BUCKET_BANDS:
        if rounded <= upper:
            return name
    return AqiBucket.SEVERE
