"""Dataset analytics: correlations, pollutant-group means, city rankings and AQI trends.

Every sum goes through ``math.fsum`` so results do not depend on row order.
Outputs are plain Python structures; ``tidy_csv`` and ``to_json`` serialise them.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Sequence

from .config import load_packaged_toml
from .core import POLLUTANTS, CityDayRecord, canonical_column

log = logging.getLogger(__name__)

MIN_PAIRS = 3
GRANULARITIES = ("daily", "monthly", "yearly")


def pollutant_groups() -> dict[str, tuple[str, ...]]:
    table = load_packaged_toml("pollutant_groups.toml")
    groups = {name: tuple(canonical_column(c) for c in cols) for name, cols in table.items()}
    members = [c for cols in groups.values() for c in cols]
    if len(members) != len(set(members)) or set(members) != set(POLLUTANTS):
        raise ValueError("pollutant groups must partition the twelve pollutant columns")
    return groups


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    if len(xs) < MIN_PAIRS:
        return None
    mx, my = _mean(xs), _mean(ys)
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        return None
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class CorrelationMatrix:
    columns: tuple[str, ...]
    values: tuple[tuple[float | None, ...], ...]

    def get(self, a: str, b: str) -> float | None:
        return self.values[self.columns.index(a)][self.columns.index(b)]

    def tidy(self) -> list[dict[str, Any]]:
        return [
            {"column_a": a, "column_b": b, "pearson_r": self.values[i][j]}
            for i, a in enumerate(self.columns)
            for j, b in enumerate(self.columns)
        ]


def correlation_matrix(records: Sequence[CityDayRecord], columns: Sequence[str] = (*POLLUTANTS, "AQI")) -> CorrelationMatrix:
    """Pearson r per column pair over the rows where both values are present.

    A pair with fewer than three such rows, or with a constant side, is ``None``.
    """
    cols = tuple(canonical_column(c) for c in columns)
    data = {c: [r.get(c) for r in records] for c in cols}
    grid: list[list[float | None]] = [[None] * len(cols) for _ in cols]
    for i, a in enumerate(cols):
        for j in range(i, len(cols)):
            b = cols[j]
            pairs = [(x, y) for x, y in zip(data[a], data[b]) if x is not None and y is not None]
            r = pearson([p[0] for p in pairs], [p[1] for p in pairs]) if pairs else None
            if i == j and r is not None:
                r = 1.0
            grid[i][j] = grid[j][i] = r
    return CorrelationMatrix(cols, tuple(tuple(row) for row in grid))


@dataclass(frozen=True)
class CityMean:
    city: str
    pollutant: str
    mean: float
    n: int


def _resolve_group(group: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(group, str):
        groups = pollutant_groups()
        if group not in groups:
            raise ValueError(f"unknown pollutant group {group!r}; expected one of {sorted(groups)}")
        return groups[group]
    return tuple(canonical_column(c) for c in group)


def group_pollution_by_city(records: Sequence[CityDayRecord], group: str | Sequence[str],
                            cities: Iterable[str] | None = None) -> list[CityMean]:
    """Mean of the non-missing daily values per (city, pollutant), sorted by city then pollutant."""
    members = _resolve_group(group)
    wanted = set(cities) if cities else None
    buckets: dict[tuple[str, str], list[float]] = defaultdict(list)
    seen = set()
    for r in records:
        if wanted is not None and r.city not in wanted:
            continue
        seen.add(r.city)
        for p in members:
            v = r.get(p)
            if v is not None:
                buckets[(r.city, p)].append(v)
    if wanted is not None and wanted - seen:
        log.warning("no records for city filter(s): %s", ", ".join(sorted(wanted - seen)))
    return [CityMean(city, p, _mean(vals), len(vals)) for (city, p), vals in sorted(buckets.items())]


def city_scores(records: Sequence[CityDayRecord], group: str | Sequence[str]) -> list[tuple[str, float]]:
    """Cities by the mean z-score of their per-pollutant means (z taken across cities), highest first."""
    means = group_pollution_by_city(records, group)
    by_pollutant: dict[str, dict[str, float]] = defaultdict(dict)
    for m in means:
        by_pollutant[m.pollutant][m.city] = m.mean
    z: dict[str, list[float]] = defaultdict(list)
    for per_city in by_pollutant.values():
        vals = list(per_city.values())
        mu = _mean(vals)
        sd = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / len(vals))
        for city, v in per_city.items():
            z[city].append((v - mu) / sd if sd > 0 else 0.0)
    scores = [(city, _mean(zs)) for city, zs in z.items()]
    return sorted(scores, key=lambda cs: (-cs[1], cs[0]))


def city_rankings(records: Sequence[CityDayRecord], group: str | Sequence[str], n: int = 9) -> list[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [city for city, _ in city_scores(records, group)[:n]]


def _period(day, granularity: str) -> str:
    if granularity == "daily":
        return day.isoformat()
    if granularity == "monthly":
        return f"{day.year:04d}-{day.month:02d}"
    if granularity == "yearly":
        return f"{day.year:04d}"
    raise ValueError(f"granularity must be one of {GRANULARITIES}")


def aqi_trend(records: Sequence[CityDayRecord], city: str, granularity: str = "yearly") -> list[tuple[str, float]]:
    """Mean AQI per period for one city, oldest period first."""
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}")
    rows = [r for r in records if r.city == city]
    if not rows:
        raise KeyError(f"unknown city {city!r}")
    periods: dict[str, list[float]] = defaultdict(list)
    for r in rows:
        if r.aqi is not None:
            periods[_period(r.date, granularity)].append(r.aqi)
    return [(p, _mean(v)) for p, v in sorted(periods.items())]


@dataclass(frozen=True)
class Extremes:
    max_city: str
    max_period: str
    max_aqi: float
    min_city: str
    min_aqi: float


def extremes(records: Sequence[CityDayRecord], max_by: str = "yearly-mean") -> Extremes:
    """Highest city-year (by yearly mean AQI, or single worst day) and lowest overall-mean city.

    Ties on the value go to the alphabetically first city (then earliest period).
    """
    per_city_year: dict[tuple[str, str], list[float]] = defaultdict(list)
    per_city: dict[str, list[float]] = defaultdict(list)
    days: list[tuple[float, str, str]] = []
    for r in records:
        if r.aqi is None:
            continue
        per_city_year[(r.city, f"{r.date.year:04d}")].append(r.aqi)
        per_city[r.city].append(r.aqi)
        days.append((r.aqi, r.city, r.date.isoformat()))
    if not per_city:
        raise ValueError("no records with an AQI value")
    if max_by == "yearly-mean":
        candidates = [(_mean(v), city, year) for (city, year), v in per_city_year.items()]
    elif max_by == "worst-day":
        candidates = days
    else:
        raise ValueError("max_by must be 'yearly-mean' or 'worst-day'")
    max_aqi, max_city, max_period = min(candidates, key=lambda c: (-c[0], c[1], c[2]))
    min_aqi, min_city = min((_mean(v), c) for c, v in per_city.items())
    return Extremes(max_city, max_period, max_aqi, min_city, min_aqi)


def tidy_csv(rows: Sequence[dict[str, Any]]) -> bytes:
    if not rows:
        return b""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue().encode("utf-8")


def to_json(rows: Sequence[dict[str, Any]]) -> str:
    return json.dumps(list(rows), indent=2) + "\n"


def rows_of(items: Iterable[Any]) -> list[dict[str, Any]]:
    return [asdict(i) for i in items]
