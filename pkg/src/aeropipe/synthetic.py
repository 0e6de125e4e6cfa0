"""Seeded generator for the bundled city-day fixture (same schema as the CPCB export)."""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .aqi import bucket, overall_aqi
from .config import packaged_path
from .core import POLLUTANT_COLUMNS, CityDayRecord, parse_city_day_csv

FIXTURE_NAME = "city_day_synthetic.csv"
FIXTURE_SEED = 2015
FIXTURE_ROWS = 200

CITY_LEVELS = {
    "Ahmedabad": 1.8,
    "Bengaluru": 0.7,
    "Chennai": 0.8,
    "Delhi": 2.0,
    "Hyderabad": 1.0,
    "Kolkata": 1.3,
    "Lucknow": 1.6,
    "Mumbai": 0.9,
    "Patna": 1.7,
    "Shillong": 0.3,
}

# Typical daily concentration per pollutant (CO in mg/m3, the rest in ug/m3).
BASE_LEVEL = {
    "PM2.5": 55.0, "PM10": 110.0, "NO": 15.0, "NO2": 28.0, "NOx": 30.0, "NH3": 22.0,
    "CO": 1.2, "SO2": 13.0, "O3": 34.0, "Benzene": 3.0, "Toluene": 8.0, "Xylene": 3.0,
}
MISSING_RATE = {"Xylene": 0.35, "NH3": 0.1, "Benzene": 0.08, "Toluene": 0.08}


def generate(n: int = FIXTURE_ROWS, seed: int = FIXTURE_SEED) -> list[CityDayRecord]:
    rng = np.random.default_rng(seed)
    cities = sorted(CITY_LEVELS)
    start = date(2015, 1, 1)
    records = []
    for i in range(n):
        city = cities[i % len(cities)]
        day = start + timedelta(days=int(rng.integers(0, 6 * 365)))
        level = CITY_LEVELS[city]
        values = {}
        for column, attr in POLLUTANT_COLUMNS.items():
            if rng.random() < MISSING_RATE.get(column, 0.03):
                values[attr] = None
                continue
            raw = BASE_LEVEL[column] * level * rng.lognormal(0.0, 0.45)
            values[attr] = round(float(raw), 2)
        rec = CityDayRecord(city=city, date=day, **values)
        result = overall_aqi(rec)
        if result is not None and rng.random() > 0.05:
            aqi = float(round(result[0]))
            rec = rec.with_values(aqi=aqi, aqi_bucket=bucket(aqi))
        records.append(rec)
    return sorted(records, key=lambda r: (r.city, r.date))


def load_fixture() -> list[CityDayRecord]:
    with open(packaged_path(FIXTURE_NAME), "rb") as fh:
        return parse_city_day_csv(fh)
