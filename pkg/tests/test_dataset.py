"""Checks that only make sense on the public city-day export; skipped when it is absent."""

import logging

import pytest

from aeropipe.aqi import bucket
from aeropipe.insights import group_pollution_by_city
from aeropipe.ml import ExperimentSpec, run_experiment

pytestmark = pytest.mark.dataset
log = logging.getLogger(__name__)


def test_recomputed_buckets_agree(city_day):
    rows = [r for r in city_day if r.aqi is not None and r.aqi_bucket is not None]
    mismatches = [r for r in rows if bucket(r.aqi) is not r.aqi_bucket]
    for r in mismatches[:20]:
        log.warning("bucket mismatch %s %s: AQI %s labelled %s", r.city, r.date, r.aqi, r.aqi_bucket)
    assert rows and 1 - len(mismatches) / len(rows) >= 0.99


def test_forest_best_regressor_without_smote(city_day):
    reports = run_experiment(city_day, ExperimentSpec(task="regression", smote=(False,)))
    assert reports[0].model == "RandomForest"


def test_vehicular_order_delhi_mumbai(city_day):
    means = group_pollution_by_city(city_day, "vehicular", ["Delhi", "Mumbai"])
    pooled = {}
    for m in means:
        pooled.setdefault(m.pollutant, []).append(m.mean)
    order = sorted(pooled, key=lambda p: -sum(pooled[p]) / len(pooled[p]))
    assert order[:2] == ["PM10", "PM2.5"]
