import os
from pathlib import Path

import pytest

from aeropipe.core import parse_city_day_csv
from aeropipe.synthetic import load_fixture

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
DATASET_ENV = "AEROPIPE_CITY_DAY"


@pytest.fixture(scope="session")
def synthetic_records():
    return load_fixture()


def real_dataset_path() -> Path | None:
    candidates = [os.environ.get(DATASET_ENV), Path(__file__).parent / "data" / "city_day.csv",
                  Path.cwd() / "city_day.csv"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def city_day():
    path = real_dataset_path()
    if path is None:
        pytest.skip(f"public city_day.csv not available (set {DATASET_ENV} or place it in tests/data/)")
    with open(path, "rb") as fh:
        return parse_city_day_csv(fh)
