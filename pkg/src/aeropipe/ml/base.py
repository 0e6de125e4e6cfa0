from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np


class ModelKind(Enum):
    LINEAR_REGRESSION = "LinearRegression"
    LOGISTIC_REGRESSION = "LogisticRegression"
    DECISION_TREE_REG = "DecisionTreeReg"
    DECISION_TREE_CLF = "DecisionTreeClf"
    RANDOM_FOREST_REG = "RandomForestReg"
    RANDOM_FOREST_CLF = "RandomForestClf"
    KNN = "Knn"
    GAUSSIAN_NB = "GaussianNB"


@dataclass(frozen=True)
class Matrix:
    """Real-valued rows with named columns."""

    values: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValueError("values must be 2-D with one column per name")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("column names must be unique")
        if not np.isfinite(values).all():
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class TrainedModel:
    kind: ModelKind
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def predict(self, X) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


def as_2d(X) -> np.ndarray:
    if isinstance(X, Matrix):
        return X.values
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def encode_labels(y: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Sorted class labels and the integer code of each sample (lowest label -> 0)."""
    classes, codes = np.unique(np.asarray(y), return_inverse=True)
    return classes, codes.astype(np.intp)
