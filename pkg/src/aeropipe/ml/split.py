from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.2
    shuffle_seed: int = 42

    def __post_init__(self) -> None:
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")


def fisher_yates(n: int, seed: int) -> list[int]:
    """Permutation of ``range(n)``: for i = n-1 .. 1 swap i with j ~ U{0..i} drawn from PCG64(seed)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def test_size(n: int, fraction: float) -> int:
    # round half up, and keep both sides non-empty
    return min(max(math.floor(fraction * n + 0.5), 1), n - 1)


def split_indices(n: int, config: SplitConfig) -> tuple[list[int], list[int]]:
    if n < 2:
        raise ValueError(f"need at least 2 rows to split, got {n}")
    order = fisher_yates(n, config.shuffle_seed)
    k = test_size(n, config.test_fraction)
    return order[k:], order[:k]


def split(records: Sequence[T], config: SplitConfig = SplitConfig()) -> tuple[list[T], list[T]]:
    """Seeded shuffle, then the first ``round(fraction * n)`` shuffled rows form the test set."""
    train_idx, test_idx = split_indices(len(records), config)
    return [records[i] for i in train_idx], [records[i] for i in test_idx]


class Standardizer:
    """Per-column z-scoring fitted on training rows only; constant columns get unit scale."""

    def fit(self, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        return self

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean_) / self.scale_

    def fit_transform(self, X) -> np.ndarray:
        return self.fit(X).transform(X)
