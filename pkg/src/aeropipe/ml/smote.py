"""SMOTE oversampling, plus a bucket-binned variant for a continuous AQI target."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..aqi import bucket
from .base import as_2d


@dataclass(frozen=True)
class SmoteResult:
    X: np.ndarray
    y: np.ndarray
    n_original: int
    parents: np.ndarray  # (n_synthetic, 2) row indices into the original set
    lambdas: np.ndarray  # interpolation weight per synthetic row

    @property
    def synthetic(self) -> slice:
        return slice(self.n_original, None)


def class_neighbors(X: np.ndarray, k: int, chunk: int = 64) -> np.ndarray:
    """k nearest other rows of ``X`` for every row (self excluded, ties -> lower index)."""
    n = X.shape[0]
    out = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, chunk):
        q = X[start:start + chunk]
        d2 = ((q[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        rows = np.arange(q.shape[0])
        d2[rows, start + rows] = np.inf
        out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def _plan(X: np.ndarray, labels: np.ndarray, k: int, target: Mapping | None,
          rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    classes, counts = np.unique(labels, return_counts=True)
    goal = dict(target) if target is not None else {c: counts.max() for c in classes}
    bases, nbrs, lams = [], [], []
    for cls, n_c in zip(classes, counts):
        need = int(goal.get(cls, n_c)) - int(n_c)
        if need <= 0:
            continue
        if n_c < 2:
            raise ValueError(f"class {cls!r} has a single sample; SMOTE needs a neighbour")
        members = np.flatnonzero(labels == cls)
        k_eff = min(k, n_c - 1)
        table = class_neighbors(X[members], k_eff)
        base = rng.integers(0, n_c, size=need)
        pick = rng.integers(0, k_eff, size=need)
        lam = rng.random(size=need)
        bases.append(members[base])
        nbrs.append(members[table[base, pick]])
        lams.append(lam)
    if not bases:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty, np.empty(0)
    return np.concatenate(bases), np.concatenate(nbrs), np.concatenate(lams)


def smote(X, y, k: int = 5, target: Mapping | None = None, seed: int = 42) -> SmoteResult:
    """Raise each class to ``target[class]`` rows (default: the majority count).

    Every synthetic row is ``x_i + lam * (x_j - x_i)`` with ``x_j`` one of the ``k``
    nearest same-class neighbours of ``x_i`` and ``lam ~ U[0, 1)``. Originals come
    first and unchanged.
    """
    X = as_2d(X)
    y = np.asarray(y)
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    base, nb, lam = _plan(X, y, k, target, rng)
    synth = X[base] + lam[:, None] * (X[nb] - X[base])
    return SmoteResult(
        X=np.vstack([X, synth]),
        y=np.concatenate([y, y[base]]),
        n_original=X.shape[0],
        parents=np.column_stack([base, nb]),
        lambdas=lam,
    )


def aqi_bins(y) -> np.ndarray:
    return np.array([bucket(float(v)).rank for v in np.asarray(y, dtype=float)], dtype=np.intp)


def smote_for_regression(X, y, k: int = 5, seed: int = 42) -> SmoteResult:
    """SMOTE on AQI-bucket bins of a continuous target; the target is interpolated with the same weight."""
    X = as_2d(X)
    y = np.asarray(y, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    base, nb, lam = _plan(X, aqi_bins(y), k, None, rng)
    synth_X = X[base] + lam[:, None] * (X[nb] - X[base])
    synth_y = y[base] + lam * (y[nb] - y[base])
    return SmoteResult(
        X=np.vstack([X, synth_X]),
        y=np.concatenate([y, synth_y]),
        n_original=X.shape[0],
        parents=np.column_stack([base, nb]),
        lambdas=lam,
    )
