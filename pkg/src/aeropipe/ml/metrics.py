from __future__ import annotations

import numpy as np


class UndefinedMetricError(ValueError):
    pass


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=float).ravel()
    p = np.asarray(y_pred, dtype=float).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} vs {p.size}")
    if t.size == 0:
        raise ValueError("metrics need at least one sample")
    return t, p


def mae(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    return float(np.mean(np.abs(p - t)))


def rmse(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def rmsle(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    if (t < 0).any() or (p < 0).any():
        raise ValueError("RMSLE is undefined for negative values")
    return float(np.sqrt(np.mean((np.log1p(p) - np.log1p(t)) ** 2)))


def r2(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined when y_true has zero variance")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def metrics_regression(y_true, y_pred) -> tuple[float, float, float, float]:
    """(MAE, RMSE, RMSLE, R^2)."""
    return mae(y_true, y_pred), rmse(y_true, y_pred), rmsle(y_true, y_pred), r2(y_true, y_pred)


def accuracy(y_true, y_pred) -> float:
    t, p = np.asarray(y_true).ravel(), np.asarray(y_pred).ravel()
    if t.shape != p.shape or t.size == 0:
        raise ValueError("need equal, non-zero lengths")
    return 100.0 * float(np.mean(t == p))


def weighted_f1(y_true, y_pred) -> float:
    """Per-class F1 averaged with weights equal to each class's support in ``y_true``, in percent."""
    t, p = np.asarray(y_true).ravel(), np.asarray(y_pred).ravel()
    if t.shape != p.shape or t.size == 0:
        raise ValueError("need equal, non-zero lengths")
    total = 0.0
    for label in np.unique(t):
        tp = np.sum((p == label) & (t == label))
        fp = np.sum((p == label) & (t != label))
        fn = np.sum((p != label) & (t == label))
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        total += f1 * np.sum(t == label)
    return 100.0 * float(total / t.size)


def metrics_classification(y_true, y_pred) -> tuple[float, float]:
    """(accuracy %, weighted F1 %)."""
    return accuracy(y_true, y_pred), weighted_f1(y_true, y_pred)
