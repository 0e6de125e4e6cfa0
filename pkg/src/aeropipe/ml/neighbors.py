"""k-nearest neighbours and Gaussian naive Bayes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ModelKind, TrainedModel, as_2d, encode_labels

VARIANCE_FLOOR = 1e-9


def nearest(train: np.ndarray, queries: np.ndarray, k: int, chunk: int = 64) -> np.ndarray:
    """Indices of the ``k`` nearest training rows per query (Euclidean; ties -> lower index)."""
    out = np.empty((queries.shape[0], k), dtype=np.intp)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        # explicit differences, not the |a|^2 - 2ab + |b|^2 expansion, so exact ties stay exact
        d2 = ((q[:, None, :] - train[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


@dataclass
class KNearestNeighbors(TrainedModel):
    k: int = 5
    task: str = "classification"

    def fit(self, X, y) -> "KNearestNeighbors":
        X = as_2d(X)
        if self.k < 1 or self.k > X.shape[0]:
            raise ValueError(f"k={self.k} must be between 1 and the number of samples ({X.shape[0]})")
        self.X_ = X
        if self.task == "classification":
            self.classes_, self.y_ = encode_labels(y)
        else:
            self.y_ = np.asarray(y, dtype=float).ravel()
        return self

    def predict(self, X) -> np.ndarray:
        idx = nearest(self.X_, as_2d(X), self.k)
        labels = self.y_[idx]
        if self.task != "classification":
            return labels.mean(axis=1)
        tally = np.zeros((labels.shape[0], len(self.classes_)), dtype=np.intp)
        for j in range(self.k):
            tally[np.arange(labels.shape[0]), labels[:, j]] += 1
        return self.classes_[np.argmax(tally, axis=1)]


def fit_knn(X, y, k: int = 5, task: str = "classification") -> KNearestNeighbors:
    model = KNearestNeighbors(kind=ModelKind.KNN, hyperparameters={"k": k, "task": task}, k=k, task=task)
    return model.fit(X, y)


@dataclass
class GaussianNB(TrainedModel):
    def fit(self, X, y) -> "GaussianNB":
        X = as_2d(X)
        self.classes_, codes = encode_labels(y)
        k = len(self.classes_)
        self.theta_ = np.vstack([X[codes == c].mean(axis=0) for c in range(k)])
        self.var_ = np.vstack([X[codes == c].var(axis=0) for c in range(k)]) + VARIANCE_FLOOR
        self.log_prior_ = np.log(np.bincount(codes, minlength=k) / codes.size)
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = as_2d(X)
        ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_), axis=1)[None, :]
        ll = ll - 0.5 * np.sum((X[:, None, :] - self.theta_[None, :, :]) ** 2 / self.var_[None, :, :], axis=2)
        return ll + self.log_prior_[None, :]

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.joint_log_likelihood(X), axis=1)]


def fit_gaussian_nb(X, y) -> GaussianNB:
    return GaussianNB(kind=ModelKind.GAUSSIAN_NB, hyperparameters={"var_floor": VARIANCE_FLOOR}).fit(X, y)
