"""Least-squares linear regression and multinomial logistic regression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .base import Matrix, ModelKind, TrainedModel, as_2d, encode_labels


class SingularMatrixError(ValueError):
    def __init__(self, columns: Sequence[str]):
        super().__init__(f"design matrix is rank deficient; dependent column(s): {', '.join(columns)}")
        self.columns = list(columns)


@dataclass
class LinearRegression(TrainedModel):
    coef_: np.ndarray | None = None  # [intercept, slope_1, ..., slope_p]

    def predict(self, X) -> np.ndarray:
        X = as_2d(X)
        return self.coef_[0] + X @ self.coef_[1:]


def fit_linear_regression(X, y, columns: Sequence[str] | None = None) -> LinearRegression:
    """Ordinary least squares through a column-pivoted QR factorisation.

    Raises :class:`SingularMatrixError` naming the columns that the pivoting
    pushed past the numerical rank.
    """
    if isinstance(X, Matrix):
        columns = columns or X.columns
    A = as_2d(X)
    n, p = A.shape
    names = ["intercept", *(columns or [f"x{i}" for i in range(p)])]
    design = np.hstack([np.ones((n, 1)), A])
    y = np.asarray(y, dtype=float).ravel()
    q, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p + 1) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < p + 1:
        raise SingularMatrixError(sorted((names[j] for j in piv[rank:]), key=names.index))
    beta_piv = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p + 1)
    beta[piv] = beta_piv
    return LinearRegression(kind=ModelKind.LINEAR_REGRESSION, coef_=beta)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logistic_loss_and_grad(W: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy plus ``l2/2 * ||W[1:]||^2`` and its gradient.

    ``W`` has shape (p + 1, C) with the bias in row 0; ``Y`` is one-hot (n, C).
    """
    n = X.shape[0]
    Xb = np.hstack([np.ones((n, 1)), X])
    P = softmax(Xb @ W)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * l2 * np.sum(W[1:] ** 2)
    grad = Xb.T @ (P - Y) / n
    grad[1:] += l2 * W[1:]
    return float(loss), grad


@dataclass
class LogisticRegression(TrainedModel):
    weights_: np.ndarray | None = None
    classes_: np.ndarray | None = None

    def predict_proba(self, X) -> np.ndarray:
        X = as_2d(X)
        Xb = np.hstack([np.ones((X.shape[0], 1)), X])
        return softmax(Xb @ self.weights_)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def fit_logistic_regression(X, y, epochs: int = 500, learning_rate: float = 0.5,
                            l2: float = 1e-4, seed: int = 42) -> LogisticRegression:
    """Full-batch gradient descent from zero weights (so the fit does not depend on ``seed``)."""
    X = as_2d(X)
    classes, codes = encode_labels(y)
    if len(classes) < 2:
        raise ValueError("logistic regression needs at least two classes in the training set")
    Y = np.eye(len(classes))[codes]
    W = np.zeros((X.shape[1] + 1, len(classes)))
    for _ in range(epochs):
        _, grad = logistic_loss_and_grad(W, X, Y, l2)
        W -= learning_rate * grad
    return LogisticRegression(
        kind=ModelKind.LOGISTIC_REGRESSION,
        hyperparameters={"epochs": epochs, "learning_rate": learning_rate, "l2": l2},
        seed=seed,
        weights_=W,
        classes_=classes,
    )
