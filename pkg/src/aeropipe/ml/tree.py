"""CART decision trees (variance reduction for regression, Gini for classification).

Split search sorts each candidate feature once per node and scores every cut
point from cumulative sums. Candidate thresholds are midpoints between
consecutive distinct values; a sample goes left when ``x <= threshold``.
Ties in the split score keep the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ModelKind, TrainedModel, as_2d, encode_labels

LEAF = -1


@dataclass
class TreeParams:
    task: str = "regression"
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


def _best_cut_regression(ys: np.ndarray, valid: np.ndarray) -> tuple[float, int]:
    n = ys.size
    centred = ys - ys.mean()
    c1 = np.cumsum(centred)[:-1]
    c2 = np.cumsum(centred * centred)[:-1]
    t1, t2 = c1[-1] + centred[-1], c2[-1] + centred[-1] ** 2
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    cost = (c2 - c1 * c1 / nl) + ((t2 - c2) - (t1 - c1) ** 2 / nr)
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    return float(cost[i]), i + 1


def _best_cut_gini(ys: np.ndarray, n_classes: int, valid: np.ndarray) -> tuple[float, int]:
    n = ys.size
    counts = np.cumsum(np.eye(n_classes)[ys], axis=0)[:-1]
    total = counts[-1] + np.eye(n_classes)[ys[-1]]
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    right = total - counts
    cost = (nl - (counts * counts).sum(axis=1) / nl) + (nr - (right * right).sum(axis=1) / nr)
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    return float(cost[i]), i + 1


@dataclass
class DecisionTree(TrainedModel):
    params: TreeParams = field(default_factory=TreeParams)

    def fit(self, X, y, rng: np.random.Generator | None = None, max_features: int | None = None,
            n_classes: int | None = None) -> "DecisionTree":
        """Grow the tree. ``rng``/``max_features`` enable per-split feature subsampling (forests).

        For classification ``y`` must already be integer codes when ``n_classes`` is
        given; otherwise labels are encoded here and mapped back by ``predict``.
        """
        X = as_2d(X)
        n, p = X.shape
        if n < 1:
            raise ValueError("cannot fit a tree on zero samples")
        classify = self.params.task == "classification"
        if classify:
            if n_classes is None:
                self.classes_, codes = encode_labels(y)
                n_classes = len(self.classes_)
            else:
                codes = np.asarray(y, dtype=np.intp)
                self.classes_ = np.arange(n_classes)
            target = codes
        else:
            target = np.asarray(y, dtype=float).ravel()
        self.n_classes_ = n_classes
        self.n_features_ = p

        feature, threshold, left, right, value = [], [], [], [], []
        msl = self.params.min_samples_leaf
        max_depth = self.params.max_depth

        def new_node(idx: np.ndarray) -> int:
            ys = target[idx]
            if classify:
                value.append(float(np.argmax(np.bincount(ys, minlength=n_classes))))
            else:
                value.append(float(ys.mean()))
            feature.append(LEAF)
            threshold.append(np.nan)
            left.append(LEAF)
            right.append(LEAF)
            return len(value) - 1

        root = new_node(np.arange(n))
        stack = [(root, np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = target[idx]
            m = idx.size
            if m < 2 * msl or (max_depth is not None and depth >= max_depth):
                continue
            if (ys == ys[0]).all():
                continue
            if max_features is not None and max_features < p:
                candidates = np.sort(rng.choice(p, size=max_features, replace=False))
            else:
                candidates = range(p)

            best = (np.inf, -1, 0.0)
            positions = np.arange(1, m)
            size_ok = (positions >= msl) & (m - positions >= msl)
            for f in candidates:
                x = X[idx, f]
                order = np.argsort(x, kind="stable")
                xs = x[order]
                valid = size_ok & (xs[1:] > xs[:-1])
                if not valid.any():
                    continue
                if classify:
                    cost, cut = _best_cut_gini(ys[order], n_classes, valid)
                else:
                    cost, cut = _best_cut_regression(ys[order], valid)
                if cost < best[0]:
                    lo, hi = xs[cut - 1], xs[cut]
                    thr = lo + (hi - lo) / 2.0
                    if not lo <= thr < hi:
                        thr = lo
                    best = (cost, int(f), float(thr))
            if best[1] < 0:
                continue
            _, f, thr = best
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            lnode, rnode = new_node(li), new_node(ri)
            feature[node], threshold[node] = f, thr
            left[node], right[node] = lnode, rnode
            stack.append((rnode, ri, depth + 1))
            stack.append((lnode, li, depth + 1))

        self.feature_ = np.array(feature, dtype=np.intp)
        self.threshold_ = np.array(threshold, dtype=float)
        self.left_ = np.array(left, dtype=np.intp)
        self.right_ = np.array(right, dtype=np.intp)
        self.value_ = np.array(value, dtype=float)
        return self

    @property
    def node_count(self) -> int:
        return int(self.feature_.size)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = as_2d(X)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = self.feature_[node] != LEAF
        while active.any():
            rows = np.nonzero(active)[0]
            nd = node[rows]
            go_left = X[rows, self.feature_[nd]] <= self.threshold_[nd]
            node[rows] = np.where(go_left, self.left_[nd], self.right_[nd])
            active[rows] = self.feature_[node[rows]] != LEAF
        return node

    def predict_codes(self, X) -> np.ndarray:
        return self.value_[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        raw = self.predict_codes(X)
        if self.params.task == "classification":
            return self.classes_[raw.astype(np.intp)]
        return raw

    def structure(self) -> list[tuple]:
        """Pre-order (feature, threshold) list; leaves appear as ``("leaf", value)``."""
        out = []

        def walk(i: int) -> None:
            if self.feature_[i] == LEAF:
                out.append(("leaf", float(self.value_[i])))
                return
            out.append((int(self.feature_[i]), float(self.threshold_[i])))
            walk(self.left_[i])
            walk(self.right_[i])

        walk(0)
        return out


def fit_decision_tree(X, y, max_depth: int | None = None, min_samples_leaf: int = 1,
                      task: str = "regression") -> DecisionTree:
    params = TreeParams(task=task, max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    kind = ModelKind.DECISION_TREE_CLF if task == "classification" else ModelKind.DECISION_TREE_REG
    model = DecisionTree(
        kind=kind,
        hyperparameters={"max_depth": max_depth, "min_samples_leaf": min_samples_leaf, "task": task},
        params=params,
    )
    return model.fit(X, y)
