from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import ModelKind, TrainedModel, as_2d, encode_labels
from .tree import DecisionTree, TreeParams


def resolve_max_features(max_features, p: int) -> int:
    if max_features in (None, "all"):
        return p
    if max_features == "sqrt":
        return max(1, int(math.sqrt(p)))
    if max_features == "log2":
        return max(1, int(math.log2(p)))
    if isinstance(max_features, float):
        return max(1, min(p, int(max_features * p)))
    return max(1, min(p, int(max_features)))


@dataclass
class RandomForest(TrainedModel):
    task: str = "regression"
    n_trees: int = 100
    max_features: object = "sqrt"
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_leaf: int = 1
    trees: list[DecisionTree] = field(default_factory=list, repr=False)

    def fit(self, X, y) -> "RandomForest":
        X = as_2d(X)
        n, p = X.shape
        if n < 2:
            raise ValueError("a forest needs at least 2 samples")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        classify = self.task == "classification"
        if classify:
            self.classes_, target = encode_labels(y)
            n_classes = len(self.classes_)
        else:
            target = np.asarray(y, dtype=float).ravel()
            n_classes = None
        m = resolve_max_features(self.max_features, p)
        # One child seed per tree: results do not depend on the order trees are grown in.
        children = np.random.SeedSequence(self.seed or 0).spawn(self.n_trees)
        params = TreeParams(task=self.task, max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf)
        self.trees = []
        for child in children:
            rng = np.random.default_rng(child)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(kind=self.kind, params=params)
            tree.fit(X[rows], target[rows], rng=rng, max_features=m, n_classes=n_classes)
            self.trees.append(tree)
        return self

    def predict(self, X) -> np.ndarray:
        X = as_2d(X)
        votes = np.stack([t.predict_codes(X) for t in self.trees])
        if self.task != "classification":
            return votes.mean(axis=0)
        codes = votes.astype(np.intp)
        k = len(self.classes_)
        tally = np.zeros((X.shape[0], k), dtype=np.intp)
        for row in codes:
            tally[np.arange(X.shape[0]), row] += 1
        # argmax returns the first maximum: plurality with lowest-label tie-break
        return self.classes_[np.argmax(tally, axis=1)]


def fit_random_forest(X, y, n_trees: int = 100, max_features="sqrt", seed: int = 42,
                      task: str = "regression", bootstrap: bool = True,
                      max_depth: int | None = None, min_samples_leaf: int = 1) -> RandomForest:
    kind = ModelKind.RANDOM_FOREST_CLF if task == "classification" else ModelKind.RANDOM_FOREST_REG
    model = RandomForest(
        kind=kind,
        hyperparameters={
            "n_trees": n_trees,
            "max_features": max_features,
            "bootstrap": bootstrap,
            "max_depth": max_depth,
            "min_samples_leaf": min_samples_leaf,
            "task": task,
        },
        seed=seed,
        task=task,
        n_trees=n_trees,
        max_features=max_features,
        bootstrap=bootstrap,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
    )
    return model.fit(X, y)
