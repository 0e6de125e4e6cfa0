"""Train/evaluate pipeline: preprocessing, split, scaling, optional SMOTE, fit, score, rank."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..config import deep_merge, load_packaged_toml
from ..core import POLLUTANTS, CityDayRecord, drop_incomplete
from .base import Matrix, ModelKind, TrainedModel
from .forest import fit_random_forest
from .linear import fit_linear_regression, fit_logistic_regression
from .metrics import metrics_classification, metrics_regression
from .neighbors import fit_gaussian_nb, fit_knn
from .smote import smote, smote_for_regression
from .split import SplitConfig, Standardizer, split_indices
from .tree import fit_decision_tree

log = logging.getLogger(__name__)

TASKS = ("regression", "classification")
MODEL_NAMES = {
    "regression": ("RandomForest", "LinearRegression", "DecisionTree", "Knn"),
    "classification": ("RandomForest", "LogisticRegression", "DecisionTree", "Knn", "GaussianNB"),
}
DISPLAY = {
    ("regression", "RandomForest"): "Random Forest Regression",
    ("regression", "LinearRegression"): "Linear Regression",
    ("regression", "DecisionTree"): "Decision Tree Regression",
    ("regression", "Knn"): "KNN Regression",
    ("classification", "RandomForest"): "Random Forest",
    ("classification", "LogisticRegression"): "Logistic Regression",
    ("classification", "DecisionTree"): "Decision Tree",
    ("classification", "Knn"): "KNN",
    ("classification", "GaussianNB"): "Naive Bayes",
}


def ml_defaults() -> dict[str, Any]:
    return load_packaged_toml("ml_defaults.toml")


@dataclass
class ExperimentSpec:
    task: str = "regression"
    models: Sequence[str] = ()
    smote: Sequence[bool] = (False, True)
    split: SplitConfig = field(default_factory=SplitConfig)
    seed: int = 42
    hyperparameters: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if not self.models:
            self.models = tuple(ml_defaults()["models"][self.task])
        unknown = [m for m in self.models if m not in MODEL_NAMES[self.task]]
        if unknown:
            raise ValueError(f"unknown {self.task} model(s): {', '.join(unknown)}")
        if not self.smote:
            raise ValueError("smote must list at least one of false/true")

    @classmethod
    def from_mapping(cls, table: Mapping[str, Any]) -> "ExperimentSpec":
        defaults = ml_defaults()
        seed = int(table.get("seed", defaults["split"]["seed"]))
        smote_flags = table.get("smote", (False, True))
        if isinstance(smote_flags, bool):
            smote_flags = (smote_flags,)
        return cls(
            task=table.get("task", "regression"),
            models=tuple(table.get("models", ())),
            smote=tuple(bool(s) for s in smote_flags),
            split=SplitConfig(float(table.get("test_fraction", defaults["split"]["test_fraction"])), seed),
            seed=seed,
            hyperparameters=table.get("hyperparameters", {}),
        )


@dataclass
class EvalReport:
    model: str
    kind: ModelKind
    task: str
    smote: bool
    n_train: int
    n_test: int
    mae: float | None = None
    rmse: float | None = None
    rmsle: float | None = None
    r2: float | None = None
    accuracy: float | None = None
    f1: float | None = None
    rank: int = 0
    best: bool = False
    fit_seconds: float = field(default=0.0, compare=False)

    @property
    def display_name(self) -> str:
        return DISPLAY[(self.task, self.model)]


def feature_matrix(records: Sequence[CityDayRecord], task: str) -> tuple[Matrix, np.ndarray]:
    X = np.array([[r.get(p) for p in POLLUTANTS] for r in records], dtype=float).reshape(len(records), len(POLLUTANTS))
    if task == "regression":
        y = np.array([r.aqi for r in records], dtype=float)
    else:
        # bucket rank as the label: 0 = Good ... 5 = Severe
        y = np.array([r.aqi_bucket.rank for r in records], dtype=np.intp)
    return Matrix(X, POLLUTANTS), y


def preprocess(records: Sequence[CityDayRecord], task: str) -> list[CityDayRecord]:
    target = "AQI" if task == "regression" else "AQI_Bucket"
    return drop_incomplete(records, (*POLLUTANTS, target))


def _fit(name: str, task: str, X: np.ndarray, y: np.ndarray, hp: Mapping[str, Mapping[str, Any]],
         seed: int) -> TrainedModel:
    if name == "RandomForest":
        p = hp["random_forest"]
        return fit_random_forest(
            X, y, n_trees=int(p["n_trees"]), max_features=p.get("max_features", "sqrt"),
            seed=seed, task=task, bootstrap=bool(p.get("bootstrap", True)),
            max_depth=p.get("max_depth"), min_samples_leaf=int(p.get("min_samples_leaf", 1)),
        )
    if name == "DecisionTree":
        p = hp["decision_tree"]
        return fit_decision_tree(X, y, max_depth=p.get("max_depth"),
                                 min_samples_leaf=int(p.get("min_samples_leaf", 1)), task=task)
    if name == "LinearRegression":
        return fit_linear_regression(X, y, columns=POLLUTANTS)
    if name == "LogisticRegression":
        p = hp["logistic_regression"]
        return fit_logistic_regression(X, y, epochs=int(p["epochs"]), learning_rate=float(p["learning_rate"]),
                                       l2=float(p["l2"]), seed=seed)
    if name == "Knn":
        return fit_knn(X, y, k=int(hp["knn"]["k"]), task=task)
    if name == "GaussianNB":
        return fit_gaussian_nb(X, y)
    raise ValueError(f"unknown model {name!r}")


def run_experiment(records: Sequence[CityDayRecord], spec: ExperimentSpec) -> list[EvalReport]:
    """Fit and score every (model, smote) combination; reports come back ranked.

    Scaling is fitted on the training rows; SMOTE sees only scaled training rows,
    so no synthetic sample can reach the test set. Regression predictions are
    clipped at 0 before scoring (AQI cannot be negative; RMSLE needs it).
    """
    data = preprocess(records, spec.task)
    if len(data) < 2:
        raise ValueError(f"only {len(data)} complete row(s) after dropping missing values")
    hp = deep_merge(ml_defaults(), spec.hyperparameters)
    X, y = feature_matrix(data, spec.task)
    train_idx, test_idx = split_indices(len(data), spec.split)
    scaler = Standardizer().fit(X.values[train_idx])
    X_train, X_test = scaler.transform(X.values[train_idx]), scaler.transform(X.values[test_idx])
    y_train, y_test = y[train_idx], y[test_idx]

    reports: list[EvalReport] = []
    for use_smote in spec.smote:
        if use_smote:
            k = int(hp["smote"]["k"])
            if spec.task == "regression":
                res = smote_for_regression(X_train, y_train, k=k, seed=spec.seed)
            else:
                res = smote(X_train, y_train, k=k, seed=spec.seed)
            Xf, yf = res.X, res.y
        else:
            Xf, yf = X_train, y_train
        for name in spec.models:
            started = time.perf_counter()
            model = _fit(name, spec.task, Xf, yf, hp, spec.seed)
            pred = model.predict(X_test)
            report = EvalReport(model=name, kind=model.kind, task=spec.task, smote=use_smote,
                                n_train=len(yf), n_test=len(y_test))
            if spec.task == "regression":
                report.mae, report.rmse, report.rmsle, report.r2 = metrics_regression(y_test, np.maximum(pred, 0.0))
            else:
                report.accuracy, report.f1 = metrics_classification(y_test, pred)
            report.fit_seconds = time.perf_counter() - started
            log.info("%s smote=%s done in %.1fs", name, use_smote, report.fit_seconds)
            reports.append(report)
    return rank_reports(reports)


def rank_reports(reports: list[EvalReport]) -> list[EvalReport]:
    """Order best first: lowest MAE for regression, highest accuracy for classification.

    Equal scores keep their run order (stable sort).
    """
    if not reports:
        return reports
    if reports[0].task == "regression":
        ordered = sorted(reports, key=lambda r: r.mae)
    else:
        ordered = sorted(reports, key=lambda r: -r.accuracy)
    for i, r in enumerate(ordered, start=1):
        r.rank = i
        r.best = i == 1
    return ordered


REGRESSION_COLUMNS = ("rank", "model", "smote", "mae", "rmse", "rmsle", "r2", "n_train", "n_test", "best")
CLASSIFICATION_COLUMNS = ("rank", "model", "smote", "accuracy", "f1", "n_train", "n_test", "best")


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def reports_to_csv(reports: Sequence[EvalReport]) -> bytes:
    task = reports[0].task if reports else "regression"
    columns = REGRESSION_COLUMNS if task == "regression" else CLASSIFICATION_COLUMNS
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in reports:
        writer.writerow([_fmt(r.display_name if c == "model" else getattr(r, c)) for c in columns])
    return buf.getvalue().encode("utf-8")


def render_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text comparison table, one block per SMOTE setting, best model starred."""
    if not reports:
        return "(no reports)\n"
    task = reports[0].task
    if task == "regression":
        head = ("Model", "MAE", "RMSE", "RMSLE", "R2")
        row = lambda r: (r.display_name, f"{r.mae:.2f}", f"{r.rmse:.2f}", f"{r.rmsle:.2f}", f"{r.r2:.2f}")
    else:
        head = ("Model", "Accuracy", "F1 Score")
        row = lambda r: (r.display_name, f"{r.accuracy:.0f}", f"{r.f1:.0f}")
    lines = []
    for flag in sorted({r.smote for r in reports}):
        block = [r for r in reports if r.smote == flag]
        rows = [(("* " if r.best else "  ") + row(r)[0], *row(r)[1:]) for r in block]
        if task == "classification" and not flag:
            for ext in ml_defaults().get("external_reference", []):
                rows.append((f"  {ext['model']} (external reference, not trained)",
                             f"{ext['accuracy']:g}", f"{ext['f1']:g}"))
        widths = [max(len(str(x)) for x in col) for col in zip(("  " + head[0], *head[1:]), *rows)]
        title = f"{'AQI' if task == 'regression' else 'AQI_Bucket'} - {'with' if flag else 'without'} SMOTE"
        lines.append(title)
        lines.append("  ".join(h.ljust(w) for h, w in zip(("  " + head[0], *head[1:]), widths)))
        for r in rows:
            lines.append("  ".join(str(x).ljust(w) for x, w in zip(r, widths)))
        lines.append("")
    return "\n".join(lines)
