from .base import Matrix, ModelKind, TrainedModel
from .experiment import EvalReport, ExperimentSpec, run_experiment
from .forest import RandomForest, fit_random_forest
from .linear import SingularMatrixError, fit_linear_regression, fit_logistic_regression
from .metrics import metrics_classification, metrics_regression
from .neighbors import fit_gaussian_nb, fit_knn
from .smote import smote, smote_for_regression
from .split import SplitConfig, split
from .tree import DecisionTree, fit_decision_tree

__all__ = [
    "DecisionTree",
    "EvalReport",
    "ExperimentSpec",
    "Matrix",
    "ModelKind",
    "RandomForest",
    "SingularMatrixError",
    "SplitConfig",
    "TrainedModel",
    "fit_decision_tree",
    "fit_gaussian_nb",
    "fit_knn",
    "fit_linear_regression",
    "fit_logistic_regression",
    "fit_random_forest",
    "metrics_classification",
    "metrics_regression",
    "run_experiment",
    "smote",
    "smote_for_regression",
    "split",
]
