import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeropipe.aqi import bucket
from aeropipe.ml import (
    ExperimentSpec,
    SingularMatrixError,
    SplitConfig,
    fit_decision_tree,
    fit_gaussian_nb,
    fit_knn,
    fit_linear_regression,
    fit_logistic_regression,
    fit_random_forest,
    run_experiment,
    smote,
    smote_for_regression,
    split,
)
from aeropipe.ml import metrics as M
from aeropipe.ml.experiment import reports_to_csv
from aeropipe.ml.linear import logistic_loss_and_grad
from aeropipe.ml.metrics import UndefinedMetricError
from aeropipe.ml.split import Standardizer, fisher_yates
from aeropipe.ml.split import test_size as compute_test_size

from . import oracles


# -- split ---------------------------------------------------------------


def test_split_ten_rows():
    train, test = split(list(range(10)), SplitConfig(0.2, 42))
    assert len(train) == 8 and len(test) == 2
    assert sorted(train + test) == list(range(10))
    order = oracles.fisher_yates_reference(10, 42)
    assert test == order[:2] and train == order[2:]


@pytest.mark.parametrize("n", [2, 5, 17, 100])
def test_fisher_yates_matches_reference(n):
    assert fisher_yates(n, 7) == oracles.fisher_yates_reference(n, 7)


@pytest.mark.parametrize("n, frac, k", [(10, 0.2, 2), (5, 0.1, 1), (3, 0.9, 2), (25, 0.1, 3), (15, 0.1, 2)])
def test_test_size_rounding(n, frac, k):
    assert compute_test_size(n, frac) == k


def test_split_is_seeded():
    rows = list(range(50))
    assert split(rows, SplitConfig(0.2, 1)) == split(rows, SplitConfig(0.2, 1))
    assert split(rows, SplitConfig(0.2, 1)) != split(rows, SplitConfig(0.2, 2))
    with pytest.raises(ValueError):
        split([1], SplitConfig())
    with pytest.raises(ValueError):
        SplitConfig(1.0)


def test_standardizer_uses_train_stats():
    train = np.array([[0.0, 5.0], [2.0, 5.0]])
    sc = Standardizer().fit(train)
    assert np.allclose(sc.transform(train), [[-1, 0], [1, 0]])
    assert np.allclose(sc.transform([[4.0, 6.0]]), [[3.0, 1.0]])


# -- linear --------------------------------------------------------------


def test_linear_recovers_exact_line():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = 1.5 + X @ np.array([2.0, -3.0, 0.5])
    model = fit_linear_regression(X, y)
    assert np.allclose(model.coef_, [1.5, 2.0, -3.0, 0.5], atol=1e-8)


def test_linear_matches_normal_equations():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30) * 10 + X[:, 0]
    expected = oracles.normal_equations(X.tolist(), y.tolist())
    assert np.allclose(fit_linear_regression(X, y).coef_, expected, atol=1e-6)


def test_linear_singular_names_column():
    rng = np.random.default_rng(2)
    a = rng.normal(size=20)
    X = np.column_stack([a, rng.normal(size=20), 2 * a])
    with pytest.raises(SingularMatrixError) as err:
        fit_linear_regression(X, rng.normal(size=20), columns=["pm", "no2", "pm_twice"])
    assert err.value.columns and set(err.value.columns) <= {"pm", "pm_twice"}


# -- trees ---------------------------------------------------------------


def tree_fixture(task):
    rng = np.random.default_rng(30)
    X = rng.integers(0, 10, size=(30, 3)).astype(float)
    if task == "regression":
        y = (X[:, 0] * 3 + (X[:, 2] > 4) * 10 + rng.integers(0, 3, size=30)).astype(float)
    else:
        y = ((X[:, 1] > 5).astype(int) + (X[:, 0] > 7)).astype(int)
    return X, y


@pytest.mark.parametrize("task", ["regression", "classification"])
@pytest.mark.parametrize("depth", [1, 2, 3])
def test_tree_matches_brute_force(task, depth):
    X, y = tree_fixture(task)
    got = fit_decision_tree(X, y, max_depth=depth, task=task).structure()
    expected = oracles.tree_structure_brute_force(X.tolist(), y.tolist(), task, depth)
    assert len(got) == len(expected)
    for g, e in zip(got, expected):
        assert g[0] == e[0]
        assert g[1] == pytest.approx(e[1], rel=1e-12)


def test_tree_threshold_midpoint_and_left_rule():
    X = np.array([[1.0], [2.0], [3.0], [10.0]])
    y = np.array([0.0, 0.0, 0.0, 9.0])
    tree = fit_decision_tree(X, y, max_depth=1)
    assert tree.structure() == [(0, 6.5), ("leaf", 0.0), ("leaf", 9.0)]
    assert list(tree.predict([[6.5], [6.50001]])) == [0.0, 9.0]


def test_tree_fits_training_data_when_unbounded():
    X, y = tree_fixture("regression")
    Xu, idx = np.unique(X, axis=0, return_index=True)
    tree = fit_decision_tree(Xu, y[idx])
    assert np.allclose(tree.predict(Xu), y[idx])


def test_tree_min_samples_leaf():
    X, y = tree_fixture("regression")
    tree = fit_decision_tree(X, y, min_samples_leaf=5)
    counts = np.bincount(tree.apply(X))
    assert counts[counts > 0].min() >= 5


def test_tree_classification_labels_mapped_back():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    tree = fit_decision_tree(X, ["b", "b", "z", "z"], task="classification")
    assert list(tree.predict(X)) == ["b", "b", "z", "z"]


def test_single_tree_forest_equals_tree():
    X, y = tree_fixture("regression")
    forest = fit_random_forest(X, y, n_trees=1, max_features=None, bootstrap=False)
    tree = fit_decision_tree(X, y)
    assert forest.trees[0].structure() == tree.structure()
    assert np.array_equal(forest.predict(X), tree.predict(X))


def test_forest_deterministic_and_beats_tree():
    rng = np.random.default_rng(5)
    X = rng.uniform(-3, 3, size=(400, 4))
    y = np.sin(X[:, 0]) * 3 + X[:, 1] ** 2 + rng.normal(scale=1.0, size=400)
    Xt, yt = X[:300], y[:300]
    Xv, yv = X[300:], y[300:]
    a = fit_random_forest(Xt, yt, n_trees=40, seed=3)
    b = fit_random_forest(Xt, yt, n_trees=40, seed=3)
    assert np.array_equal(a.predict(Xv), b.predict(Xv))
    tree = fit_decision_tree(Xt, yt)
    assert M.rmse(yv, a.predict(Xv)) < M.rmse(yv, tree.predict(Xv))


def test_forest_classifier_votes():
    X, y = tree_fixture("classification")
    forest = fit_random_forest(X, y, n_trees=25, task="classification", seed=1)
    assert set(forest.predict(X)) <= set(y)
    assert M.accuracy(y, forest.predict(X)) > 90


# -- logistic ------------------------------------------------------------


def blobs(seed=0, n=60):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2, 0.7, size=(n, 2)), rng.normal(2, 0.7, size=(n, 2))])
    return X, np.repeat([0, 1], n)


def test_logistic_separates_blobs():
    X, y = blobs()
    model = fit_logistic_regression(X, y)
    assert M.accuracy(y, model.predict(X)) >= 95


def test_logistic_symmetric_input_gives_half():
    X = np.array([[-1.0], [1.0]])
    model = fit_logistic_regression(np.vstack([X, X]), [0, 0, 1, 1])
    assert np.allclose(model.predict_proba([[0.0], [5.0]]), 0.5)


def test_logistic_gradient_finite_differences():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(15, 3))
    Y = np.eye(3)[rng.integers(0, 3, size=15)]
    W = rng.normal(size=(4, 3))
    _, grad = logistic_loss_and_grad(W, X, Y, l2=0.1)
    h = 1e-6
    num = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        num[idx] = (logistic_loss_and_grad(Wp, X, Y, 0.1)[0] - logistic_loss_and_grad(Wm, X, Y, 0.1)[0]) / (2 * h)
    assert np.allclose(grad, num, atol=1e-5)


def test_logistic_needs_two_classes():
    with pytest.raises(ValueError):
        fit_logistic_regression([[0.0], [1.0]], [1, 1])


# -- neighbours and naive Bayes -----------------------------------------


def test_knn_matches_brute_force():
    rng = np.random.default_rng(8)
    X = rng.integers(0, 5, size=(20, 2)).astype(float)  # integer grid: plenty of exact ties
    y = rng.integers(0, 3, size=20)
    queries = rng.integers(0, 5, size=(15, 2)).astype(float)
    for k in (1, 3, 5):
        model = fit_knn(X, y, k=k)
        expected = [oracles.knn_brute_force(X.tolist(), y.tolist(), q.tolist(), k) for q in queries]
        assert list(model.predict(queries)) == expected


def test_knn_one_returns_own_label():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(20, 3))
    y = rng.integers(0, 4, size=20)
    assert np.array_equal(fit_knn(X, y, k=1).predict(X), y)


def test_knn_regression_and_bad_k():
    X = np.array([[0.0], [1.0], [10.0]])
    assert fit_knn(X, [1.0, 3.0, 100.0], k=2, task="regression").predict([[0.2]])[0] == 2.0
    with pytest.raises(ValueError):
        fit_knn(X, [0, 1, 1], k=4)


def test_nb_symmetry_and_separation():
    X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    nb = fit_gaussian_nb(X, [0, 0, 1, 1])
    assert np.allclose(nb.predict_proba([[0.0]]), 0.5)
    Xb, yb = blobs(2)
    assert M.accuracy(yb, fit_gaussian_nb(Xb, yb).predict(Xb)) >= 95


def test_nb_constant_feature_is_finite():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 5.0], [1.0, 6.0]])
    proba = fit_gaussian_nb(X, [0, 0, 1, 1]).predict_proba(X)
    assert np.isfinite(proba).all()


# -- SMOTE ---------------------------------------------------------------


def test_smote_identical_points():
    X = np.array([[0.0, 0.0]] * 10 + [[3.0, 4.0]] * 3)
    res = smote(X, ["a"] * 10 + ["b"] * 3, k=2, seed=1)
    assert np.allclose(res.X[res.synthetic], [3.0, 4.0])


def test_smote_geometry_on_segment():
    X = np.array([[0.0, 0.0]] * 6 + [[0.0, 0.0], [1.0, 1.0]])
    res = smote(X, [0] * 6 + [1, 1], k=1, seed=3)
    for row, lam, (i, _) in zip(res.X[res.synthetic], res.lambdas, res.parents):
        t = lam if i == 6 else 1 - lam
        assert np.allclose(row, [t, t])


def test_smote_balances_to_majority():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 3))
    y = np.array(["A"] * 100 + ["B"] * 20)
    res = smote(X, y, k=5, seed=42)
    labels, counts = np.unique(res.y, return_counts=True)
    assert dict(zip(labels, counts)) == {"A": 100, "B": 100}
    assert np.array_equal(res.X[:120], X)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 6))
def test_smote_rows_lie_on_same_class_segments(seed, n_minor, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25 + n_minor, 2))
    y = np.array([0] * 25 + [1] * n_minor)
    res = smote(X, y, k=k, seed=seed)
    minority = X[y == 1]
    for row in res.X[res.synthetic]:
        # brute force: some pair of minority points has row on its segment
        ok = False
        for a in minority:
            for b in minority:
                d = b - a
                denom = d @ d
                t = 0.0 if denom == 0 else float((row - a) @ d / denom)
                if -1e-9 <= t <= 1 + 1e-9 and np.allclose(a + t * d, row, atol=1e-9):
                    ok = True
                    break
            if ok:
                break
        assert ok
    assert (res.y[res.synthetic] == 1).all()


def test_smote_deterministic_and_singleton_error():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 2))
    y = [0] * 25 + [1] * 5
    a, b = smote(X, y, seed=9), smote(X, y, seed=9)
    assert np.array_equal(a.X, b.X)
    with pytest.raises(ValueError, match="single sample"):
        smote(X, [0] * 29 + [1])


def test_smote_noop_when_balanced():
    X = np.arange(8.0).reshape(4, 2)
    res = smote(X, [0, 1, 0, 1])
    assert res.X.shape == (4, 2)


def test_smote_for_regression():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 3))
    y = np.concatenate([rng.uniform(10, 45, 40), rng.uniform(120, 180, 20)])
    res = smote_for_regression(X, y, k=3, seed=2)
    bins = [bucket(v).rank for v in res.y]
    assert bins.count(0) == bins.count(2) == 40
    for val, (i, j) in zip(res.y[res.synthetic], res.parents):
        assert min(y[i], y[j]) - 1e-9 <= val <= max(y[i], y[j]) + 1e-9


# -- metrics -------------------------------------------------------------


def test_metrics_perfect_and_small_cases():
    t = [1.0, 2.0, 3.0]
    assert M.metrics_regression(t, t) == (0.0, 0.0, 0.0, 1.0)
    assert M.mae([0, 2], [1, 1]) == 1.0 and M.rmse([0, 2], [1, 1]) == 1.0
    assert M.accuracy([1, 2, 3], [1, 2, 0]) == pytest.approx(200 / 3)
    with pytest.raises(UndefinedMetricError):
        M.r2([5.0, 5.0], [5.0, 4.0])


def test_metrics_match_oracles():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        t = rng.uniform(0, 500, n).tolist()
        p = rng.uniform(0, 500, n).tolist()
        assert M.mae(t, p) == pytest.approx(oracles.mae(t, p), rel=1e-10)
        assert M.rmse(t, p) == pytest.approx(oracles.rmse(t, p), rel=1e-10)
        assert M.rmsle(t, p) == pytest.approx(oracles.rmsle(t, p), rel=1e-10)
        assert M.r2(t, p) == pytest.approx(oracles.r2(t, p), rel=1e-10)
        ct = rng.integers(0, 4, n).tolist()
        cp = rng.integers(0, 4, n).tolist()
        assert M.accuracy(ct, cp) == pytest.approx(oracles.accuracy(ct, cp), rel=1e-10)
        assert M.weighted_f1(ct, cp) == pytest.approx(oracles.weighted_f1(ct, cp), rel=1e-10, abs=1e-12)


def test_rmsle_rejects_negatives():
    with pytest.raises(ValueError):
        M.rmsle([1.0], [-2.0])


# -- experiment ----------------------------------------------------------


def test_experiment_is_reproducible(synthetic_records):
    spec = ExperimentSpec(task="regression", hyperparameters={"random_forest": {"n_trees": 10}})
    a = reports_to_csv(run_experiment(synthetic_records, spec))
    b = reports_to_csv(run_experiment(synthetic_records, spec))
    assert a == b
    lines = a.decode().splitlines()
    assert lines[0] == "rank,model,smote,mae,rmse,rmsle,r2,n_train,n_test,best"
    assert len(lines) == 1 + 3 * 2  # three default regressors, with and without SMOTE


def test_experiment_single_model(synthetic_records):
    spec = ExperimentSpec(task="classification", models=("GaussianNB",), smote=(False,))
    (report,) = run_experiment(synthetic_records, spec)
    assert report.rank == 1 and report.best and 0 <= report.accuracy <= 100
    assert report.display_name == "Naive Bayes"


def test_experiment_ranking_order(synthetic_records):
    spec = ExperimentSpec(task="classification", hyperparameters={"random_forest": {"n_trees": 10}})
    reports = run_experiment(synthetic_records, spec)
    accs = [r.accuracy for r in reports]
    assert accs == sorted(accs, reverse=True)
    assert [r.rank for r in reports] == list(range(1, len(reports) + 1))


def test_experiment_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(task="clustering")
    with pytest.raises(ValueError):
        ExperimentSpec(task="regression", models=("GaussianNB",))
