import numpy as np
import pytest

from metaselect import learners
from metaselect.errors import DataError, SchemaError
from metaselect.evaluation import ConfusionCounts, recall
from metaselect.learners import LearnerSpec, measure_runtime, predict, train
from metaselect.learners.bayes import GaussianNaiveBayes
from metaselect.learners.svm import KernelSVR
from metaselect.learners.tree import DecisionTree, RandomForest

ALL = list(learners.ALGORITHMS)


def _separable(n, seed, d=3):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    return X, (X[:, 0] > 0.5).astype(np.int64)


def _noisy(n, seed, d=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] - X[:, 1] + rng.normal(0, 1.0, n) > 0).astype(np.int64)
    return X, y


@pytest.mark.parametrize("alg", ALL)
def test_separable_training_recall(alg):
    X, y = _separable(200, 0, d=1)
    model = train(LearnerSpec(alg, seed=1), X, y)
    assert recall(ConfusionCounts.from_labels(y, predict(model, X))) == 1.0


@pytest.mark.parametrize("alg", ALL)
def test_seeded_determinism(alg):
    X, y = _noisy(150, 1)
    Xt, _ = _noisy(100, 2)
    a = predict(train(LearnerSpec(alg, seed=7), X, y), Xt)
    b = predict(train(LearnerSpec(alg, seed=7), X, y), Xt)
    np.testing.assert_array_equal(a, b)


def test_forest_seed_changes_model():
    X, y = _noisy(150, 3)
    a = RandomForest(n_estimators=5, seed=1).fit(X, y).predict_proba(X)
    b = RandomForest(n_estimators=5, seed=2).fit(X, y).predict_proba(X)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("alg", ALL)
def test_empty_and_mismatched_input(alg):
    X, y = _noisy(60, 4)
    model = train(LearnerSpec(alg), X, y)
    assert predict(model, np.zeros((0, 4))).shape == (0,)
    with pytest.raises(SchemaError):
        predict(model, np.zeros((3, 5)))


@pytest.mark.parametrize("X,y,exc", [
    (np.zeros((1, 2)), [1], DataError),
    (np.zeros((4, 2)), [1, 1, 1, 1], DataError),
    (np.zeros((4, 2)), [0, 1, 2, 1], DataError),
    (np.zeros((4, 2)), [0, 1, 1], DataError),
    (np.array([[np.nan, 0], [0, 0]]), [0, 1], DataError),
])
def test_train_rejects_bad_input(X, y, exc):
    with pytest.raises(exc):
        train(LearnerSpec("decision_tree"), X, np.asarray(y))


def test_spec_validation():
    with pytest.raises(ValueError):
        LearnerSpec("gradient_boosting")
    with pytest.raises(ValueError):
        LearnerSpec("kernel_svc", {"kernel": "linear"})
    with pytest.raises(ValueError):
        LearnerSpec("kernel_svc", {"C": 0})
    assert LearnerSpec("kernel_svc", {"C": 2.0}).hyperparams["C"] == 2.0


def test_svr_threshold_convention():
    m = KernelSVR.from_state({"C": 1.0, "tol": 1e-3, "gamma": 1.0, "rho": 0.0,
                              "n_features": 1, "support_vectors": [[0.0]],
                              "dual_coef": [1.0], "epsilon": 0.1, "threshold": 0.5})
    # raw output exp(-x^2): 0.2 at x=sqrt(ln 5), 0.7 at x=sqrt(ln(1/0.7))
    X = np.array([[np.sqrt(np.log(5.0))], [np.sqrt(np.log(1 / 0.7))]])
    np.testing.assert_allclose(m.predict_raw(X), [0.2, 0.7])
    assert m.predict(X).tolist() == [0, 1]
    flat = KernelSVR.from_state({"C": 1.0, "tol": 1e-3, "gamma": 1.0, "rho": -0.5,
                                 "n_features": 1, "support_vectors": [], "dual_coef": [],
                                 "epsilon": 0.1, "threshold": 0.5})
    assert flat.predict_raw(X).tolist() == [0.5, 0.5]
    assert flat.predict(X).tolist() == [0, 0]  # exactly at the threshold: negative


def test_tree_memorizes_unique_rows():
    X, y = _noisy(300, 5)
    tree = DecisionTree().fit(X, y)
    np.testing.assert_array_equal(tree.predict(X), y)


def test_tree_matches_cart_oracle_on_distinct_splits():
    tree_mod = pytest.importorskip("sklearn.tree")
    rng = np.random.default_rng(6)
    X = rng.permutation(400).reshape(200, 2).astype(float)  # all values distinct
    y = (X[:, 0] + rng.normal(0, 60, 200) > 200).astype(np.int64)
    ours = DecisionTree(max_depth=3).fit(X, y)
    ref = tree_mod.DecisionTreeClassifier(max_depth=3, random_state=0).fit(X, y)
    Xt = rng.uniform(0, 400, size=(500, 2))
    # tie-free Gini optima: same partition, so the same probabilities
    np.testing.assert_allclose(ours.predict_proba(Xt), ref.predict_proba(Xt)[:, 1])


def test_tree_depth_and_min_split():
    X, y = _noisy(200, 7)
    assert DecisionTree(max_depth=1).fit(X, y).node_count == 3
    assert DecisionTree(min_samples_split=500).fit(X, y).node_count == 1


def test_tie_goes_to_negative_class():
    X = np.array([[0.0], [0.0]])
    y = np.array([0, 1])
    assert DecisionTree().fit(X, y).predict(X).tolist() == [0, 0]
    assert GaussianNaiveBayes().fit(X, y).predict(X).tolist() == [0, 0]


def test_naive_bayes_matches_gaussian_oracle():
    nb_mod = pytest.importorskip("sklearn.naive_bayes")
    X, y = _noisy(300, 8)
    ours = GaussianNaiveBayes().fit(X, y)
    ref = nb_mod.GaussianNB(var_smoothing=1e-9).fit(X, y)
    Xt, _ = _noisy(200, 9)
    jll = ref.predict_joint_log_proba(Xt)
    np.testing.assert_allclose(ours.joint_log_likelihood(Xt), jll, rtol=1e-10)


def test_label_swap_exchanges_recall_and_tnr():
    rng = np.random.default_rng(10)
    y = rng.integers(0, 2, 100)
    p = rng.integers(0, 2, 100)
    c = ConfusionCounts.from_labels(y, p)
    swapped = ConfusionCounts.from_labels(1 - y, 1 - p)
    assert recall(swapped) == c.tn / (c.tn + c.fp)


@pytest.mark.parametrize("alg", ALL)
def test_model_serialization(alg):
    X, y = _noisy(120, 11)
    model = train(LearnerSpec(alg, seed=3), X, y)
    import json
    back = learners.model_from_dict(json.loads(json.dumps(learners.model_to_dict(model))))
    Xt, _ = _noisy(80, 12)
    np.testing.assert_array_equal(predict(back, Xt), predict(model, Xt))


def test_measure_runtime():
    X, y = _noisy(100, 13)
    secs, model, preds = measure_runtime(LearnerSpec("naive_bayes"), X, y, X)
    assert secs >= 0.0 and preds.shape == (100,)


def test_tree_faster_than_forest():
    X, y = _noisy(2000, 14, d=8)
    t_dt = min(measure_runtime(LearnerSpec("decision_tree"), X, y, X)[0] for _ in range(3))
    t_rf = min(measure_runtime(LearnerSpec("random_forest"), X, y, X)[0] for _ in range(3))
    assert t_dt < t_rf
