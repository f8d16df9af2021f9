"""Uniform train/predict interface over the five candidate classifiers.

Labels are 0/1 integer arrays with 1 marking the positive (attack) class.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from metaselect.errors import DataError, SchemaError
from metaselect.learners.bayes import GaussianNaiveBayes
from metaselect.learners.svm import KernelSVC, KernelSVR
from metaselect.learners.tree import DecisionTree, RandomForest

MODEL_FORMAT_VERSION = 1

DEFAULT_HYPERPARAMS = {
    "decision_tree": {"criterion": "gini", "max_depth": None, "min_samples_split": 2},
    "random_forest": {"criterion": "gini", "n_estimators": 100, "max_features": "sqrt",
                      "bootstrap": True, "max_depth": None, "min_samples_split": 2},
    "naive_bayes": {"var_smoothing": 1e-9},
    "kernel_svc": {"kernel": "rbf", "C": 1.0, "gamma": "scale", "tol": 1e-3,
                   "cache_mb": 200.0},
    "kernel_svr": {"kernel": "rbf", "C": 1.0, "gamma": "scale", "epsilon": 0.1,
                   "tol": 1e-3, "threshold": 0.5, "cache_mb": 200.0},
}

ALGORITHMS = tuple(DEFAULT_HYPERPARAMS)

DISPLAY_NAMES = {
    "decision_tree": "Decision Tree",
    "random_forest": "Random Forest",
    "naive_bayes": "Naive Bayes",
    "kernel_svc": "SVM",
    "kernel_svr": "SVR",
}

_FIXED = {"criterion": "gini", "kernel": "rbf"}


@dataclass(frozen=True)
class LearnerSpec:
    algorithm_id: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm_id not in DEFAULT_HYPERPARAMS:
            raise ValueError(f"unknown algorithm {self.algorithm_id!r}")
        allowed = DEFAULT_HYPERPARAMS[self.algorithm_id]
        for key, val in self.hyperparams.items():
            if key not in allowed:
                raise ValueError(f"{self.algorithm_id} has no hyperparameter {key!r}")
            if key in _FIXED and val != _FIXED[key]:
                raise ValueError(f"{key}={val!r} not supported, only {_FIXED[key]!r}")
        merged = {**allowed, **self.hyperparams}
        for key in ("C", "tol", "epsilon", "var_smoothing", "cache_mb"):
            if key in merged and not merged[key] > 0:
                raise ValueError(f"{key} must be positive")
        for key in ("n_estimators", "min_samples_split"):
            if key in merged and not (isinstance(merged[key], int) and merged[key] >= 1):
                raise ValueError(f"{key} must be a positive integer")
        object.__setattr__(self, "hyperparams", merged)


@dataclass
class TrainedModel:
    spec: LearnerSpec
    estimator: object
    n_features: int


def _as_array(X):
    values = getattr(X, "values", X)
    return np.ascontiguousarray(values, dtype=np.float64)


def _build(spec):
    hp = spec.hyperparams
    algo = spec.algorithm_id
    if algo == "decision_tree":
        return DecisionTree(max_depth=hp["max_depth"],
                            min_samples_split=hp["min_samples_split"], seed=spec.seed)
    if algo == "random_forest":
        return RandomForest(n_estimators=hp["n_estimators"],
                            max_features=hp["max_features"], bootstrap=hp["bootstrap"],
                            min_samples_split=hp["min_samples_split"],
                            max_depth=hp["max_depth"], seed=spec.seed)
    if algo == "naive_bayes":
        return GaussianNaiveBayes(var_smoothing=hp["var_smoothing"])
    if algo == "kernel_svc":
        return KernelSVC(C=hp["C"], gamma=hp["gamma"], tol=hp["tol"],
                         cache_mb=hp["cache_mb"])
    return KernelSVR(C=hp["C"], gamma=hp["gamma"], epsilon=hp["epsilon"],
                     tol=hp["tol"], threshold=hp["threshold"], cache_mb=hp["cache_mb"])


def train(spec, X, y):
    """Fit the learner described by ``spec`` on matrix ``X`` and 0/1 labels ``y``."""
    X = _as_array(X)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"X has shape {X.shape} but y has {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise DataError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise DataError("training matrix contains non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0/1")
    if np.unique(y).shape[0] != 2:
        raise DataError("training labels contain a single class")
    y = y.astype(np.int64)
    estimator = _build(spec)
    estimator.fit(X, y)
    return TrainedModel(spec=spec, estimator=estimator, n_features=X.shape[1])


def predict(model, X):
    """Predict 0/1 labels; kernel_svr output is thresholded at 0.5 by default."""
    X = _as_array(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaError(
            f"model expects {model.n_features} columns, got {X.shape[-1] if X.ndim else 0}")
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return model.estimator.predict(X)


def measure_runtime(spec, train_X, train_y, test_X):
    """Wall-clock seconds to train on one set and predict another.

    Returns ``(seconds, model, predictions)`` so callers can reuse the work.
    """
    start = time.perf_counter()
    model = train(spec, train_X, train_y)
    preds = predict(model, test_X)
    return max(time.perf_counter() - start, 0.0), model, preds


_CLASSES = {
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "naive_bayes": GaussianNaiveBayes,
    "kernel_svc": KernelSVC,
    "kernel_svr": KernelSVR,
}


def model_to_dict(model):
    """Versioned, JSON-ready audit record of a trained model."""
    return {
        "format": "metaselect.trained_model",
        "version": MODEL_FORMAT_VERSION,
        "algorithm_id": model.spec.algorithm_id,
        "hyperparams": model.spec.hyperparams,
        "seed": model.spec.seed,
        "n_features": model.n_features,
        "state": model.estimator.get_state(),
    }


def model_from_dict(doc):
    if doc.get("format") != "metaselect.trained_model":
        raise ValueError("not a metaselect trained-model document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported trained-model version {doc.get('version')}")
    spec = LearnerSpec(doc["algorithm_id"], dict(doc["hyperparams"]), doc["seed"])
    estimator = _CLASSES[spec.algorithm_id].from_state(doc["state"])
    return TrainedModel(spec=spec, estimator=estimator, n_features=doc["n_features"])
