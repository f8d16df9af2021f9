"""CART-style Gini decision tree and a bagged random forest built on it."""
import math

import numpy as np

from metaselect import kernels


class DecisionTree:
    """Binary Gini tree.

    Parameters
    ----------
    max_depth : int or None
        Depth limit; None grows until leaves are pure or unsplittable.
    min_samples_split : int
        Smallest node that may be split.
    max_features : int or None
        Non-constant features examined per split; None means all of them.
    seed : int
        Drives the per-node feature visiting order, which decides ties.
    """

    def __init__(self, max_depth=None, min_samples_split=2, max_features=None,
                 seed=0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.seed = seed

    def fit(self, X, y, samples=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if samples is None:
            samples = np.arange(X.shape[0], dtype=np.int64)
        max_features = X.shape[1] if self.max_features is None else self.max_features
        (self.feature_, self.threshold_, self.left_, self.right_,
         self.value_, self.n_node_samples_) = kernels.build_tree(
            X, y, samples, int(max_features), int(self.min_samples_split),
            -1 if self.max_depth is None else int(self.max_depth),
            int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        return self

    @property
    def node_count(self):
        return self.feature_.shape[0]

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        leaves = kernels.tree_apply(self.feature_, self.threshold_, self.left_,
                                    self.right_, X)
        return self.value_[leaves]

    def predict(self, X):
        # ties go to the negative class
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def get_state(self):
        return {
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
        }

    @classmethod
    def from_state(cls, state):
        tree = cls()
        tree.feature_ = np.asarray(state["feature"], dtype=np.int64)
        tree.threshold_ = np.asarray(state["threshold"], dtype=np.float64)
        tree.left_ = np.asarray(state["left"], dtype=np.int64)
        tree.right_ = np.asarray(state["right"], dtype=np.int64)
        tree.value_ = np.asarray(state["value"], dtype=np.float64)
        return tree


class RandomForest:
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Each tree sees ``n`` rows drawn with replacement and examines
    ``ceil(sqrt(d))`` features per split unless ``max_features`` says
    otherwise.  Class probabilities are averaged across trees.
    """

    def __init__(self, n_estimators=100, max_features="sqrt", bootstrap=True,
                 min_samples_split=2, max_depth=None, seed=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_samples_split = min_samples_split
        self.max_depth = max_depth
        self.seed = seed

    def _n_features(self, d):
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(d)))
        if self.max_features is None:
            return d
        return int(self.max_features)

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = X.shape[0]
        rng = np.random.default_rng(self.seed)
        k = self._n_features(X.shape[1])
        self.trees_ = []
        for _ in range(self.n_estimators):
            samples = (rng.integers(0, n, size=n) if self.bootstrap
                       else np.arange(n))
            tree_seed = int(rng.integers(0, 2**63 - 1))
            tree = DecisionTree(max_depth=self.max_depth,
                                min_samples_split=self.min_samples_split,
                                max_features=k, seed=tree_seed)
            self.trees_.append(tree.fit(X, y, samples=samples))
        return self

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += tree.predict_proba(X)
        return total / len(self.trees_)

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def get_state(self):
        return {"trees": [t.get_state() for t in self.trees_]}

    @classmethod
    def from_state(cls, state):
        forest = cls(n_estimators=len(state["trees"]))
        forest.trees_ = [DecisionTree.from_state(s) for s in state["trees"]]
        return forest
