"""Random forest: bagged CART trees with per-split feature subsampling."""
from __future__ import annotations

import math

import numpy as np

from ..rng import keyed_rng
from .base import Learner, check_xy, register
from .tree import FlatTree, PackedTrees, grow_classification_tree


def _n_candidates(max_features, d):
    if max_features in (None, "all"):
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d)))
    if isinstance(max_features, float):
        return max(1, int(max_features * d))
    return max(1, min(int(max_features), d))


@register
class RandomForest(Learner):
    def __init__(self, n_trees=100, max_features="sqrt", bootstrap=True, max_depth=None,
                 min_samples_leaf=1, seed=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed

    def fit(self, X, y):
        X, y = check_xy(X, y)
        n, d = X.shape
        m = _n_candidates(self.max_features, d)
        depth = self.max_depth if self.max_depth is not None else np.iinfo(np.int64).max
        self.trees_ = []
        self._packed = None
        for t in range(self.n_trees):
            rows = keyed_rng(self.seed, "rf-bootstrap", t).integers(0, n, n) if self.bootstrap else np.arange(n)
            if m == d:
                sampler = None
            else:
                rng = keyed_rng(self.seed, "rf-features", t)
                def sampler(rng=rng):
                    return np.sort(rng.choice(d, size=m, replace=False))
            self.trees_.append(grow_classification_tree(X[rows], y[rows], depth, self.min_samples_leaf, sampler))
        self.n_features_ = d
        return self

    def tree_probas(self, X):
        X = np.asarray(X, dtype=np.float64)
        if getattr(self, "_packed", None) is None:
            self._packed = PackedTrees(self.trees_)
        return self._packed.predict_values(X)

    def predict_proba(self, X):
        return self.tree_probas(X).mean(axis=0)

    def get_state(self):
        return {"n_features": self.n_features_, "trees": [t.get_state() for t in self.trees_]}

    def set_state(self, state):
        self.n_features_ = int(state["n_features"])
        self.trees_ = [FlatTree.from_state(t) for t in state["trees"]]
        self._packed = None
        return self


def train_random_forest(table, n_trees=100, max_features="sqrt", bootstrap=True, seed=0, **kw):
    return RandomForest(n_trees, max_features, bootstrap, seed=seed, **kw).fit_table(table)
