"""CART classification trees (Gini) and the flat-array tree representation."""
from __future__ import annotations

import numpy as np

from .base import Learner, check_xy, register


class TreeArrays:
    """Flat arrays describing a binary tree; leaves have ``feature == -1``.

    Rows go left when ``x[feature] <= threshold``.
    """

    FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "depth")

    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.n_samples, self.depth = [], [], []
        self.counts = []

    def add(self, value, n_samples, depth, counts=(0.0, 0.0)):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.n_samples.append(int(n_samples))
        self.depth.append(int(depth))
        self.counts.append(tuple(counts))
        return len(self.feature) - 1

    def finalize(self):
        t = FlatTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            depth=np.asarray(self.depth, dtype=np.int64),
            counts=np.asarray(self.counts, dtype=np.float64).reshape(-1, 2),
        )
        return t


class FlatTree:
    def __init__(self, feature, threshold, left, right, value, n_samples, depth, counts):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.n_samples = n_samples
        self.depth = depth
        self.counts = counts

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def max_depth(self):
        return int(self.depth.max())

    def apply(self, X):
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            r, n, f = rows[internal], node[internal], feat[internal]
            go_left = X[r, f] <= self.threshold[n]
            node[internal] = np.where(go_left, self.left[n], self.right[n])

    def predict_value(self, X):
        return self.value[self.apply(X)]

    def used_features(self):
        return np.unique(self.feature[self.feature >= 0])

    def get_state(self):
        return {k: getattr(self, k) for k in (*TreeArrays.FIELDS, "counts")}

    @classmethod
    def from_state(cls, state):
        return cls(**{k: np.asarray(v) for k, v in state.items()})


class PackedTrees:
    """Several flat trees concatenated so that all of them are walked in one pass."""

    def __init__(self, trees):
        sizes = [t.n_nodes for t in trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        shift = lambda a, o: np.where(a >= 0, a + o, -1)  # noqa: E731
        self.roots = offsets
        self.feature = np.concatenate([t.feature for t in trees])
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.left = np.concatenate([shift(t.left, o) for t, o in zip(trees, offsets)])
        self.right = np.concatenate([shift(t.right, o) for t, o in zip(trees, offsets)])
        self.value = np.concatenate([t.value for t in trees])

    def predict_values(self, X):
        """Leaf value of every tree for every row, shape ``(n_trees, n_rows)``."""
        n = X.shape[0]
        node = np.repeat(self.roots, n)
        rows = np.tile(np.arange(n), self.roots.size)
        while True:
            feat = self.feature[node]
            internal = np.flatnonzero(feat >= 0)
            if internal.size == 0:
                return self.value[node].reshape(self.roots.size, n)
            nd = node[internal]
            go_left = X[rows[internal], feat[internal]] <= self.threshold[nd]
            node[internal] = np.where(go_left, self.left[nd], self.right[nd])


def best_gini_split(Xs, y, min_samples_leaf=1):
    """Exhaustive best split over the columns of ``Xs`` by weighted child Gini.

    Candidate thresholds are midpoints between consecutive distinct values.
    Returns ``(column, threshold, weighted_gini)`` or ``None`` if no split is
    admissible. Ties go to the earlier column, then to the lower threshold.
    """
    n = y.shape[0]
    if n < 2 * min_samples_leaf or n < 2:
        return None
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]
    left_pos = np.cumsum(ys, axis=0)[:-1]  # row i: first i+1 samples go left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    total_pos = left_pos[-1] + ys[-1]
    right_pos = total_pos - left_pos
    pl = left_pos / n_left
    pr = right_pos / n_right
    weighted = (n_left * 2 * pl * (1 - pl) + n_right * 2 * pr * (1 - pr)) / n
    valid = xs[:-1] < xs[1:]
    valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not valid.any():
        return None
    weighted = np.where(valid, weighted, np.inf)
    # column-major argmin: feature order first, then position (ascending threshold)
    best_per_feat = weighted.min(axis=0)
    fi = int(np.argmin(best_per_feat))
    pos = int(np.argmin(weighted[:, fi]))
    lo, hi = xs[pos, fi], xs[pos + 1, fi]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return fi, float(thr), float(weighted[pos, fi])


def grow_classification_tree(X, y, max_depth, min_samples_leaf, feature_sampler=None):
    """Greedy top-down CART. ``feature_sampler()`` yields candidate columns per node."""
    arrays = TreeArrays()
    all_features = np.arange(X.shape[1])

    def leaf(idx, depth):
        n1 = float(y[idx].sum())
        n = idx.shape[0]
        return arrays.add(n1 / n, n, depth, (n - n1, n1))

    root_idx = np.arange(X.shape[0])
    root = leaf(root_idx, 0)
    stack = [(root, root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        yi = y[idx]
        n1 = yi.sum()
        if depth >= max_depth or n1 == 0 or n1 == idx.shape[0]:
            continue
        feats = all_features if feature_sampler is None else feature_sampler()
        split = best_gini_split(X[np.ix_(idx, feats)], yi, min_samples_leaf)
        if split is None:
            continue
        col, thr, _ = split
        f = int(feats[col])
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        left = leaf(li, depth + 1)
        right = leaf(ri, depth + 1)
        arrays.feature[node] = f
        arrays.threshold[node] = thr
        arrays.left[node] = left
        arrays.right[node] = right
        # right pushed first so the left subtree is expanded first
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return arrays.finalize()


@register
class DecisionTree(Learner):
    def __init__(self, max_depth=10, min_samples_leaf=5):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X, y = check_xy(X, y)
        self.tree_ = grow_classification_tree(X, y, self.max_depth, self.min_samples_leaf)
        self.n_features_ = X.shape[1]
        return self

    def predict_proba(self, X):
        return self.tree_.predict_value(np.asarray(X, dtype=np.float64))

    def get_state(self):
        return {"n_features": self.n_features_, "tree": self.tree_.get_state()}

    def set_state(self, state):
        self.n_features_ = int(state["n_features"])
        self.tree_ = FlatTree.from_state(state["tree"])
        return self


def train_decision_tree(table, max_depth=10, min_samples_leaf=5):
    return DecisionTree(max_depth, min_samples_leaf).fit_table(table)
