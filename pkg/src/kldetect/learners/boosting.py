"""AdaBoost over decision stumps and second-order gradient-boosted trees."""
from __future__ import annotations

import math

import numpy as np

from ..rng import keyed_rng
from .base import Learner, check_xy, register, sigmoid
from .tree import FlatTree, PackedTrees, TreeArrays

EPS_FLOOR = 1e-10
MAX_DISCARDS = 10


def stage_weight(eps):
    """AdaBoost stage weight 0.5 * ln((1 - eps) / eps), with eps floored away from 0."""
    eps = min(max(eps, EPS_FLOOR), 1.0 - EPS_FLOOR)
    return 0.5 * math.log((1.0 - eps) / eps)


def fit_stump(X_sorted_idx, X, y_pm, w):
    """Weighted-error-minimising stump over every feature.

    ``h(x) = polarity if x[feature] > threshold else -polarity``. A threshold of
    ``-inf`` is the constant stump. Returns ``(feature, threshold, polarity, error)``.
    """
    n, d = X.shape
    wp = np.where(y_pm > 0, w, 0.0)
    wn = w - wp
    total_p, total_n = wp.sum(), wn.sum()
    # constant stumps: predict polarity everywhere
    best = (0, -np.inf, 1, total_n) if total_n <= total_p else (0, -np.inf, -1, total_p)
    cpos = np.cumsum(wp[X_sorted_idx], axis=0)[:-1]
    cneg = np.cumsum(wn[X_sorted_idx], axis=0)[:-1]
    xs = np.take_along_axis(X, X_sorted_idx, axis=0)
    valid = xs[:-1] < xs[1:]
    # polarity +1: left (<= thr) predicted -1, so errors are left positives + right negatives
    err_plus = cpos + (total_n - cneg)
    err_minus = cneg + (total_p - cpos)
    err_plus = np.where(valid, err_plus, np.inf)
    err_minus = np.where(valid, err_minus, np.inf)
    for err, pol in ((err_plus, 1), (err_minus, -1)):
        per_feat = err.min(axis=0)
        f = int(np.argmin(per_feat))
        if per_feat[f] < best[3]:
            pos = int(np.argmin(err[:, f]))
            lo, hi = xs[pos, f], xs[pos + 1, f]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (f, float(thr), pol, float(per_feat[f]))
    return best


def stump_predict(X, feature, threshold, polarity):
    return np.where(X[:, feature] > threshold, polarity, -polarity).astype(np.float64)


@register
class AdaBoost(Learner):
    """Discrete (two-class SAMME) AdaBoost with depth-1 stumps.

    Probabilities come from a logistic link on the margin, ``sigmoid(2 F(x))``;
    treat them as ranking scores rather than calibrated probabilities.
    """

    def __init__(self, n_rounds=100, seed=0):
        self.n_rounds = n_rounds
        self.seed = seed

    def fit(self, X, y):
        X, y = check_xy(X, y, both_classes=True)
        n = X.shape[0]
        y_pm = np.where(y == 1, 1.0, -1.0)
        order = np.argsort(X, axis=0, kind="stable")
        w = np.full(n, 1.0 / n)
        feats, thrs, pols, alphas = [], [], [], []
        self.errors_, self.weight_sums_, self.train_errors_ = [], [], []
        margin = np.zeros(n)
        discards = 0
        for _ in range(self.n_rounds):
            f, thr, pol, eps = fit_stump(order, X, y_pm, w)
            self.errors_.append(eps)
            if eps >= 0.5:
                discards += 1
                if discards >= MAX_DISCARDS:
                    break
                continue
            discards = 0
            alpha = stage_weight(eps)
            h = stump_predict(X, f, thr, pol)
            feats.append(f)
            thrs.append(thr)
            pols.append(pol)
            alphas.append(alpha)
            margin += alpha * h
            self.train_errors_.append(float(np.mean(np.where(margin > 0, 1, 0) != y)))
            if eps <= EPS_FLOOR:
                break
            w = w * np.exp(-alpha * y_pm * h)
            w /= w.sum()
            self.weight_sums_.append(float(w.sum()))
        self.features_ = np.asarray(feats, dtype=np.int64)
        self.thresholds_ = np.asarray(thrs, dtype=np.float64)
        self.polarities_ = np.asarray(pols, dtype=np.float64)
        self.alphas_ = np.asarray(alphas, dtype=np.float64)
        self.n_features_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        F = np.zeros(X.shape[0])
        for f, t, p, a in zip(self.features_, self.thresholds_, self.polarities_, self.alphas_):
            F += a * np.where(X[:, f] > t, p, -p)
        return F

    def predict_proba(self, X):
        return sigmoid(2.0 * self.decision_function(X))

    def get_state(self):
        return {"n_features": self.n_features_, "features": self.features_, "thresholds": self.thresholds_,
                "polarities": self.polarities_, "alphas": self.alphas_}

    def set_state(self, state):
        self.n_features_ = int(state["n_features"])
        self.features_ = np.asarray(state["features"], dtype=np.int64)
        self.thresholds_ = np.asarray(state["thresholds"], dtype=np.float64)
        self.polarities_ = np.asarray(state["polarities"], dtype=np.float64)
        self.alphas_ = np.asarray(state["alphas"], dtype=np.float64)
        return self


def train_adaboost(table, n_rounds=100, seed=0):
    return AdaBoost(n_rounds, seed).fit_table(table)


# --------------------------------------------------------------------------- gradient boosting


def logistic_loss(margin, y):
    """Per-row binomial deviance ``log(1 + e^m) - y m``."""
    margin = np.asarray(margin, dtype=np.float64)
    return np.logaddexp(0.0, margin) - y * margin


def logistic_grad_hess(margin, y):
    p = sigmoid(margin)
    return p - y, p * (1.0 - p)


def squared_grad_hess(margin, y):
    return margin - y, np.ones_like(margin)


def leaf_weight(G, H, l2):
    return -G / (H + l2)


def make_bins(X, max_bins=256):
    """Per-feature split candidates; ``bin(x) <= b`` iff ``x <= edges[b]``."""
    edges = []
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        if u.size <= max_bins:
            e = u[:-1] + (u[1:] - u[:-1]) / 2.0
        else:
            q = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
            e = np.unique(q)
        edges.append(e)
    return edges


def apply_bins(X, edges):
    B = np.empty(X.shape, dtype=np.int32)
    for j, e in enumerate(edges):
        B[:, j] = np.searchsorted(e, X[:, j], side="left")
    return B


def grow_boosting_tree(B, edges, g, h, max_depth, l2, min_child_weight, learning_rate, n_bins):
    d = B.shape[1]
    n_edges = np.array([e.size for e in edges])
    offsets = np.arange(d) * n_bins
    arrays = TreeArrays()
    root_idx = np.arange(B.shape[0])

    def leaf(idx, depth):
        G, H = g[idx].sum(), h[idx].sum()
        return arrays.add(learning_rate * leaf_weight(G, H, l2), idx.size, depth), G, H

    root, G0, H0 = leaf(root_idx, 0)
    stack = [(root, root_idx, 0, G0, H0)]
    while stack:
        node, idx, depth, G, H = stack.pop()
        if depth >= max_depth or idx.size < 2:
            continue
        flat = (B[idx] + offsets).ravel()
        gh = np.bincount(flat, weights=np.repeat(g[idx], d), minlength=d * n_bins).reshape(d, n_bins)
        hh = np.bincount(flat, weights=np.repeat(h[idx], d), minlength=d * n_bins).reshape(d, n_bins)
        GL = np.cumsum(gh, axis=1)[:, :-1]
        HL = np.cumsum(hh, axis=1)[:, :-1]
        GR, HR = G - GL, H - HL
        gain = GL ** 2 / (HL + l2) + GR ** 2 / (HR + l2) - G ** 2 / (H + l2)
        ok = (HL >= min_child_weight) & (HR >= min_child_weight)
        ok &= np.arange(n_bins - 1)[None, :] < n_edges[:, None]
        gain = np.where(ok, gain, -np.inf)
        f, b = np.unravel_index(int(np.argmax(gain)), gain.shape)
        if not gain[f, b] > 1e-12:
            continue
        go_left = B[idx, f] <= b
        li, ri = idx[go_left], idx[~go_left]
        left, GLs, HLs = leaf(li, depth + 1)
        right, GRs, HRs = leaf(ri, depth + 1)
        arrays.feature[node] = int(f)
        arrays.threshold[node] = float(edges[f][b])
        arrays.left[node] = left
        arrays.right[node] = right
        stack.append((right, ri, depth + 1, GRs, HRs))
        stack.append((left, li, depth + 1, GLs, HLs))
    return arrays.finalize()


@register
class GradientBoostedTrees(Learner):
    """Boosted regression trees with Newton leaf values ``-G / (H + l2)``.

    ``loss="squared"`` is a debugging mode that boosts on squared error and
    clips the margin into [0, 1] as its probability.
    """

    def __init__(self, n_rounds=200, learning_rate=0.1, max_depth=6, l2=1.0, min_child_weight=1.0,
                 max_bins=256, subsample=1.0, loss="logistic", base_score=None, seed=0):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.l2 = l2
        self.min_child_weight = min_child_weight
        self.max_bins = max_bins
        self.subsample = subsample
        self.loss = loss
        self.base_score = base_score
        self.seed = seed

    def fit(self, X, y):
        X, y = check_xy(X, y, both_classes=self.loss == "logistic")
        yf = y.astype(np.float64)
        if self.base_score is not None:
            base = float(self.base_score)
        elif self.loss == "logistic":
            prior = yf.mean()
            base = math.log(prior / (1.0 - prior))
        else:
            base = float(yf.mean())
        grad_hess = logistic_grad_hess if self.loss == "logistic" else squared_grad_hess
        edges = make_bins(X, self.max_bins)
        B = apply_bins(X, edges)
        n_bins = max([e.size for e in edges] + [0]) + 1
        margin = np.full(X.shape[0], base)
        self.trees_ = []
        self._packed = None
        for r in range(self.n_rounds):
            g, h = grad_hess(margin, yf)
            if self.subsample < 1.0:
                keep = keyed_rng(self.seed, "gbt-rows", r).random(X.shape[0]) < self.subsample
                g, h = np.where(keep, g, 0.0), np.where(keep, h, 0.0)
            tree = grow_boosting_tree(B, edges, g, h, self.max_depth, self.l2, self.min_child_weight,
                                      self.learning_rate, n_bins)
            margin += tree.predict_value(X)
            self.trees_.append(tree)
        self.base_margin_ = base
        self.n_features_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        F = np.full(X.shape[0], self.base_margin_)
        if not self.trees_:
            return F
        if getattr(self, "_packed", None) is None:
            self._packed = PackedTrees(self.trees_)
        # summed tree by tree, in fit order
        for v in self._packed.predict_values(X):
            F += v
        return F

    def predict_proba(self, X):
        F = self.decision_function(X)
        if self.loss == "logistic":
            return sigmoid(F)
        return np.clip(F, 0.0, 1.0)

    def get_state(self):
        return {"n_features": self.n_features_, "base_margin": self.base_margin_,
                "trees": [t.get_state() for t in self.trees_]}

    def set_state(self, state):
        self.n_features_ = int(state["n_features"])
        self.base_margin_ = float(state["base_margin"])
        self.trees_ = [FlatTree.from_state(t) for t in state["trees"]]
        self._packed = None
        return self


def train_gradient_boosted_trees(table, n_rounds=200, learning_rate=0.1, max_depth=6, l2=1.0, seed=0, **kw):
    return GradientBoostedTrees(n_rounds, learning_rate, max_depth, l2, seed=seed, **kw).fit_table(table)
