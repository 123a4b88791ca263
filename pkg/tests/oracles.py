"""Independent reference computations used as test oracles.

Each oracle is written in the most direct form available (loops, Counter,
exhaustive enumeration) and shares no code with the package.
"""
import itertools
import math
from collections import Counter

import numpy as np


def pair_auc(labels, scores):
    """Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie), by counting pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def pair_auc_fast(labels, scores):
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=float)
    p, n = s[y == 1], s[y == 0]
    gt = (p[:, None] > n[None, :]).sum()
    eq = (p[:, None] == n[None, :]).sum()
    return (gt + 0.5 * eq) / (p.size * n.size)


def entropy_bits(labels):
    n = len(labels)
    return -sum(c / n * math.log2(c / n) for c in Counter(labels).values())


def info_gain(column, labels, n_bins):
    bins = [min(int(math.floor(v * n_bins)), n_bins - 1) for v in column]
    bins = [max(b, 0) for b in bins]
    n = len(labels)
    cond = 0.0
    for b in set(bins):
        sub = [y for bb, y in zip(bins, labels) if bb == b]
        cond += len(sub) / n * entropy_bits(sub)
    return entropy_bits(list(labels)) - cond


def fisher(column, labels):
    col = [float(v) for v in column]
    mu = sum(col) / len(col)
    num = den = 0.0
    for c in set(labels):
        xs = [v for v, y in zip(col, labels) if y == c]
        m = sum(xs) / len(xs)
        var = sum((v - m) ** 2 for v in xs) / len(xs)
        num += len(xs) * (m - mu) ** 2
        den += len(xs) * var
    return num / den if den > 0 else (0.0 if num == 0 else math.inf)


def knn_brute(points, i, k):
    """Indices whose distance to point i is within the k-th smallest.

    Distances within 1e-12 of the k-th are treated as ties, since a tie in
    exact arithmetic can round either way.
    """
    d = [(float(np.sum((points[j] - points[i]) ** 2)), j) for j in range(len(points)) if j != i]
    d.sort()
    kth = d[k - 1][0]
    return {j for dist, j in d if dist <= kth + 1e-12}


def gini_split_brute(X, y, min_leaf=1):
    """Best (feature, threshold, weighted gini) by trying every feature and midpoint."""
    n = len(y)

    def gini(lbl):
        if not lbl:
            return 0.0
        p = sum(lbl) / len(lbl)
        return 1.0 - p * p - (1 - p) * (1 - p)

    best = None
    for j in range(X.shape[1]):
        vals = sorted(set(X[:, j].tolist()))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            left = [int(y[i]) for i in range(n) if X[i, j] <= t]
            right = [int(y[i]) for i in range(n) if X[i, j] > t]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            g = (len(left) * gini(left) + len(right) * gini(right)) / n
            if best is None or g < best[2] - 1e-15:
                best = (j, t, g)
    return best


def shapley_brute(f, x, background):
    """Exact interventional Shapley values straight from the permutation-free subset formula."""
    m = len(x)

    def v(S):
        Z = np.array(background, dtype=float)
        for j in S:
            Z[:, j] = x[j]
        return float(np.mean(f(Z)))

    phi = []
    for j in range(m):
        others = [i for i in range(m) if i != j]
        total = 0.0
        for r in range(m):
            for S in itertools.combinations(others, r):
                w = math.factorial(r) * math.factorial(m - r - 1) / math.factorial(m)
                total += w * (v(S + (j,)) - v(S))
        phi.append(total)
    return np.array(phi), v(()), v(tuple(range(m)))


def central_difference(fun, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g


def lasso_grid_min(X, y, lam, lo=-3.0, hi=3.0, steps=(601, 201, 201)):
    """Minimize the 2-feature Lasso objective by successively refined dense grids.

    The intercept is profiled out exactly (it is the mean residual).
    """
    n = X.shape[0]
    ca, cb = (lo + hi) / 2, (lo + hi) / 2
    half = (hi - lo) / 2
    best = None
    for s in steps:
        a = np.linspace(ca - half, ca + half, s)
        b = np.linspace(cb - half, cb + half, s)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = np.stack([A.ravel(), B.ravel()], axis=1)
        R = y[None, :] - W @ X.T
        R -= R.mean(axis=1, keepdims=True)
        obj = (R ** 2).sum(axis=1) / (2 * n) + lam * np.abs(W).sum(axis=1)
        k = int(np.argmin(obj))
        best = (float(obj[k]), W[k])
        ca, cb = W[k]
        half = 2 * (a[1] - a[0])
    return best
