"""Filter and embedded feature selectors: information gain, Lasso (L1), Fisher score."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, DataWarning, IndexOutOfRange, SingleClass
from .rng import keyed_rng

INFO_GAIN = "InfoGain"
LASSO_L1 = "LassoL1"
FISHER_SCORE = "FisherScore"

IG_THRESHOLD = 0.1
FISHER_TOP_K = 47
FISHER_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureRanking:
    method: str
    scores: np.ndarray
    selected: np.ndarray
    rule: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self, feature_names=None):
        d = {
            "method": self.method,
            "scores": [float(s) for s in self.scores],
            "selected": [int(i) for i in self.selected],
            "rule": self.rule,
        }
        if feature_names is not None:
            d["feature_names"] = list(feature_names)
            d["selected_names"] = [feature_names[i] for i in self.selected]
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self, feature_names=None):
        return json.dumps(self.to_dict(feature_names), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["method"], np.asarray(d["scores"], dtype=np.float64),
                   np.asarray(d["selected"], dtype=np.int64), d["rule"], d.get("extra", {}))


def entropy(counts):
    """Base-2 Shannon entropy of a vector of counts."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def bin_features(features, n_bins=10):
    """Equal-width bins on [0, 1]; values outside are clipped into the edge bins."""
    idx = np.floor(np.asarray(features) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def information_gain(table, n_bins=10, threshold=IG_THRESHOLD):
    """Per-feature entropy reduction of the label after binning (bits)."""
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    y = table.labels
    n = y.shape[0]
    h_y = entropy(np.bincount(y, minlength=2))
    scores = np.zeros(table.n_features)
    if h_y == 0.0:
        warnings.warn("single-class labels: every information gain is 0", DataWarning, stacklevel=2)
    else:
        bins = bin_features(table.features, n_bins)
        for j in range(table.n_features):
            # joint (bin, label) contingency counts
            joint = np.bincount(bins[:, j] * 2 + y, minlength=2 * n_bins).reshape(n_bins, 2)
            per_bin = joint.sum(axis=1)
            # same entropy routine as h_y, so a single occupied bin cancels exactly
            cond = math.fsum(per_bin[b] / n * entropy(joint[b]) for b in np.flatnonzero(per_bin))
            scores[j] = min(max(h_y - cond, 0.0), h_y)
    selected = np.flatnonzero(scores > threshold)
    return FeatureRanking(INFO_GAIN, scores, selected, {"kind": "threshold", "value": threshold, "n_bins": n_bins})


# --------------------------------------------------------------------------- lasso


@dataclass(frozen=True)
class LassoConfig:
    lam: float | None = None  # None: choose by k-fold CV
    max_iters: int = 1000
    tol: float = 1e-6
    seed: int = 0
    n_folds: int = 5
    n_lambdas: int = 30
    lambda_min_ratio: float = 1e-4

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be nonnegative")


@dataclass
class LassoFit:
    coef: np.ndarray
    intercept: float
    lam: float
    n_iter: int
    converged: bool
    kkt_residual: float


def _center(X, y):
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    return X - x_mean, y - y_mean, x_mean, y_mean


def lasso_lambda_max(X, y):
    """Smallest penalty at which every coefficient is zero."""
    Xc, yc, _, _ = _center(np.asarray(X, float), np.asarray(y, float))
    return float(np.abs(Xc.T @ yc).max() / X.shape[0]) if X.shape[1] else 0.0


def lasso_objective(coef, intercept, X, y, lam):
    r = y - intercept - X @ coef
    return float(r @ r / (2 * X.shape[0]) + lam * np.abs(coef).sum())


def kkt_residual(coef, gram, xty, lam):
    """Max violation of the Lasso stationarity conditions on centered data."""
    grad = xty - gram @ coef  # = X^T r / n
    nz = coef != 0
    res = np.zeros_like(coef)
    res[nz] = np.abs(grad[nz] - lam * np.sign(coef[nz]))
    res[~nz] = np.maximum(np.abs(grad[~nz]) - lam, 0.0)
    return float(res.max()) if res.size else 0.0


def _cd_gram(gram, xty, lam, max_iters, tol, coef=None):
    d = xty.shape[0]
    coef = np.zeros(d) if coef is None else coef.copy()
    diag = np.diag(gram)
    grad = xty - gram @ coef
    for it in range(1, max_iters + 1):
        for j in range(d):
            if diag[j] <= 0:
                continue
            old = coef[j]
            rho = grad[j] + diag[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / diag[j]
            if new != old:
                grad -= gram[:, j] * (new - old)
                coef[j] = new
        # grad drifts from incremental updates; refresh before testing
        grad = xty - gram @ coef
        res = kkt_residual(coef, gram, xty, lam)
        if res <= tol:
            return coef, it, True, res
    return coef, max_iters, False, kkt_residual(coef, gram, xty, lam)


def lasso_fit(X, y, lam, max_iters=1000, tol=1e-6, coef=None):
    """Cyclic coordinate descent for ``(1/2n)||y - b - Xw||^2 + lam * ||w||_1``.

    The intercept is unpenalized and handled by centering. Convergence is
    declared when the KKT residual drops to ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    Xc, yc, x_mean, y_mean = _center(X, y)
    gram = Xc.T @ Xc / n
    xty = Xc.T @ yc / n
    coef, it, ok, res = _cd_gram(gram, xty, lam, max_iters, tol, coef)
    if not ok:
        warnings.warn(f"lasso did not converge in {max_iters} sweeps (KKT residual {res:.2e})",
                      ConvergenceWarning, stacklevel=2)
    return LassoFit(coef, y_mean - float(x_mean @ coef), lam, it, ok, res)


def lasso_path(X, y, lambdas, max_iters=1000, tol=1e-6):
    fits, coef = [], None
    for lam in lambdas:
        f = lasso_fit(X, y, lam, max_iters, tol, coef)
        coef = f.coef
        fits.append(f)
    return fits


def lasso_cv_lambda(X, y, config=LassoConfig()):
    """Pick the penalty with the lowest k-fold validation MSE on a log grid."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lam_max = lasso_lambda_max(X, y)
    if lam_max == 0.0:
        return 0.0, np.array([0.0]), np.array([0.0])
    lambdas = np.geomspace(lam_max, lam_max * config.lambda_min_ratio, config.n_lambdas)
    folds = keyed_rng(config.seed, "lasso-cv").permutation(X.shape[0]) % config.n_folds
    mse = np.zeros((config.n_folds, lambdas.size))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for f in range(config.n_folds):
            tr, va = folds != f, folds == f
            for i, fit in enumerate(lasso_path(X[tr], y[tr], lambdas, config.max_iters, config.tol)):
                r = y[va] - fit.intercept - X[va] @ fit.coef
                mse[f, i] = r @ r / r.size
    mean = mse.mean(axis=0)
    return float(lambdas[int(np.argmin(mean))]), lambdas, mean


def lasso_select(table, config=LassoConfig()):
    """Squared-loss Lasso on {0,1} labels; keeps features with nonzero coefficients."""
    X, y = table.features, table.labels.astype(np.float64)
    extra = {}
    lam = config.lam
    if lam is None:
        lam, lambdas, cv_mse = lasso_cv_lambda(X, y, config)
        extra["cv_lambdas"] = [float(v) for v in lambdas]
        extra["cv_mse"] = [float(v) for v in cv_mse]
    fit = lasso_fit(X, y, lam, config.max_iters, config.tol)
    extra.update(coef=[float(c) for c in fit.coef], intercept=fit.intercept,
                 converged=fit.converged, kkt_residual=fit.kkt_residual, n_iter=fit.n_iter)
    selected = np.flatnonzero(fit.coef != 0)
    return FeatureRanking(LASSO_L1, np.abs(fit.coef), selected,
                          {"kind": "nonzero", "lambda": float(lam)}, extra)


# --------------------------------------------------------------------------- fisher


def fisher_scores(features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise SingleClass("Fisher score needs both classes present")
    mu = features.mean(axis=0)
    num = np.zeros(features.shape[1])
    den = np.zeros(features.shape[1])
    for c in classes:
        xc = features[labels == c]
        num += xc.shape[0] * (xc.mean(axis=0) - mu) ** 2
        den += xc.shape[0] * xc.var(axis=0)
    # class means of a constant column can differ from the overall mean by
    # rounding alone, which the variance floor would blow up
    num[np.ptp(features, axis=0) == 0] = 0.0
    return num / np.maximum(den, FISHER_VAR_FLOOR)


def top_k(scores, k):
    """Indices of the k largest scores, ties to the lower index, returned sorted."""
    k = min(int(k), scores.shape[0])
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return np.sort(order[:k])


def fisher_score(table, k=FISHER_TOP_K):
    scores = fisher_scores(table.features, table.labels)
    return FeatureRanking(FISHER_SCORE, scores, top_k(scores, k), {"kind": "top_k", "k": int(k)})


def apply_selection(table, ranking):
    idx = np.asarray(ranking.selected if isinstance(ranking, FeatureRanking) else ranking, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.n_features):
        raise IndexOutOfRange(f"selection {idx.tolist()} out of range for {table.n_features} features")
    names = tuple(table.feature_names[i] for i in idx)
    return table.with_features(table.features[:, idx], names)
