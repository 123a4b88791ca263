"""RBF-kernel support vector classifier trained by SMO on the dual."""
from __future__ import annotations

import math
import warnings

import numpy as np

from ..errors import ConvergenceWarning, TrainingSetTooLarge
from ..rng import keyed_rng
from .base import Learner, check_xy, register

MAX_TRAIN_ROWS = 5000
TAU = 1e-12


def rbf_kernel(A, B, gamma):
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    d2 = np.maximum(sa[:, None] + sb[None, :] - 2.0 * A @ B.T, 0.0)
    return np.exp(-gamma * d2)


def dual_objective(alpha, y_pm, K):
    """``sum(alpha) - 1/2 alpha^T Q alpha`` with ``Q = y y^T * K`` (to be maximised)."""
    ay = alpha * y_pm
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo(K, y_pm, C, tol=1e-3, max_iter=100_000):
    """Sequential minimal optimisation with second-order working-set selection.

    Solves ``min 1/2 a^T Q a - e^T a`` s.t. ``0 <= a <= C``, ``y^T a = 0``.
    Returns ``(alpha, rho, converged, n_iter, kkt_gap)``; the decision function
    is ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = K.shape[0]
    Q = K * np.outer(y_pm, y_pm)
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y_pm > 0
    converged = False
    gap = np.inf
    it = 0
    for it in range(max_iter):
        below_c, above_0 = alpha < C, alpha > 0
        up = (pos & below_c) | (~pos & above_0)
        low = (pos & above_0) | (~pos & below_c)
        minus_yg = -y_pm * G
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        cand_up = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(cand_up))
        g_max = cand_up[i]
        g_min = np.where(low, minus_yg, np.inf).min()
        gap = g_max - g_min
        if gap < tol:
            converged = True
            break
        b = g_max - minus_yg
        ok = low & (b > 0)
        a = QD[i] + QD - 2.0 * y_pm[i] * y_pm * Q[i]
        a = np.where(a > 0, a, TAU)
        score = np.where(ok, -(b * b) / a, np.inf)
        j = int(np.argmin(score))

        ai_old, aj_old = alpha[i], alpha[j]
        if y_pm[i] != y_pm[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        G += Q[:, i] * (alpha[i] - ai_old) + Q[:, j] * (alpha[j] - aj_old)

    yg = y_pm * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_ub, at_lb = alpha >= C, alpha <= 0
        ub_mask = (pos & at_lb) | (~pos & at_ub)
        lb_mask = (pos & at_ub) | (~pos & at_lb)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0) if np.isfinite(ub + lb) else 0.0
    return alpha, rho, converged, it, float(gap)


def platt_fit(dec, y, max_iter=100, min_step=1e-10, sigma=1e-12):
    """Platt sigmoid ``P(1|f) = 1 / (1 + exp(A f + B))`` by regularised-target Newton."""
    prior1 = float((y == 1).sum())
    prior0 = float(y.shape[0] - prior1)
    hi, lo = (prior1 + 1) / (prior1 + 2), 1.0 / (prior0 + 2)
    t = np.where(y == 1, hi, lo)
    A, B = 0.0, math.log((prior0 + 1) / (prior1 + 1))

    def objective(A, B):
        f = dec * A + B
        return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-np.abs(f))),
                                     (t - 1) * f + np.log1p(np.exp(-np.abs(f))))))

    fval = objective(A, B)
    for _ in range(max_iter):
        f = dec * A + B
        p = np.where(f >= 0, np.exp(-np.abs(f)) / (1 + np.exp(-np.abs(f))), 1 / (1 + np.exp(-np.abs(f))))
        q = 1 - p
        d2 = p * q
        h11 = sigma + float((dec * dec * d2).sum())
        h22 = sigma + float(d2.sum())
        h21 = float((dec * d2).sum())
        d1 = t - p
        g1, g2 = float((dec * d1).sum()), float(d1.sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return A, B


def stratified_subsample(y, size, seed):
    """Row indices of a class-proportional subsample of ``size`` rows."""
    rng = keyed_rng(seed, "svm-subsample")
    keep = []
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        k = int(round(size * rows.size / y.shape[0]))
        keep.append(rng.choice(rows, size=min(max(k, 1), rows.size), replace=False))
    return np.sort(np.concatenate(keep))


@register
class SVC(Learner):
    """Soft-margin SVM with an RBF kernel and Platt-scaled probabilities.

    Training cost grows quadratically, so fitting more than ``max_train_rows``
    rows raises :class:`TrainingSetTooLarge` unless ``subsample`` names the
    size of a stratified subsample to train on instead.
    """

    def __init__(self, C=1.0, gamma=None, tol=1e-3, max_iter=100_000, max_train_rows=MAX_TRAIN_ROWS,
                 subsample=None, seed=0):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.max_train_rows = max_train_rows
        self.subsample = subsample
        self.seed = seed

    def fit(self, X, y):
        X, y = check_xy(X, y, both_classes=True)
        if X.shape[0] > self.max_train_rows:
            if self.subsample is None:
                raise TrainingSetTooLarge(
                    f"{X.shape[0]} rows exceeds the SVM cap of {self.max_train_rows}; "
                    "pass subsample=<rows> to train on a stratified subsample"
                )
            rows = stratified_subsample(y, min(self.subsample, self.max_train_rows), self.seed)
            X, y = X[rows], y[rows]
        self.gamma_ = float(self.gamma) if self.gamma is not None else 1.0 / X.shape[1]
        y_pm = np.where(y == 1, 1.0, -1.0)
        K = rbf_kernel(X, X, self.gamma_)
        alpha, rho, ok, it, gap = smo(K, y_pm, self.C, self.tol, self.max_iter)
        self.converged_ = ok
        self.n_iter_ = it
        self.kkt_gap_ = gap
        if not ok:
            warnings.warn(f"SMO stopped after {it} iterations with KKT gap {gap:.2e}",
                          ConvergenceWarning, stacklevel=2)
        sv = alpha > 0
        self.alpha_ = alpha
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * y_pm)[sv]
        self.rho_ = rho
        dec = (alpha * y_pm) @ K - rho
        self.platt_ = platt_fit(dec, y)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], -self.rho_)
        return rbf_kernel(X, self.support_vectors_, self.gamma_) @ self.dual_coef_ - self.rho_

    def predict_proba(self, X):
        A, B = self.platt_
        f = A * self.decision_function(X) + B
        return np.exp(-np.logaddexp(0.0, f))

    def get_state(self):
        return {"gamma": self.gamma_, "support_vectors": self.support_vectors_, "dual_coef": self.dual_coef_,
                "rho": self.rho_, "platt": np.asarray(self.platt_), "converged": self.converged_}

    def set_state(self, state):
        self.gamma_ = float(state["gamma"])
        self.support_vectors_ = np.asarray(state["support_vectors"], dtype=np.float64)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=np.float64)
        self.rho_ = float(state["rho"])
        self.platt_ = tuple(float(v) for v in state["platt"])
        self.converged_ = bool(state["converged"])
        return self


def train_svm_rbf(table, C=1.0, gamma=None, tol=1e-3, **kw):
    return SVC(C, gamma, tol, **kw).fit_table(table)
