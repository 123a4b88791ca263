"""Binomial logistic regression fitted by damped Newton iterations."""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import ConvergenceWarning
from .base import Learner, check_xy, register, sigmoid


SEPARATION_MARGIN = 20.0


def logistic_objective(theta, X, y, l2=0.0):
    """Mean negative log-likelihood plus ``l2/2 * ||w||^2`` and its gradient.

    ``theta[0]`` is the (unpenalized) intercept, ``theta[1:]`` the weights.
    """
    n = X.shape[0]
    m = theta[0] + X @ theta[1:]
    loss = float(np.mean(np.logaddexp(0.0, m) - y * m)) + 0.5 * l2 * float(theta[1:] @ theta[1:])
    r = sigmoid(m) - y
    grad = np.empty_like(theta)
    grad[0] = r.sum() / n
    grad[1:] = X.T @ r / n + l2 * theta[1:]
    return loss, grad


@register
class LogisticRegression(Learner):
    def __init__(self, l2=0.0, max_iter=100, tol=1e-8):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_xy(X, y)
        n, d = X.shape
        yf = y.astype(np.float64)
        Xa = np.hstack([np.ones((n, 1)), X])
        reg = np.full(d + 1, self.l2)
        reg[0] = 0.0
        theta = np.zeros(d + 1)
        loss, grad = logistic_objective(theta, X, yf, self.l2)
        converged = False
        it = 0
        for it in range(1, self.max_iter + 1):
            p = sigmoid(Xa @ theta)
            H = (Xa * (p * (1 - p))[:, None]).T @ Xa / n + np.diag(reg)
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, grad, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                break
            t = 1.0
            for _ in range(50):
                cand = theta - t * step
                c_loss, c_grad = logistic_objective(cand, X, yf, self.l2)
                if c_loss <= loss - 1e-4 * t * float(grad @ step) or c_loss <= loss:
                    break
                t *= 0.5
            else:
                break
            moved = t * np.abs(step).max()
            theta, loss, grad = cand, c_loss, c_grad
            # on separable data the gradient vanishes while the weights keep
            # marching off to infinity, so require the step to settle as well
            if np.linalg.norm(grad) <= self.tol and moved <= 1e-6 * (1.0 + np.abs(theta).max()):
                converged = True
                break
        if converged and self.l2 == 0.0:
            # every row on the right side with saturated probabilities: the
            # data are separable and the likelihood has no finite maximiser
            # (the hessian underflows, so the step test alone can be fooled)
            margin = (Xa @ theta) * np.where(yf == 1, 1.0, -1.0)
            if margin.min() > SEPARATION_MARGIN:
                converged = False
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:].copy()
        self.n_iter_ = it
        self.grad_norm_ = float(np.linalg.norm(grad))
        self.converged_ = converged
        if not converged:
            warnings.warn(
                f"logistic regression did not converge (|grad|={self.grad_norm_:.2e} after {it} steps)",
                ConvergenceWarning, stacklevel=2,
            )
        return self

    def decision_function(self, X):
        return self.intercept_ + np.asarray(X, dtype=np.float64) @ self.coef_

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))

    def get_state(self):
        return {"intercept": self.intercept_, "coef": self.coef_, "converged": self.converged_}

    def set_state(self, state):
        self.intercept_ = float(state["intercept"])
        self.coef_ = np.asarray(state["coef"], dtype=np.float64)
        self.converged_ = bool(state["converged"])
        return self


def train_logistic_regression(table, l2=0.0, max_iter=100, tol=1e-8):
    return LogisticRegression(l2, max_iter, tol).fit_table(table)
