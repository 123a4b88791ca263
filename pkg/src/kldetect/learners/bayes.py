"""Gaussian naive Bayes."""
from __future__ import annotations

import numpy as np

from .base import Learner, check_xy, register, sigmoid

VAR_FLOOR = 1e-9


@register
class GaussianNB(Learner):
    def __init__(self, var_floor=VAR_FLOOR):
        self.var_floor = var_floor

    def fit(self, X, y):
        X, y = check_xy(X, y, both_classes=True)
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
        self.vars_ = np.maximum(np.stack([X[y == c].var(axis=0) for c in (0, 1)]), self.var_floor)
        self.log_priors_ = np.log(np.bincount(y, minlength=2) / y.shape[0])
        return self

    def joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], 2))
        for c in (0, 1):
            ll = -0.5 * (np.log(2 * np.pi * self.vars_[c]) + (X - self.means_[c]) ** 2 / self.vars_[c])
            out[:, c] = self.log_priors_[c] + ll.sum(axis=1)
        return out

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        return sigmoid(jll[:, 1] - jll[:, 0])

    def get_state(self):
        return {"means": self.means_, "vars": self.vars_, "log_priors": self.log_priors_}

    def set_state(self, state):
        self.means_ = np.asarray(state["means"], dtype=np.float64)
        self.vars_ = np.asarray(state["vars"], dtype=np.float64)
        self.log_priors_ = np.asarray(state["log_priors"], dtype=np.float64)
        return self


def train_naive_bayes(table):
    return GaussianNB().fit_table(table)
