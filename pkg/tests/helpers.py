"""Small stand-in learners for contract tests."""
import numpy as np

from kldetect.learners.base import Learner, register


@register
class ConstantLearner(Learner):
    def __init__(self, p=0.5):
        self.p = p

    def fit(self, X, y):
        self.n_features_ = np.asarray(X).shape[1]
        return self

    def predict_proba(self, X):
        return np.full(np.asarray(X).shape[0], float(self.p))

    def get_state(self):
        return {"n_features": self.n_features_}

    def set_state(self, state):
        self.n_features_ = int(state["n_features"])
        return self


@register
class LinearScore(Learner):
    """f(x) = b + w.x, clipped to [0, 1]; used where a closed form is known."""

    def __init__(self, weights=(), bias=0.0):
        self.weights = tuple(weights)
        self.bias = bias

    def fit(self, X, y):
        return self

    def predict_proba(self, X):
        return np.clip(self.bias + np.asarray(X, dtype=np.float64) @ np.asarray(self.weights), 0.0, 1.0)

    def get_state(self):
        return {}

    def set_state(self, state):
        return self


@register
class ColumnLearner(Learner):
    """Predicts the value of one input column; a perfect oracle when that column is the label."""

    def __init__(self, column=0):
        self.column = column

    def fit(self, X, y):
        return self

    def predict_proba(self, X):
        return np.clip(np.asarray(X, dtype=np.float64)[:, self.column], 0.0, 1.0)

    def get_state(self):
        return {}

    def set_state(self, state):
        return self


class RecordingLearner(Learner):
    """Remembers which row ids (last column) it trained on and which it scored."""

    log = []

    def __init__(self, tag=0):
        self.tag = tag

    def fit(self, X, y):
        self.train_ids_ = frozenset(np.asarray(X)[:, -1].astype(int).tolist())
        return self

    def predict_proba(self, X):
        ids = frozenset(np.asarray(X)[:, -1].astype(int).tolist())
        RecordingLearner.log.append((self.train_ids_, ids))
        return 0.25 + 0.5 * (np.asarray(X)[:, 0] > 0.5)


class DropColumn(Learner):
    """Wraps a fitted model so it accepts (and never reads) one extra trailing column."""

    def __init__(self, model):
        self.model = model

    def predict_proba(self, X):
        return self.model.predict_proba(np.asarray(X)[:, :-1])


class OneNN(Learner):
    def fit(self, X, y):
        self.X_, self.y_ = np.asarray(X, float), np.asarray(y)
        return self

    def predict_proba(self, X):
        d = ((np.asarray(X, float)[:, None, :] - self.X_[None, :, :]) ** 2).sum(-1)
        return self.y_[np.argmin(d, axis=1)].astype(float)
