"""Common Learner interface and helpers."""
from __future__ import annotations

import inspect

import numpy as np

from ..errors import EmptyTable, SingleClass

_REGISTRY = {}


def register(cls):
    _REGISTRY[cls.__name__] = cls
    return cls


def learner_class(name):
    return _REGISTRY[name]


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_xy(X, y, both_classes=False):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyTable("training table is empty")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must match rows")
    if both_classes and np.unique(y).size < 2:
        raise SingleClass("both classes must be present in the training data")
    return X, y


class Learner:
    """Binary classifier with a ``fit`` / ``predict_proba`` / ``predict`` surface.

    ``predict_proba`` returns P(class 1) per row. ``predict`` thresholds it at 0.5,
    ties going to class 0. Constructor arguments are the configuration; fitted
    state lives in attributes ending in ``_`` and round-trips through
    :meth:`get_state` / :meth:`set_state`.
    """

    converged_ = True

    def fit(self, X, y):
        raise NotImplementedError

    def predict_proba(self, X):
        raise NotImplementedError

    def predict(self, X):
        return (self.predict_proba(X) > 0.5).astype(np.int64)

    def fit_table(self, table):
        return self.fit(table.features, table.labels)

    def get_params(self):
        sig = inspect.signature(type(self).__init__)
        named = (inspect.Parameter.POSITIONAL_OR_KEYWORD, inspect.Parameter.KEYWORD_ONLY)
        return {k: getattr(self, k) for k, p in sig.parameters.items() if k != "self" and p.kind in named}

    def clone(self):
        params = {k: (v.clone() if isinstance(v, Learner) else
                      [m.clone() for m in v] if isinstance(v, list) and v and isinstance(v[0], Learner) else v)
                  for k, v in self.get_params().items()}
        return type(self)(**params)

    def get_state(self):
        raise NotImplementedError

    def set_state(self, state):
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def _encode_param(v):
    if isinstance(v, Learner):
        return {"__learner__": describe_learner(v)}
    if isinstance(v, (list, tuple)) and any(isinstance(m, Learner) for m in v):
        return [_encode_param(m) for m in v]
    return v


def _decode_param(v):
    if isinstance(v, dict) and "__learner__" in v:
        return build_learner(v["__learner__"])
    if isinstance(v, list) and v and isinstance(v[0], dict) and "__learner__" in v[0]:
        return [_decode_param(m) for m in v]
    return v


def describe_learner(learner):
    """JSON-ready ``{"class", "params"}`` description of an unfitted learner."""
    return {"class": type(learner).__name__,
            "params": {k: _encode_param(v) for k, v in learner.get_params().items()}}


def build_learner(desc):
    cls = learner_class(desc["class"])
    return cls(**{k: _decode_param(v) for k, v in desc["params"].items()})


def learner_to_dict(learner):
    d = describe_learner(learner)
    d["state"] = learner.get_state()
    return d


def learner_from_dict(d):
    return build_learner(d).set_state(d["state"])
