"""Voting, stacking and blending over trained base learners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHoldout, EvenMemberCount, FoldTooSmall
from .evaluate import stratified_folds
from .flowdata import SplitSpec, split_indices
from .learners import AdaBoost, GradientBoostedTrees, LogisticRegression, RandomForest, SVC
from .learners.base import Learner, check_xy, learner_from_dict, learner_to_dict, register

META_L2 = 1e-4


def default_meta():
    return LogisticRegression(l2=META_L2)


@register
class Voting(Learner):
    """Hard majority vote over an odd number of members.

    ``predict_proba`` is the mean member probability (used for ROC/AUC), while
    ``predict`` is the majority of member labels; the two can disagree on rows
    where a confident minority outweighs a lukewarm majority.
    """

    def __init__(self, members):
        self.members = members

    def fit(self, X, y):
        if len(self.members) % 2 == 0:
            raise EvenMemberCount(f"voting needs an odd member count, got {len(self.members)}")
        X, y = check_xy(X, y)
        self.members_ = [m.clone().fit(X, y) for m in self.members]
        return self

    def member_votes(self, X):
        return np.stack([m.predict(X) for m in self.members_])

    def predict(self, X):
        votes = self.member_votes(X)
        return (2 * votes.sum(axis=0) > votes.shape[0]).astype(np.int64)

    def predict_proba(self, X):
        return np.mean([m.predict_proba(X) for m in self.members_], axis=0)

    @property
    def converged_(self):
        return all(m.converged_ for m in self.members_)

    def get_state(self):
        return {"members": [learner_to_dict(m) for m in self.members_]}

    def set_state(self, state):
        self.members_ = [learner_from_dict(d) for d in state["members"]]
        return self


class _MetaEnsemble(Learner):
    def _meta_features(self, X):
        return np.column_stack([b.predict_proba(X) for b in self.bases_])

    def predict_proba(self, X):
        return self.meta_.predict_proba(self._meta_features(X))

    @property
    def converged_(self):
        return self.meta_.converged_ and all(b.converged_ for b in self.bases_)

    def get_state(self):
        return {"bases": [learner_to_dict(b) for b in self.bases_], "meta": learner_to_dict(self.meta_)}

    def set_state(self, state):
        self.bases_ = [learner_from_dict(d) for d in state["bases"]]
        self.meta_ = learner_from_dict(state["meta"])
        return self


@register
class Stacking(_MetaEnsemble):
    """Meta-learner trained on out-of-fold base probabilities.

    Each training row's meta-feature comes from base models fitted on the other
    folds. For inference the bases are refitted on the full training data.
    """

    def __init__(self, bases, meta=None, n_folds=5, seed=0):
        self.bases = bases
        self.meta = meta
        self.n_folds = n_folds
        self.seed = seed

    def fit(self, X, y):
        X, y = check_xy(X, y, both_classes=True)
        if self.n_folds < 2:
            raise FoldTooSmall("stacking needs at least 2 folds")
        folds = stratified_folds(y, self.n_folds, self.seed)
        Z = np.empty((X.shape[0], len(self.bases)))
        self.provenance_ = []
        for f in range(self.n_folds):
            held = np.flatnonzero(folds == f)
            train = np.flatnonzero(folds != f)
            if held.size == 0 or np.unique(y[train]).size < 2:
                raise FoldTooSmall(f"fold {f} is empty or leaves a single class for training")
            for b, base in enumerate(self.bases):
                Z[held, b] = base.clone().fit(X[train], y[train]).predict_proba(X[held])
            self.provenance_.append((train, held))
        self.fold_assignment_ = folds
        self.meta_features_ = Z
        self.meta_ = (self.meta or default_meta()).clone().fit(Z, y)
        self.bases_ = [b.clone().fit(X, y) for b in self.bases]
        return self


@register
class Blending(_MetaEnsemble):
    """Bases fitted on one stratified part, meta-learner on the disjoint holdout."""

    def __init__(self, bases, meta=None, holdout_fraction=0.2, seed=0):
        self.bases = bases
        self.meta = meta
        self.holdout_fraction = holdout_fraction
        self.seed = seed

    def fit(self, X, y):
        if not 0.0 < self.holdout_fraction <= 0.5:
            raise ValueError("holdout_fraction must lie in (0, 0.5]")
        X, y = check_xy(X, y, both_classes=True)
        try:
            base_rows, meta_rows = split_indices(y, SplitSpec(1.0 - self.holdout_fraction, self.seed, True))
        except Exception as exc:
            raise DegenerateHoldout(str(exc)) from exc
        if np.unique(y[meta_rows]).size < 2 or np.unique(y[base_rows]).size < 2:
            raise DegenerateHoldout("holdout and base partitions must both contain both classes")
        self.base_rows_, self.meta_rows_ = base_rows, meta_rows
        self.bases_ = [b.clone().fit(X[base_rows], y[base_rows]) for b in self.bases]
        Z = self._meta_features(X[meta_rows])
        self.meta_features_ = Z
        self.meta_ = (self.meta or default_meta()).clone().fit(Z, y[meta_rows])
        return self


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str  # "voting" | "stacking" | "blending"
    n_folds: int = 5
    holdout_fraction: float = 0.2
    seed: int = 0

    def build(self, bases=None, meta=None):
        if self.kind == "voting":
            return Voting(bases or default_voting_members(self.seed))
        if self.kind == "stacking":
            return Stacking(bases or default_stacking_bases(self.seed), meta, self.n_folds, self.seed)
        if self.kind == "blending":
            return Blending(bases or default_stacking_bases(self.seed), meta, self.holdout_fraction, self.seed)
        raise ValueError(f"unknown ensemble kind {self.kind!r}")


def default_voting_members(seed=0):
    return [RandomForest(seed=seed), GradientBoostedTrees(seed=seed), AdaBoost(seed=seed)]


def default_stacking_bases(seed=0, svm_subsample=5000):
    return [RandomForest(seed=seed), SVC(subsample=svm_subsample, seed=seed), GradientBoostedTrees(seed=seed)]


def train_voting(table, spec=EnsembleSpec("voting"), members=None):
    return spec.build(members).fit_table(table)


def train_stacking(table, spec=EnsembleSpec("stacking"), bases=None, meta=None):
    return spec.build(bases, meta).fit_table(table)


def train_blending(table, spec=EnsembleSpec("blending"), bases=None, meta=None):
    return spec.build(bases, meta).fit_table(table)
