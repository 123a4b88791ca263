import itertools

import numpy as np
import pytest

from helpers import ColumnLearner, ConstantLearner, RecordingLearner
from kldetect.ensemble import (Blending, EnsembleSpec, Stacking, Voting, default_stacking_bases,
                               default_voting_members, train_blending, train_stacking, train_voting)
from kldetect.errors import DegenerateHoldout, EvenMemberCount, FoldTooSmall
from kldetect.learners import AdaBoost, DecisionTree, GaussianNB, LogisticRegression
from conftest import make_table


def test_voting_majority_all_patterns():
    X = np.zeros((1, 2))
    y = np.array([0])
    for votes in itertools.product([0, 1], repeat=3):
        members = [ConstantLearner(0.9 if v else 0.1) for v in votes]
        v = Voting(members).fit(np.zeros((2, 2)), np.array([0, 1]))
        assert v.predict(X)[0] == int(sum(votes) >= 2)
        assert v.predict_proba(X)[0] == pytest.approx(np.mean([0.9 if b else 0.1 for b in votes]))
    assert y.size == 1


def test_voting_proba_and_label_can_disagree():
    # two lukewarm yes votes against one confident no
    v = Voting([ConstantLearner(0.55), ConstantLearner(0.55), ConstantLearner(0.0)])
    v.fit(np.zeros((2, 1)), np.array([0, 1]))
    assert v.predict(np.zeros((1, 1)))[0] == 1
    assert v.predict_proba(np.zeros((1, 1)))[0] < 0.5


def test_voting_identical_members(rng):
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] > 0).astype(int)
    t = DecisionTree(max_depth=3)
    v = Voting([t, t, t]).fit(X, y)
    single = t.clone().fit(X, y)
    Xt = rng.normal(size=(30, 2))
    assert np.array_equal(v.predict(Xt), single.predict(Xt))
    assert np.array_equal(v.predict_proba(Xt), single.predict_proba(Xt))


def test_voting_even_members():
    with pytest.raises(EvenMemberCount):
        Voting([ConstantLearner(), ConstantLearner()]).fit(np.zeros((2, 1)), np.array([0, 1]))


def test_voting_accuracy_band(rng):
    X = rng.normal(size=(300, 3))
    y = (X[:, 0] + 0.5 * X[:, 1] + 0.5 * rng.normal(size=300) > 0).astype(int)
    members = [DecisionTree(max_depth=4), AdaBoost(n_rounds=30), GaussianNB()]
    v = train_voting(make_table(X[:200], y[:200]), members=members)
    acc = lambda m: np.mean(m.predict(X[200:]) == y[200:])  # noqa: E731
    assert acc(v) >= min(acc(m) for m in v.members_) - 0.05


def _id_table(rng, n=60):
    X = rng.random((n, 2))
    y = (X[:, 0] + 0.2 * rng.random(n) > 0.6).astype(int)
    return np.column_stack([X, np.arange(n)]), y


def test_stacking_shapes_and_out_of_fold(rng):
    X, y = _id_table(rng)
    RecordingLearner.log.clear()
    s = Stacking([RecordingLearner(0), RecordingLearner(1)], n_folds=4, seed=3).fit(X, y)
    assert s.meta_features_.shape == (60, 2)
    assert len(RecordingLearner.log) == 8
    for trained_on, scored in RecordingLearner.log:
        assert not trained_on & scored
    held = np.concatenate([h for _, h in s.provenance_])
    assert sorted(held.tolist()) == list(range(60))


def test_stacking_perfect_oracle_base(rng):
    n = 200
    y = rng.integers(0, 2, n)
    X = np.column_stack([y.astype(float), rng.random(n)])
    s = Stacking([ColumnLearner(0), ConstantLearner(0.5)], LogisticRegression(l2=1e-2)).fit(X[:150], y[:150])
    assert np.mean(s.predict(X[150:]) == y[150:]) == 1.0


def test_stacking_fold_too_small():
    with pytest.raises(FoldTooSmall):
        Stacking([ConstantLearner()], n_folds=1).fit(np.zeros((4, 1)), np.array([0, 1, 0, 1]))


def test_blending_partition(rng):
    X, y = _id_table(rng, 100)
    RecordingLearner.log.clear()
    b = Blending([RecordingLearner(0), RecordingLearner(1)], holdout_fraction=0.2, seed=1).fit(X, y)
    assert (b.base_rows_.size, b.meta_rows_.size) == (80, 20)
    assert not set(b.base_rows_.tolist()) & set(b.meta_rows_.tolist())
    for trained_on, scored in RecordingLearner.log:
        assert not trained_on & scored


def test_blending_degenerate_holdout():
    X = np.zeros((6, 1))
    with pytest.raises(DegenerateHoldout):
        Blending([ConstantLearner()]).fit(X, np.array([0, 0, 0, 0, 0, 1]))
    with pytest.raises(ValueError):
        Blending([ConstantLearner()], holdout_fraction=0.7).fit(X, np.array([0, 1] * 3))


def test_blending_vs_stacking_meta_differs(rng):
    X = rng.random((120, 3))
    y = (X[:, 0] + 0.3 * rng.random(120) > 0.6).astype(int)
    bases = [DecisionTree(max_depth=2), GaussianNB()]
    t = make_table(X, y)
    s = train_stacking(t, EnsembleSpec("stacking", seed=2), bases=bases)
    b = train_blending(t, EnsembleSpec("blending", seed=2), bases=bases)
    assert s.meta_features_.shape == (120, 2) and b.meta_features_.shape == (b.meta_rows_.size, 2)
    assert not np.allclose(s.meta_.coef_, b.meta_.coef_)


def test_default_wiring():
    assert [type(m).__name__ for m in default_voting_members()] == ["RandomForest", "GradientBoostedTrees", "AdaBoost"]
    assert [type(m).__name__ for m in default_stacking_bases()] == ["RandomForest", "SVC", "GradientBoostedTrees"]
    assert isinstance(EnsembleSpec("blending").build(), Blending)
    with pytest.raises(ValueError):
        EnsembleSpec("bagging").build()
