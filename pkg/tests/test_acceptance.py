"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL line.

Criteria 1 and 2 need the real flow CSV in $KLDETECT_DATA and skip without it.
"""
import json
import math
import os
import shutil
import time
import warnings

import numpy as np
import pytest

from conftest import make_table
from helpers import DropColumn, RecordingLearner
from oracles import (central_difference, fisher, info_gain, knn_brute, lasso_grid_min, pair_auc_fast,
                     shapley_brute)
from kldetect import bundle
from kldetect.cli import main
from kldetect.ensemble import Blending, Stacking
from kldetect.errors import ConvergenceWarning
from kldetect.evaluate import roc_auc, stratified_folds
from kldetect.explain import exact_shapley, kernel_shap, sample_background
from kldetect.featsel import (fisher_scores, information_gain, kkt_residual, lasso_fit, lasso_lambda_max,
                              lasso_objective, top_k)
from kldetect.flowdata import SplitSpec, train_test_split
from kldetect.learners import AdaBoost
from kldetect.learners.boosting import logistic_grad_hess, logistic_loss, stage_weight
from kldetect.learners.linear import logistic_objective
from kldetect.pipeline import DATA_ENV, MODELS, ExperimentConfig, make_model, run_experiment, run_grid
from kldetect.resample import SmoteConfig, smote_detailed

needs_data = pytest.mark.skipif(not os.environ.get(DATA_ENV), reason=f"{DATA_ENV} not set")


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# ---------------------------------------------------------------- 1, 2: real dataset

@needs_data
@criterion(1, "Fisher top-47 + AdaBoost with SMOTE: accuracy >= 0.97, AUC >= 0.98, under 10 min")
def test_c01_fisher_adaboost_headline(tmp_path):
    cfg = ExperimentConfig(data=os.environ[DATA_ENV], out=str(tmp_path / "run"), scenario="FisherScore",
                           model="adaboost", smote=True, seed=0)
    start = time.perf_counter()
    res = run_experiment(cfg)
    elapsed = time.perf_counter() - start
    print(f"accuracy={res.report.accuracy:.4f} auc={res.report.auc:.4f} seconds={elapsed:.1f}")
    assert res.report.accuracy >= 0.97
    assert res.report.auc >= 0.98
    assert elapsed <= 600


@needs_data
@criterion(2, "Naive Bayes is the weakest model and the strong models beat it by >= 0.20")
def test_c02_model_ordering(tmp_path):
    cfg = ExperimentConfig(data=os.environ[DATA_ENV], out=str(tmp_path / "grid"), scenario="FisherScore",
                           smote=True, seed=0)
    results = run_grid(cfg, ["FisherScore"], MODELS)
    acc = {r.out.name: r.report.accuracy for r in results}
    print(json.dumps(acc, sort_keys=True))
    nb = acc["naive_bayes"]
    assert nb == min(acc.values())
    for name in ("adaboost", "random_forest", "gradient_boosting", "voting", "stacking", "blending"):
        assert acc[name] >= nb + 0.20, name


# ---------------------------------------------------------------- 3: Shapley oracle

@criterion(3, "exact Shapley local accuracy and dummy property, KernelSHAP within 0.02, all models")
def test_c03_shapley_oracle(fixture_split):
    start = time.perf_counter()
    train, test = fixture_split
    # 7 modelled features plus a trailing column no model reads: m = 8
    cols = top_k(fisher_scores(train.features, train.labels), 7)
    sub = np.sort(np.random.default_rng(3).choice(train.n_rows, 300, replace=False))
    X, y = train.features[np.ix_(sub, cols)], train.labels[sub]
    noise = np.random.default_rng(4).random((test.n_rows, 1))
    Xt = np.hstack([test.features[:, cols], noise])
    bg = sample_background(np.hstack([X, noise[:X.shape[0]]]), 12, seed=0)
    worst_kernel = 0.0
    for name in MODELS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            model = DropColumn(make_model(name, seed=0, svm_subsample=300).fit(X, y))
        for i in (0, 7):
            x = Xt[i]
            phi, base, pred = exact_shapley(model, x, bg)
            assert abs(base + math.fsum(phi) - pred) <= 1e-6, name
            assert pred == pytest.approx(float(model.predict_proba(x[None])[0]), abs=1e-12)
            assert phi[-1] == 0.0, name
            kphi, kbase, kpred = kernel_shap(model, x, bg, n_samples=2048, seed=i)
            worst_kernel = max(worst_kernel, float(np.max(np.abs(kphi - phi))))
            assert np.max(np.abs(kphi - phi)) <= 0.02, name
        if name in ("naive_bayes", "logistic_regression", "decision_tree"):
            ref, ref_base, ref_pred = shapley_brute(model.predict_proba, Xt[0], bg)
            phi, base, pred = exact_shapley(model, Xt[0], bg)
            assert np.max(np.abs(phi - ref)) <= 1e-9, name
    elapsed = time.perf_counter() - start
    print(f"max |kernel - exact| = {worst_kernel:.2e}, seconds={elapsed:.1f}")
    assert elapsed < 60


# ---------------------------------------------------------------- 4: AUC

@criterion(4, "trapezoid ROC-AUC equals the pair-counting statistic on 1000 random tied instances")
def test_c04_auc_pair_counting():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(1000):
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        # few distinct values so ties are common
        levels = int(rng.integers(1, 12))
        s = rng.integers(0, levels, n) / max(levels, 1) if trial % 2 else rng.random(n).round(1)
        worst = max(worst, abs(roc_auc(y, s)[1] - pair_auc_fast(y, s)))
    print(f"max deviation {worst:.2e}")
    assert worst <= 1e-9


# ---------------------------------------------------------------- 5: Lasso

@criterion(5, "Lasso KKT residual <= 1e-6, 2-feature grid oracle within 1e-4, empty above lambda_max")
def test_c05_lasso():
    rng = np.random.default_rng(55)
    for _ in range(100):
        n, d = int(rng.integers(10, 80)), int(rng.integers(1, 12))
        X = rng.normal(size=(n, d)) * rng.uniform(0.2, 3.0, d)
        y = X @ (rng.normal(size=d) * (rng.random(d) < 0.5)) + rng.normal(size=n) * 0.5
        lam = lasso_lambda_max(X, y) * rng.uniform(0.01, 0.9)
        fit = lasso_fit(X, y, lam, max_iters=10_000, tol=1e-8)
        Xc, yc = X - X.mean(axis=0), y - y.mean()
        assert kkt_residual(fit.coef, Xc.T @ Xc / n, Xc.T @ yc / n, lam) <= 1e-6
    for _ in range(10):
        X = rng.normal(size=(40, 2))
        y = X @ rng.uniform(-1.5, 1.5, 2) + 0.3 * rng.normal(size=40)
        lam = lasso_lambda_max(X, y) * rng.uniform(0.05, 0.8)
        fit = lasso_fit(X, y, lam, tol=1e-10)
        grid_obj, _ = lasso_grid_min(X, y, lam)
        assert abs(lasso_objective(fit.coef, fit.intercept, X, y, lam) - grid_obj) <= 1e-4
        above = lasso_fit(X, y, lasso_lambda_max(X, y) * 1.0001)
        assert np.count_nonzero(above.coef) == 0


# ---------------------------------------------------------------- 6: Fisher and information gain

@criterion(6, "Fisher and information gain match oracles, constants score 0, Fisher affine-invariant")
def test_c06_fisher_and_information_gain():
    rng = np.random.default_rng(66)
    for _ in range(60):
        n, d = int(rng.integers(4, 51)), int(rng.integers(1, 11))
        X = rng.random((n, d))
        X[:, rng.random(d) < 0.3] = rng.integers(0, 3, (n, 1)) / 2
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        X[:, 0] = 0.42  # constant
        f = fisher_scores(X, y)
        # on constant columns the oracle divides rounding residues by each other
        for j in np.flatnonzero(np.ptp(X, axis=0) > 0):
            ref = fisher(X[:, j], y.tolist())
            assert abs(f[j] - ref) <= 1e-9 * max(1.0, abs(ref))
        assert np.all(f[np.ptp(X, axis=0) == 0] == 0.0)
        ig = information_gain(make_table(X, y), n_bins=10, threshold=0.0).scores
        for j in range(d):
            assert abs(ig[j] - info_gain(X[:, j], y.tolist(), 10)) <= 1e-9
        assert ig[0] == 0.0
        a, b = rng.uniform(0.1, 10.0, d) * rng.choice([-1, 1], d), rng.normal(size=d) * 5
        assert np.allclose(fisher_scores(a * X + b, y), f, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------- 7: SMOTE

@criterion(7, "SMOTE balances classes and every synthetic row lies on a brute-force k-NN segment")
def test_c07_smote():
    rng = np.random.default_rng(77)
    for trial in range(12):
        n = int(rng.integers(20, 1001))
        d = int(rng.integers(1, 8))
        X = rng.normal(size=(n, d))
        if trial % 3 == 0:
            X = np.round(X, 1)  # duplicates and tied distances
        y = (rng.random(n) < rng.uniform(0.05, 0.4)).astype(int)
        y[:6] = 1
        y[6:8] = 0
        t = make_table(X, y)
        k = int(rng.integers(1, 6))
        res = smote_detailed(t, SmoteConfig(k_neighbors=k, seed=trial))
        counts = res.table.class_counts()
        assert counts[0] == counts[1]
        minority = np.flatnonzero(y == 1)
        pos = {int(r): i for i, r in enumerate(minority)}
        pts = X[minority]
        synth = res.table.features[n:]
        neigh = {}
        for s, b, p, g in zip(synth, res.base_rows, res.neighbor_rows, res.gaps):
            if int(b) not in neigh:
                neigh[int(b)] = knn_brute(pts, pos[int(b)], res.k_used)
            assert pos[int(p)] in neigh[int(b)]
            assert 0.0 <= g <= 1.0
            assert np.all(np.abs(s - (X[b] + g * (X[p] - X[b]))) <= 1e-9)
            assert np.all(s >= np.minimum(X[b], X[p]) - 1e-9) and np.all(s <= np.maximum(X[b], X[p]) + 1e-9)


# ---------------------------------------------------------------- 8: learner numerics

@criterion(8, "LR/GBT gradients match finite differences, AdaBoost alpha(0.25) = ln3/2, zero train error")
def test_c08_learner_numerics():
    rng = np.random.default_rng(88)
    for _ in range(20):
        X = rng.normal(size=(40, 4))
        y = rng.integers(0, 2, 40).astype(float)
        theta = rng.normal(size=5)
        for l2 in (0.0, 0.5):
            _, g = logistic_objective(theta, X, y, l2)
            fd = central_difference(lambda t: logistic_objective(t, X, y, l2)[0], theta)
            assert np.max(np.abs(g - fd)) <= 1e-5
        m = rng.normal(size=40) * 3
        g, h = logistic_grad_hess(m, y)
        eps = 1e-6
        assert np.max(np.abs(g - (logistic_loss(m + eps, y) - logistic_loss(m - eps, y)) / (2 * eps))) <= 1e-5
        fd_h = (logistic_grad_hess(m + eps, y)[0] - logistic_grad_hess(m - eps, y)[0]) / (2 * eps)
        assert np.max(np.abs(h - fd_h)) <= 1e-5
    assert abs(stage_weight(0.25) - 0.5 * math.log(3)) <= 1e-12
    for _ in range(10):
        X = rng.normal(size=(80, 3))
        j, t = int(rng.integers(0, 3)), float(rng.normal() * 0.3)
        y = (X[:, j] > t).astype(int)
        model = AdaBoost(n_rounds=10, seed=0).fit(X, y)
        assert np.mean(model.predict(X) != y) == 0.0


# ---------------------------------------------------------------- 9: leakage and folds

@criterion(9, "stacking/blending never score rows they trained on; CV folds disjoint, exhaustive, stratified")
def test_c09_leakage_and_folds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(40, 120))
        X = np.column_stack([rng.random((n, 2)), np.arange(n)])
        y = (X[:, 0] + 0.3 * rng.random(n) > 0.6).astype(int)
        y[:5], y[5:10] = 0, 1
        RecordingLearner.log.clear()
        s = Stacking([RecordingLearner(0), RecordingLearner(1)], n_folds=5, seed=seed).fit(X, y)
        fold_logs = RecordingLearner.log[:10]
        assert len(fold_logs) == 10
        for trained_on, scored in fold_logs:
            assert not trained_on & scored
        held = np.concatenate([h for _, h in s.provenance_])
        assert sorted(held.tolist()) == list(range(n))
        RecordingLearner.log.clear()
        b = Blending([RecordingLearner(0), RecordingLearner(1)], holdout_fraction=0.2, seed=seed).fit(X, y)
        assert not set(b.base_rows_.tolist()) & set(b.meta_rows_.tolist())
        for trained_on, scored in RecordingLearner.log:
            assert not trained_on & scored
        assert set(RecordingLearner.log[0][1]) == set(b.meta_rows_.tolist())

        for k in (5, int(rng.integers(2, 11))):
            folds = stratified_folds(y, k, seed)
            assert set(folds.tolist()) <= set(range(k)) and folds.size == n
            for c in (0, 1):
                per = np.bincount(folds[y == c], minlength=k)
                assert per.max() - per.min() <= 1
            sizes = np.bincount(folds, minlength=k)
            assert sizes.max() - sizes.min() <= 1


# ---------------------------------------------------------------- 10: reproducibility

def _artifacts(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.is_file() and p.suffix in (".json", ".csv", ".kldb")}


@criterion(10, "re-running from the emitted config is byte-identical; bundles round-trip bit-exactly")
def test_c10_reproducibility(tmp_path, fixture_csv, fixture_split):
    for scenario, model, extra in (("LassoL1", "adaboost", ["--cv"]), ("InfoGain", "voting", [])):
        out = tmp_path / f"{scenario}-{model}"
        assert main(["run", "--data", str(fixture_csv), "--out", str(out), "--scenario", scenario,
                     "--model", model, "--seed", "5", *extra]) == 0
        first = _artifacts(out)
        config = tmp_path / "config.json"
        shutil.copy(out / "config.json", config)
        shutil.rmtree(out)
        assert main(["run", "--config", str(config)]) == 0
        second = _artifacts(out)
        assert sorted(first) == sorted(second)
        assert any(name.endswith(".csv") for name in first) and "eval_report.json" in first
        for name in first:
            assert first[name] == second[name], name

    train, test = fixture_split
    sub = train.take(np.sort(np.random.default_rng(0).choice(train.n_rows, 400, replace=False)))
    for name in MODELS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            model = make_model(name, seed=1, svm_subsample=400).fit_table(sub)
        restored, _ = bundle.loads(bundle.dumps(model))
        assert restored.predict_proba(test.features).tobytes() == model.predict_proba(test.features).tobytes()
        assert np.array_equal(restored.predict(test.features), model.predict(test.features))


def test_split_is_part_of_the_fixture_contract(fixture_csv):
    # guards the assumptions the criteria above make about the shipped fixture
    from kldetect.flowdata import load_csv
    table = load_csv(fixture_csv)
    train, test = train_test_split(table, SplitSpec(0.8, 0, True))
    assert train.n_rows + test.n_rows == table.n_rows == 2000
    assert table.n_features >= 8


# ---------------------------------------------------------------- real-dataset sanity checks

@needs_data
def test_real_dataset_feature_count():
    from kldetect.flowdata import load_csv
    assert load_csv(os.environ[DATA_ENV]).n_features == 86


@needs_data
def test_real_dataset_information_gain_band():
    from kldetect.pipeline import prepare
    cfg = ExperimentConfig(data=os.environ[DATA_ENV], scenario="InfoGain").resolved()
    kept = prepare(cfg).ranking.selected.size
    print(f"information gain kept {kept} features")
    assert 30 <= kept <= 60
