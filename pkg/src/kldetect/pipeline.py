"""Experiment orchestration: preprocessing, training, evaluation and artifact emission."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bundle, plots
from .ensemble import EnsembleSpec
from .errors import ConvergenceWarning, DataError, EmptyTable, SchemaMismatch
from .evaluate import cross_validate, evaluate_model, grid_search, roc_curve
from .explain import LimeConfig, ShapConfig, lime_explain, sample_background, shap_global_importance, shap_values
from .featsel import (FISHER_SCORE, FISHER_TOP_K, IG_THRESHOLD, INFO_GAIN, LASSO_L1, LassoConfig,
                      apply_selection, fisher_score, information_gain, lasso_select)
from .flowdata import (DEFAULT_DROP_COLUMNS, LoadReport, ScalerParams, SplitSpec, apply_minmax, fit_minmax,
                       load_csv, normalize_name, split_indices, summary_statistics)
from .learners import (SVC, AdaBoost, DecisionTree, GaussianNB, GradientBoostedTrees, LogisticRegression,
                       RandomForest)
from .resample import SmoteConfig, smote

log = logging.getLogger(__name__)

DATA_ENV = "KLDETECT_DATA"
SCENARIOS = ("All", INFO_GAIN, LASSO_L1, FISHER_SCORE)
MODELS = ("svm", "random_forest", "decision_tree", "gradient_boosting", "adaboost",
          "logistic_regression", "naive_bayes", "voting", "stacking", "blending")
MODEL_ALIASES = {"xgboost": "gradient_boosting", "svc": "svm", "rf": "random_forest",
                 "lr": "logistic_regression", "nb": "naive_bayes", "dt": "decision_tree"}

TUNING_GRIDS = {
    "decision_tree": {"max_depth": [5, 10, 20], "min_samples_leaf": [1, 5]},
    "random_forest": {"n_trees": [50, 100]},
    "adaboost": {"n_rounds": [50, 100, 200]},
    "gradient_boosting": {"max_depth": [3, 6], "learning_rate": [0.1, 0.3]},
    "svm": {"C": [0.5, 1.0, 4.0]},
    "logistic_regression": {"l2": [0.0, 1e-3]},
}


def canonical_model(name):
    key = name.lower().replace("-", "_")
    key = MODEL_ALIASES.get(key, key)
    if key not in MODELS:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    return key


def canonical_scenario(name):
    for s in SCENARIOS:
        if normalize_name(s) == normalize_name(name):
            return s
    raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")


def make_model(name, seed=0, svm_subsample=5000):
    name = canonical_model(name)
    if name == "svm":
        return SVC(subsample=svm_subsample, seed=seed)
    if name == "random_forest":
        return RandomForest(seed=seed)
    if name == "decision_tree":
        return DecisionTree()
    if name == "gradient_boosting":
        return GradientBoostedTrees(seed=seed)
    if name == "adaboost":
        return AdaBoost(seed=seed)
    if name == "logistic_regression":
        return LogisticRegression()
    if name == "naive_bayes":
        return GaussianNB()
    return EnsembleSpec(name, seed=seed).build()


@dataclass
class ExperimentConfig:
    data: str = ""
    out: str = "runs/run"
    scenario: str = "All"
    model: str = "adaboost"
    drop_columns: list = field(default_factory=lambda: list(DEFAULT_DROP_COLUMNS))
    label_column: str | None = None
    smote: bool = True
    smote_k: int = 5
    train_fraction: float = 0.8
    stratified: bool = True
    seed: int = 0
    cv: bool = False
    cv_folds: int = 5
    tune: bool = False
    svg: bool = False
    strict: bool = False
    ig_threshold: float = IG_THRESHOLD
    ig_bins: int = 10
    fisher_k: int = FISHER_TOP_K
    lasso_lambda: float | None = None
    svm_subsample: int = 5000

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        raw = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def resolved(self):
        c = dataclasses.replace(self)
        c.model = canonical_model(c.model)
        c.scenario = canonical_scenario(c.scenario)
        data = c.data or os.environ.get(DATA_ENV, "")
        if not data:
            raise DataError(f"no dataset given; pass --data or set {DATA_ENV}")
        c.data = str(Path(data).resolve())
        c.out = str(Path(c.out).resolve())
        return c


@dataclass
class Prepared:
    feature_names: tuple
    scaler: ScalerParams
    train_rows: np.ndarray
    test_rows: np.ndarray
    train_scaled: object  # FlowTable before SMOTE, all features
    train: object  # after SMOTE and selection
    test: object  # after selection
    train_unresampled: object  # before SMOTE, after selection (for CV)
    ranking: object | None
    class_counts_before: list
    class_counts_after: list
    load_report: LoadReport


def select_features(table, config):
    if config.scenario == INFO_GAIN:
        return information_gain(table, config.ig_bins, config.ig_threshold)
    if config.scenario == LASSO_L1:
        return lasso_select(table, LassoConfig(lam=config.lasso_lambda, seed=config.seed))
    if config.scenario == FISHER_SCORE:
        return fisher_score(table, config.fisher_k)
    return None


def prepare(config):
    report = LoadReport()
    table = load_csv(config.data, config.drop_columns, config.label_column, report)
    train_rows, test_rows = split_indices(table.labels, SplitSpec(config.train_fraction, config.seed,
                                                                  config.stratified))
    scaler = fit_minmax(table.take(train_rows))
    train = apply_minmax(table.take(train_rows), scaler)
    test = apply_minmax(table.take(test_rows), scaler)
    before = train.class_counts().tolist()
    resampled = smote(train, SmoteConfig(config.smote_k, 1.0, config.seed)) if config.smote else train
    ranking = select_features(resampled, config)
    if ranking is not None:
        if ranking.selected.size == 0:
            raise EmptyTable(f"{config.scenario} retained no features")
        train_sel, test_sel = apply_selection(resampled, ranking), apply_selection(test, ranking)
        unres = apply_selection(train, ranking)
    else:
        train_sel, test_sel, unres = resampled, test, train
    return Prepared(table.feature_names, scaler, train_rows, test_rows, train, train_sel, test_sel, unres,
                    ranking, before, resampled.class_counts().tolist(), report)


# --------------------------------------------------------------------------- writers


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _roc_rows(labels, scores):
    fpr, tpr, thr = roc_curve(labels, scores)
    return [[repr(float(a)), repr(float(b)), repr(float(t))] for a, b, t in zip(fpr, tpr, thr)]


@dataclass
class RunResult:
    out: Path
    report: object
    model: object
    prepared: Prepared
    warnings: list
    converged: bool


def _fit(model, table):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        model.fit_table(table)
    msgs = sorted({str(w.message) for w in caught if issubclass(w.category, ConvergenceWarning)})
    return model, msgs


def train_and_report(config, prepared, out):
    """Fit one model on prepared data and write every per-run artifact into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    model = make_model(config.model, config.seed, config.svm_subsample)
    tuned = None
    if config.tune and config.model in TUNING_GRIDS:
        smote_cfg = SmoteConfig(config.smote_k, 1.0, config.seed) if config.smote else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            tuned, _ = grid_search(prepared.train_unresampled, model, TUNING_GRIDS[config.model],
                                   config.cv_folds, config.seed, smote_config=smote_cfg)
        model = type(model)(**{**model.get_params(), **tuned})
    model, msgs = _fit(model, prepared.train)
    converged = bool(model.converged_) and not msgs

    report = evaluate_model(model, prepared.test)
    scores = model.predict_proba(prepared.test.features)
    eval_doc = {"evaluation": f"holdout_{round(config.train_fraction * 100)}_"
                              f"{round((1 - config.train_fraction) * 100)}",
                "scenario": config.scenario, "model": config.model, **report.to_dict()}
    (out / "config.json").write_text(config.to_json())
    write_json(out / "eval_report.json", eval_doc)
    write_csv(out / "roc.csv", ["fpr", "tpr", "threshold"], _roc_rows(prepared.test.labels, scores))
    cm = report.confusion
    write_csv(out / "confusion.csv", ["actual", "pred_benign", "pred_keylogger"],
              [["benign", cm.tn, cm.fp], ["keylogger", cm.fn, cm.tp]])
    write_csv(out / "class_balance.csv", ["class", "before_smote", "after_smote"],
              [[n, b, a] for n, b, a in zip(("benign", "keylogger"), prepared.class_counts_before,
                                            prepared.class_counts_after)])
    if prepared.ranking is not None:
        write_json(out / "ranking.json", prepared.ranking.to_dict(list(prepared.feature_names)))
        chosen = set(prepared.ranking.selected.tolist())
        write_csv(out / "feature_scores.csv", ["feature", "score", "selected"],
                  [[n, repr(float(s)), int(i in chosen)]
                   for i, (n, s) in enumerate(zip(prepared.feature_names, prepared.ranking.scores))])
    if config.cv:
        smote_cfg = SmoteConfig(config.smote_k, 1.0, config.seed) if config.smote else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            cv = cross_validate(prepared.train_unresampled, model, config.cv_folds, config.seed, smote_cfg)
        write_json(out / "cv_report.json", {"evaluation": f"stratified_{config.cv_folds}fold_cv",
                                            "scenario": config.scenario, "model": config.model,
                                            **cv.to_dict()})
    summary = {
        "scenario": config.scenario, "model": config.model,
        "n_train_before_smote": int(sum(prepared.class_counts_before)),
        "n_train": prepared.train.n_rows, "n_test": prepared.test.n_rows,
        "n_features_loaded": len(prepared.feature_names),
        "n_features_used": prepared.train.n_features,
        "features_used": list(prepared.train.feature_names),
        "converged": converged, "warnings": msgs, "tuned_params": tuned,
        "replaced_infinite_cells": prepared.load_report.replaced_inf,
        "replaced_missing_cells": prepared.load_report.replaced_nan,
        "label_mapping": prepared.load_report.label_mapping,
    }
    write_json(out / "run_summary.json", summary)
    meta = {
        "config": dataclasses.asdict(config),
        "feature_names": list(prepared.feature_names),
        "selected": (prepared.ranking.selected if prepared.ranking is not None
                     else np.arange(len(prepared.feature_names))),
        "scaler_min": prepared.scaler.mins, "scaler_max": prepared.scaler.maxs,
    }
    bundle.save(model, out / "model.kldb", meta)
    if config.svg:
        fpr, tpr, _ = roc_curve(prepared.test.labels, scores)
        plots.roc_curves({config.model: (fpr, tpr, report.auc)}, out / "roc.svg",
                         f"ROC, {config.model} ({config.scenario})")
        plots.confusion(cm.as_grid(), out / "confusion.svg", title=f"{config.model} ({config.scenario})")
        plots.class_balance(prepared.class_counts_before, prepared.class_counts_after, out / "class_balance.svg")
        if prepared.ranking is not None:
            plots.feature_scores(prepared.feature_names, prepared.ranking.scores, prepared.ranking.selected,
                                 out / "feature_scores.svg", f"{config.scenario} scores")
    return RunResult(out, report, model, prepared, msgs, converged)


def run_experiment(config):
    config = config.resolved()
    prepared = prepare(config)
    return train_and_report(config, prepared, config.out)


def _grid_cell(args):
    cell, prepared = args
    return train_and_report(cell, prepared, cell.out)


def run_grid(config, scenarios=SCENARIOS, models=MODELS, jobs=1):
    """Every (scenario, model) cell into ``<out>/<scenario>/<model>/``; returns the results.

    Cells are independent, so ``jobs > 1`` runs them in worker processes; each
    cell writes only its own directory and the outputs do not depend on ``jobs``.
    """
    base = config.resolved()
    tasks = []
    for scenario in scenarios:
        sc = dataclasses.replace(base, scenario=canonical_scenario(scenario))
        prepared = prepare(sc)
        for model in models:
            name = canonical_model(model)
            cell = dataclasses.replace(sc, model=name, out=str(Path(base.out) / sc.scenario / name))
            tasks.append((cell, prepared))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_grid_cell, tasks))
    else:
        results = []
        for task in tasks:
            log.info("grid cell %s / %s", task[0].scenario, task[0].model)
            results.append(_grid_cell(task))
    write_report(base.out, svg=base.svg)
    return results


# --------------------------------------------------------------------------- report


def collect_reports(root):
    rows = []
    for path in sorted(Path(root).rglob("eval_report.json")):
        doc = json.loads(path.read_text())
        row = {"scenario": doc.get("scenario"), "model": doc.get("model"), "path": str(path.parent.relative_to(root))}
        for m in ("accuracy", "precision", "recall", "specificity", "f1", "auc"):
            row[m] = doc.get(m)
        summary = path.parent / "run_summary.json"
        if summary.exists():
            row["n_features_used"] = json.loads(summary.read_text())["n_features_used"]
        rows.append(row)
    return rows


def write_report(root, svg=False):
    root = Path(root)
    rows = collect_reports(root)
    metrics = ("accuracy", "precision", "recall", "specificity", "f1", "auc")
    cols = ["scenario", "model", "n_features_used", *metrics, "path"]
    write_csv(root / "results.csv", cols,
              [["" if r.get(c) is None else (repr(r[c]) if isinstance(r.get(c), float) else r[c]) for c in cols]
               for r in rows])
    write_json(root / "results.json", rows)
    if svg:
        for scenario in sorted({r["scenario"] for r in rows}):
            sub = [r for r in rows if r["scenario"] == scenario]
            plots.metric_groups(sub, metrics, root / f"metrics_{scenario}.svg", f"{scenario}: test metrics")
            curves = {}
            for r in sub:
                roc_path = root / r["path"] / "roc.csv"
                if roc_path.exists():
                    with open(roc_path) as fh:
                        pts = list(csv.DictReader(fh))
                    curves[r["model"]] = ([float(p["fpr"]) for p in pts], [float(p["tpr"]) for p in pts], r["auc"])
            if curves:
                plots.roc_curves(curves, root / f"roc_{scenario}.svg", f"ROC curves, {scenario}")
    return rows


def write_summary_stats(data, out, drop_columns=DEFAULT_DROP_COLUMNS, label_column=None):
    table = load_csv(data, drop_columns, label_column)
    stats = summary_statistics(table)
    cols = ["feature", "class", "count", "mean", "std", "min", "q1", "median", "q3", "max"]
    write_csv(Path(out) / "summary_stats.csv", cols,
              [[repr(s[c]) if isinstance(s[c], float) else s[c] for c in cols] for s in stats])
    return stats


# --------------------------------------------------------------------------- select


def run_selectors(config, methods=(INFO_GAIN, LASSO_L1, FISHER_SCORE)):
    config = config.resolved()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rankings = {}
    for method in methods:
        cfg = dataclasses.replace(config, scenario=canonical_scenario(method))
        prepared = prepare(cfg)
        r = prepared.ranking
        rankings[cfg.scenario] = r
        stem = cfg.scenario.lower()
        write_json(out / f"ranking_{stem}.json", r.to_dict(list(prepared.feature_names)))
        chosen = set(r.selected.tolist())
        write_csv(out / f"scores_{stem}.csv", ["feature", "score", "selected"],
                  [[n, repr(float(s)), int(i in chosen)]
                   for i, (n, s) in enumerate(zip(prepared.feature_names, r.scores))])
        if config.svg:
            plots.feature_scores(prepared.feature_names, r.scores, r.selected, out / f"scores_{stem}.svg",
                                 f"{cfg.scenario}: {len(r.selected)} of {len(r.scores)} features kept")
    (out / "config.json").write_text(config.to_json())
    return rankings


# --------------------------------------------------------------------------- explain


def load_for_bundle(bundle_path, data=None):
    """Load a bundle and the dataset it was trained on, preprocessed the same way.

    Returns ``(model, meta, full_table_scaled_selected, train_rows, test_rows)``.
    """
    model, meta = bundle.load(bundle_path)
    cfg = ExperimentConfig(**meta["config"])
    data = data or cfg.data
    table = load_csv(data, cfg.drop_columns, cfg.label_column)
    want = list(meta["feature_names"])
    have = {n: i for i, n in enumerate(table.feature_names)}
    missing = [n for n in want if n not in have]
    if missing:
        raise SchemaMismatch(f"dataset lacks bundle features: {missing[:5]}")
    table = table.with_features(table.features[:, [have[n] for n in want]], tuple(want))
    scaled = apply_minmax(table, ScalerParams(np.asarray(meta["scaler_min"]), np.asarray(meta["scaler_max"])))
    selected = apply_selection(scaled, np.asarray(meta["selected"], dtype=np.int64))
    train_rows, test_rows = split_indices(table.labels, SplitSpec(cfg.train_fraction, cfg.seed, cfg.stratified))
    return model, meta, selected, train_rows, test_rows


def explain_run(bundle_path, out, data=None, instance=None, global_=False, n_background=100, n_sample=20,
                n_coalition_samples=2048, exact_threshold=12, lime_perturbations=5000, seed=0, svg=False):
    model, meta, table, train_rows, test_rows = load_for_bundle(bundle_path, data)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(table.feature_names)
    bg = sample_background(table.features[train_rows], n_background, seed)
    shap_cfg = ShapConfig(background=bg, n_coalition_samples=n_coalition_samples,
                          exact_threshold=exact_threshold, seed=seed)
    written = {}
    if instance is not None:
        if not 0 <= instance < table.n_rows:
            raise DataError(f"instance {instance} out of range for {table.n_rows} rows")
        x = table.features[instance]
        attr = shap_values(model, x, shap_cfg)
        doc = attr.to_dict(names)
        doc.update(instance=int(instance), label=int(table.labels[instance]), instance_values=x.tolist())
        write_json(out / f"shap_instance_{instance}.json", doc)
        lime = lime_explain(model, x, LimeConfig(n_perturbations=lime_perturbations, seed=seed))
        ldoc = lime.to_dict(names)
        ldoc.update(instance=int(instance), label=int(table.labels[instance]), instance_values=x.tolist())
        write_json(out / f"lime_instance_{instance}.json", ldoc)
        written["shap"], written["lime"] = attr, lime
        if svg:
            p = attr.prediction
            plots.local_contributions(names, attr.feature_contribs, out / f"shap_instance_{instance}.svg",
                                      f"SHAP, row {instance}: P(keylogger)={p:.2f}")
            cls = "keylogger" if lime.prediction > 0.5 else "benign"
            conf = lime.prediction if cls == "keylogger" else 1 - lime.prediction
            plots.local_contributions(names, lime.feature_contribs, out / f"lime_instance_{instance}.svg",
                                      f"LIME, row {instance}: {cls} ({conf:.0%})")
    if global_:
        rows = test_rows
        if rows.size > n_sample:
            rows = np.sort(np.random.default_rng(seed).choice(rows, n_sample, replace=False))
        order, importance, phis = shap_global_importance(model, table.features[rows], shap_cfg)
        entries = [{"feature": names[i], "index": int(i), "mean_abs_shap": float(importance[i])} for i in order]
        write_json(out / "shap_global.json", {"n_sample": int(rows.size), "ranking": entries,
                                              "mode": "exact" if len(names) <= exact_threshold else "kernel"})
        write_csv(out / "shap_global.csv", ["feature", "mean_abs_shap"],
                  [[e["feature"], repr(e["mean_abs_shap"])] for e in entries])
        written["global"] = entries
        if svg:
            plots.global_importance(names, importance, out / "shap_global.svg")
    return written


def column_checksum(path):
    """SHA-256 over the normalized header names, for checking a user-supplied dataset."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        header = next(csv.reader(fh))
    joined = "\n".join(normalize_name(h) for h in header)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


REQUIRED_COLUMNS = ("Dst Port", "Protocol", "Flow Duration", "Tot Fwd Pkts", "Tot Bwd Pkts")


@dataclass
class DatasetCheck:
    checksum: str
    n_columns: int
    missing: list
    label_column: str | None
    matches_expected: bool | None

    @property
    def ok(self):
        return not self.missing and self.label_column is not None and self.matches_expected is not False


def verify_dataset(path, expected_checksum=None, required=REQUIRED_COLUMNS):
    """Check a user-supplied flow CSV before a long run.

    Confirms a label column and the core flow columns are present (names
    matched loosely) and reports the header checksum; when ``expected_checksum``
    is given, also whether it matches.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        header = next(csv.reader(fh), [])
    keys = {normalize_name(h): h.strip() for h in header}
    from .flowdata import LABEL_COLUMN_CANDIDATES

    label = next((keys[normalize_name(c)] for c in LABEL_COLUMN_CANDIDATES if normalize_name(c) in keys), None)
    missing = [c for c in required if normalize_name(c) not in keys]
    digest = column_checksum(path) if header else ""
    match = None if expected_checksum is None else digest == expected_checksum.lower()
    return DatasetCheck(digest, len(header), missing, label, match)
