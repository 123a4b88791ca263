"""Classification metrics, ROC/AUC, stratified folds and cross-validation.

Ratios whose denominator is zero are reported as ``None`` (JSON ``null``)
rather than 0 so that fold averages are not silently dragged down.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import FoldTooSmall, LengthMismatch, SingleClassLabels

METRIC_NAMES = ("accuracy", "precision", "recall", "specificity", "f1", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    def as_grid(self):
        """Rows are true class (benign, keylogger), columns the predicted class."""
        return [[self.tn, self.fp], [self.fn, self.tp]]


def _ratio(num, den):
    return num / den if den else None


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    specificity: float | None
    f1: float | None


def confusion_matrix(labels, predictions):
    y = np.asarray(labels).astype(np.int64)
    p = np.asarray(predictions).astype(np.int64)
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.shape[0]} labels vs {p.shape[0]} predictions")
    if y.size == 0:
        raise LengthMismatch("cannot score an empty prediction set")
    return ConfusionMatrix(
        tp=int(((y == 1) & (p == 1)).sum()), fp=int(((y == 0) & (p == 1)).sum()),
        tn=int(((y == 0) & (p == 0)).sum()), fn=int(((y == 1) & (p == 0)).sum()),
    )


def metrics_from_confusion(cm):
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(
        accuracy=(cm.tp + cm.tn) / cm.n,
        precision=precision,
        recall=recall,
        specificity=_ratio(cm.tn, cm.tn + cm.fp),
        f1=f1,
    )


def compute_metrics(labels, predictions):
    cm = confusion_matrix(labels, predictions)
    return cm, metrics_from_confusion(cm)


def roc_curve(labels, scores):
    """ROC staircase swept over distinct score thresholds, highest first.

    Returns ``(fpr, tpr, thresholds)``; the first point is (0, 0) at threshold
    +inf and the last is (1, 1).
    """
    y = np.asarray(labels).astype(np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch(f"{y.shape[0]} labels vs {s.shape[0]} scores")
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of every run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, s[ends]]
    return fpr, tpr, thresholds


def auc_trapezoid(fpr, tpr):
    fpr = np.asarray(fpr)
    tpr = np.asarray(tpr)
    return float(math.fsum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc_auc(labels, scores):
    fpr, tpr, _ = roc_curve(labels, scores)
    return list(zip(fpr.tolist(), tpr.tolist())), auc_trapezoid(fpr, tpr)


@dataclass
class EvalReport:
    accuracy: float
    precision: float | None
    recall: float | None
    specificity: float | None
    f1: float | None
    auc: float | None
    confusion: ConfusionMatrix
    roc_points: list = field(default_factory=list)
    n_evaluated: int = 0
    per_fold: list | None = None
    cv_summary: dict | None = None

    def metric(self, name):
        return getattr(self, name)

    def to_dict(self):
        d = asdict(self)
        d["confusion"] = asdict(self.confusion)
        d["roc_points"] = [list(p) for p in self.roc_points]
        if self.per_fold is not None:
            d["per_fold"] = [r.to_dict() if isinstance(r, EvalReport) else r for r in self.per_fold]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["confusion"] = ConfusionMatrix(**d["confusion"])
        d["roc_points"] = [tuple(p) for p in d["roc_points"]]
        if d.get("per_fold") is not None:
            d["per_fold"] = [cls.from_dict(r) for r in d["per_fold"]]
        return cls(**d)


def make_report(labels, scores, predictions=None):
    """Full metric report from probability scores (and optionally hard labels)."""
    scores = np.asarray(scores, dtype=np.float64)
    if predictions is None:
        predictions = (scores > 0.5).astype(np.int64)
    cm, m = compute_metrics(labels, predictions)
    try:
        roc, auc = roc_auc(labels, scores)
    except SingleClassLabels:
        roc, auc = [], None
    return EvalReport(m.accuracy, m.precision, m.recall, m.specificity, m.f1, auc, cm, roc, cm.n)


def evaluate_model(model, table):
    return make_report(table.labels, model.predict_proba(table.features), model.predict(table.features))


# --------------------------------------------------------------------------- folds and CV

_MASK64 = (1 << 64) - 1


def _splitmix64(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(_MASK64)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def row_hash(n, seed):
    """64-bit hash of (row index, seed) for every row."""
    with np.errstate(over="ignore"):
        idx = np.arange(n, dtype=np.uint64)
        return _splitmix64(idx ^ _splitmix64(np.full(n, seed & _MASK64, dtype=np.uint64)))


def stratified_folds(labels, k, seed):
    """Fold id per row: within each class rows are ordered by hash and dealt round-robin."""
    y = np.asarray(labels).astype(np.int64)
    h = row_hash(y.size, seed)
    folds = np.empty(y.size, dtype=np.int64)
    start = 0
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        rows = rows[np.argsort(h[rows], kind="stable")]
        folds[rows] = (start + np.arange(rows.size)) % k
        start = (start + rows.size) % k
    return folds


def _summarize(reports):
    out = {}
    for name in METRIC_NAMES:
        vals = [r.metric(name) for r in reports if r.metric(name) is not None]
        out[name] = {
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals)) if vals else None,
            "n_defined": len(vals),
        }
    return out


def cross_validate(table, learner, k=5, seed=0, smote_config=None):
    """Stratified k-fold CV; SMOTE (if configured) runs inside each training fold only.

    Returns an :class:`EvalReport` pooled over all held-out predictions with
    ``per_fold`` reports and a ``cv_summary`` of per-metric mean and std.
    """
    from .resample import smote

    if k < 2:
        raise FoldTooSmall("k must be >= 2")
    counts = table.class_counts()
    if counts.min() < k:
        raise FoldTooSmall(f"class counts {counts.tolist()} too small for {k} stratified folds")
    folds = stratified_folds(table.labels, k, seed)
    per_fold = []
    scores = np.empty(table.n_rows)
    preds = np.empty(table.n_rows, dtype=np.int64)
    for f in range(k):
        train = table.take(np.flatnonzero(folds != f))
        held_rows = np.flatnonzero(folds == f)
        held = table.take(held_rows)
        if smote_config is not None:
            train = smote(train, smote_config)
        model = learner.clone().fit_table(train)
        s = model.predict_proba(held.features)
        p = model.predict(held.features)
        scores[held_rows], preds[held_rows] = s, p
        per_fold.append(make_report(held.labels, s, p))
    pooled = make_report(table.labels, scores, preds)
    pooled.per_fold = per_fold
    pooled.cv_summary = _summarize(per_fold)
    return pooled


def grid_search(table, learner, param_grid, k=5, seed=0, metric="accuracy", smote_config=None):
    """Exhaustive search over ``param_grid`` scored by mean k-fold CV ``metric``.

    Returns ``(best_params, results)`` where results lists every candidate.
    Ties keep the earliest candidate in grid order.
    """
    names = sorted(param_grid)
    results = []
    best, best_score = {}, -np.inf
    for values in itertools.product(*(param_grid[n] for n in names)):
        params = dict(zip(names, values))
        cand = type(learner)(**{**learner.get_params(), **params})
        rep = cross_validate(table, cand, k, seed, smote_config)
        score = rep.cv_summary[metric]["mean"]
        score = -np.inf if score is None else score
        results.append({"params": params, "score": score})
        if score > best_score:
            best, best_score = params, score
    return best, results
