"""SVG renderers for the report figures.

Renderers are thin: every figure is drawn from data that is also written as
CSV/JSON, and SVG output carries no timestamp and a fixed id salt so repeated
runs produce identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "kldetect",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})

BENIGN_COLOR = "#4C72B0"
KEYLOGGER_COLOR = "#C44E52"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def feature_scores(names, scores, selected, path, title="Feature scores", max_bars=40):
    """Horizontal bars, highest score on top; selected features highlighted."""
    scores = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(scores.size), -scores))[:max_bars]
    chosen = set(int(i) for i in selected)
    fig, ax = plt.subplots(figsize=(6, 0.22 * len(order) + 1.2))
    ax.barh(range(len(order)), scores[order][::-1],
            color=[KEYLOGGER_COLOR if i in chosen else "#999999" for i in order[::-1]])
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels([names[i] for i in order[::-1]])
    ax.set_xlabel("score")
    ax.set_title(title)
    return _save(fig, path)


def roc_curves(curves, path, title="ROC curve"):
    """``curves`` maps a label to ``(fpr, tpr, auc)``."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for label, (fpr, tpr, auc) in curves.items():
        ax.plot(fpr, tpr, drawstyle="steps-post", lw=1.4,
                label=f"{label} (AUC={auc:.3f})" if auc is not None else label)
    ax.plot([0, 1], [0, 1], ls="--", color="#bbbbbb", lw=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=7, frameon=False)
    return _save(fig, path)


def confusion(grid, path, labels=("benign", "keylogger"), title="Confusion matrix"):
    grid = np.asarray(grid)
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    ax.imshow(grid, cmap="Blues")
    for i in range(2):
        for j in range(2):
            ax.text(j, i, str(int(grid[i, j])), ha="center", va="center",
                    color="white" if grid[i, j] > grid.max() / 2 else "black")
    ax.set_xticks([0, 1])
    ax.set_xticklabels(labels)
    ax.set_yticks([0, 1])
    ax.set_yticklabels(labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title)
    return _save(fig, path)


def class_balance(before, after, path, labels=("benign", "keylogger")):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    x = np.arange(2)
    ax.bar(x - 0.2, before, 0.4, label="before SMOTE", color="#999999")
    ax.bar(x + 0.2, after, 0.4, label="after SMOTE", color=[BENIGN_COLOR, KEYLOGGER_COLOR])
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel("rows")
    ax.legend(frameon=False)
    return _save(fig, path)


def metric_groups(rows, metrics, path, title="Model comparison"):
    """Grouped bars: one group per model, one bar per metric."""
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(rows)), 3.6))
    width = 0.8 / len(metrics)
    x = np.arange(len(rows))
    for k, m in enumerate(metrics):
        vals = [r.get(m) if r.get(m) is not None else 0.0 for r in rows]
        ax.bar(x + (k - (len(metrics) - 1) / 2) * width, vals, width, label=m)
    ax.set_xticks(x)
    ax.set_xticklabels([r["model"] for r in rows], rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(ncol=len(metrics), fontsize=7, frameon=False, loc="lower center", bbox_to_anchor=(0.5, 1.02))
    return _save(fig, path)


def global_importance(names, importance, path, top=20, title="Mean |SHAP value|"):
    importance = np.asarray(importance, dtype=float)
    order = np.lexsort((np.arange(importance.size), -importance))[:top]
    fig, ax = plt.subplots(figsize=(6, 0.24 * len(order) + 1.2))
    ax.barh(range(len(order)), importance[order][::-1], color=KEYLOGGER_COLOR)
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels([names[i] for i in order[::-1]])
    ax.set_xlabel("mean |contribution to P(keylogger)|")
    ax.set_title(title)
    return _save(fig, path)


def local_contributions(names, values, path, title="Local explanation", top=10):
    """Signed bars; positive pushes toward keylogger, negative toward benign."""
    values = np.asarray(values, dtype=float)
    order = np.lexsort((np.arange(values.size), -np.abs(values)))[:top]
    order = [i for i in order if values[i] != 0] or list(order[:1])
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(order) + 1.2))
    v = values[order][::-1]
    ax.barh(range(len(order)), v, color=[KEYLOGGER_COLOR if a > 0 else BENIGN_COLOR for a in v])
    ax.axvline(0, color="black", lw=0.6)
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels([names[i] for i in order[::-1]])
    ax.set_title(title)
    return _save(fig, path)
