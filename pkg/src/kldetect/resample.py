"""SMOTE oversampling of the minority class."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataWarning, MinorityTooSmall
from .flowdata import FlowTable
from .rng import keyed_rng

# bound on the pairwise-distance block held in memory at once
_BLOCK_CELLS = 4_000_000


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must lie in (0, 1]")


@dataclass(frozen=True)
class SmoteResult:
    """Resampled table plus the provenance of each synthetic row."""

    table: FlowTable
    base_rows: np.ndarray  # index into the input table
    neighbor_rows: np.ndarray  # index into the input table
    gaps: np.ndarray  # interpolation factor in [0, 1]
    k_used: int


def nearest_neighbors(points, k):
    """Exact Euclidean k nearest neighbours of each point among ``points``, self excluded.

    Returned indices are ordered by increasing distance, ties by index.
    """
    n = points.shape[0]
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.int64)
    block = max(1, _BLOCK_CELLS // max(n, 1))
    for start in range(0, n, block):
        stop = min(start + block, n)
        rows = np.arange(start, stop)
        d2 = sq[rows, None] + sq[None, :] - 2.0 * points[rows] @ points.T
        d2[rows - start, rows] = np.inf
        # the expansion is fast but its rounding can reorder near-ties, so it
        # only shortlists; the shortlist is re-ranked on direct differences
        kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
        slack = 1e-9 * (sq[rows] + sq.max() + 1.0)
        for r, i in enumerate(rows):
            cand = np.flatnonzero(d2[r] <= kth[r] + slack[r])
            diff = points[cand] - points[i]
            exact = np.einsum("ij,ij->i", diff, diff)
            out[i] = cand[np.lexsort((cand, exact))[:k]]
    return out


def smote_detailed(train, config=SmoteConfig()):
    counts = train.class_counts()
    minority = int(np.argmin(counts))
    if counts[0] == counts[1]:
        minority = 1
    n_min, n_maj = int(counts[minority]), int(counts[1 - minority])
    target = int(np.floor(config.target_ratio * n_maj + 1e-9))
    n_new = max(target - n_min, 0)
    if n_new == 0:
        empty = np.empty(0, dtype=np.int64)
        return SmoteResult(train, empty, empty, np.empty(0), config.k_neighbors)
    if n_min < 2:
        raise MinorityTooSmall(f"minority class has {n_min} row(s); SMOTE needs at least 2")

    k = config.k_neighbors
    if k > n_min - 1:
        warnings.warn(
            f"k_neighbors={k} exceeds minority size - 1; using k={n_min - 1}",
            DataWarning, stacklevel=2,
        )
        k = n_min - 1

    min_rows = np.flatnonzero(train.labels == minority)
    pts = train.features[min_rows]
    nn = nearest_neighbors(pts, k)

    # synthetic budget spread evenly over minority rows; a seeded permutation
    # decides which rows take the remainder
    per_row = np.full(n_min, n_new // n_min, dtype=np.int64)
    extra = keyed_rng(config.seed, "smote-alloc").permutation(n_min)[: n_new % n_min]
    per_row[extra] += 1

    base, partner, gaps = [], [], []
    for i in np.flatnonzero(per_row):
        rng = keyed_rng(config.seed, "smote-row", int(i))
        c = int(per_row[i])
        base.append(np.full(c, i))
        partner.append(nn[i, rng.integers(0, k, size=c)])
        gaps.append(rng.random(c))
    base = np.concatenate(base)
    partner = np.concatenate(partner)
    gaps = np.concatenate(gaps)

    synthetic = pts[base] + gaps[:, None] * (pts[partner] - pts[base])
    features = np.vstack([train.features, synthetic])
    labels = np.concatenate([train.labels, np.full(n_new, minority)])
    table = FlowTable(train.feature_names, features, labels, train.label_names)
    return SmoteResult(table, min_rows[base], min_rows[partner], gaps, k)


def smote(train, config=SmoteConfig()):
    """Append synthetic minority rows until the class ratio reaches ``config.target_ratio``.

    Apply to the training partition only. Synthetic rows are appended after the
    original rows, which are left untouched.
    """
    return smote_detailed(train, config).table
