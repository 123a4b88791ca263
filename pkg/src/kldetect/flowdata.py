"""Loading, sanitizing, scaling and splitting pre-featurized flow tables."""
from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyFile,
    EmptyTable,
    InsufficientRows,
    MalformedRow,
    MissingLabelColumn,
)
from .rng import keyed_rng

log = logging.getLogger(__name__)

DEFAULT_DROP_COLUMNS = ("Unnamed: 0", "Flow ID", "Timestamp", "Source IP", "Destination IP")
LABEL_COLUMN_CANDIDATES = ("Class", "Label")
BENIGN_NAMES = ("benign", "normal", "0")
LABEL_NAMES = ("benign", "keylogger")


def normalize_name(name):
    """Case- and whitespace/underscore-insensitive column key."""
    return re.sub(r"[\s_]+", "", str(name)).lower()


@dataclass(frozen=True)
class FlowTable:
    feature_names: tuple
    features: np.ndarray
    labels: np.ndarray
    label_names: tuple = LABEL_NAMES

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatch(
                f"labels length {labels.shape} does not match {features.shape[0]} rows"
            )
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != features.shape[1]:
            raise DimensionMismatch(
                f"{len(names)} feature names for {features.shape[1]} columns"
            )
        if len(set(names)) != len(names):
            raise DimensionMismatch("feature names must be unique")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DimensionMismatch("labels must be 0/1 class codes")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=2)

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return FlowTable(self.feature_names, self.features[rows], self.labels[rows], self.label_names)

    def with_features(self, features, feature_names=None):
        names = self.feature_names if feature_names is None else feature_names
        return FlowTable(names, features, self.labels, self.label_names)


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass
class LoadReport:
    """What the loader dropped or repaired; useful for logging, not for logic."""

    dropped_columns: list = field(default_factory=list)
    replaced_inf: int = 0
    replaced_nan: int = 0
    label_mapping: dict = field(default_factory=dict)


def _parse_column(values, column):
    try:
        return np.asarray(values, dtype=np.float64)
    except ValueError:
        out = np.empty(len(values), dtype=np.float64)
        for i, v in enumerate(values):
            try:
                out[i] = float(v)
            except ValueError:
                out[i] = np.nan
        bad = int(np.isnan(out).sum())
        log.warning("column %r: %d non-numeric cells treated as missing", column, bad)
        return out


def sanitize(features, report=None):
    """Replace +/-inf with the column's finite max/min and NaN with its finite median.

    Columns with no finite value at all become 0.
    """
    features = np.array(features, dtype=np.float64, copy=True)
    for j in range(features.shape[1]):
        col = features[:, j]
        finite = np.isfinite(col)
        if finite.all():
            continue
        if finite.any():
            fin = col[finite]
            hi, lo, med = fin.max(), fin.min(), float(np.median(fin))
        else:
            hi = lo = med = 0.0
        pos, neg, nan = col == np.inf, col == -np.inf, np.isnan(col)
        col[pos], col[neg], col[nan] = hi, lo, med
        if report is not None:
            report.replaced_inf += int(pos.sum() + neg.sum())
            report.replaced_nan += int(nan.sum())
    return features


def encode_labels(raw):
    """Map class strings to {0, 1} with benign-like names fixed to 0."""
    observed = sorted({str(v).strip() for v in raw})
    if len(observed) > 2:
        raise MalformedRow(-1, "label", f"expected a binary label, found classes {observed}")
    mapping = {}
    benign = [s for s in observed if s.lower() in BENIGN_NAMES]
    if benign:
        mapping[benign[0]] = 0
        for s in observed:
            mapping.setdefault(s, 1)
    else:
        # unknown vocabulary: lexical order, so the result is at least stable
        for code, s in enumerate(observed):
            mapping[s] = code
        log.warning("no benign-like class name in %s; using lexical order", observed)
    labels = np.array([mapping[str(v).strip()] for v in raw], dtype=np.int64)
    return labels, mapping


def load_csv(path, drop_columns=DEFAULT_DROP_COLUMNS, label_column=None, report=None):
    """Read a CICFlowMeter-style CSV into a sanitized :class:`FlowTable`."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} is empty") from None
        rows = []
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(
                    lineno, header[min(len(row), len(header)) - 1].strip(),
                    f"expected {len(header)} fields, got {len(row)}",
                )
            rows.append(row)
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")

    keys = [normalize_name(h) for h in header]
    if label_column is not None:
        label_keys = [normalize_name(label_column)]
    else:
        label_keys = [normalize_name(c) for c in LABEL_COLUMN_CANDIDATES]
    label_idx = next((keys.index(k) for k in label_keys if k in keys), None)
    if label_idx is None:
        wanted = label_column or " or ".join(LABEL_COLUMN_CANDIDATES)
        raise MissingLabelColumn(f"{path}: no label column named {wanted}")

    report = report if report is not None else LoadReport()
    drop_keys = {normalize_name(c) for c in drop_columns}
    # a second label-like column would leak the target into the features
    drop_keys |= {normalize_name(c) for c in LABEL_COLUMN_CANDIDATES}
    columns = list(zip(*rows))
    names, cols = [], []
    for j, (name, key) in enumerate(zip(header, keys)):
        if j == label_idx:
            continue
        if key in drop_keys:
            report.dropped_columns.append(name.strip())
            continue
        names.append(name.strip())
        cols.append(_parse_column(columns[j], name.strip()))

    labels, mapping = encode_labels(columns[label_idx])
    report.label_mapping = mapping
    features = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    features = sanitize(features, report)
    if report.replaced_inf or report.replaced_nan:
        log.info("sanitized %d infinite and %d missing cells", report.replaced_inf, report.replaced_nan)
    return FlowTable(tuple(names), features, labels)


def fit_minmax(table):
    if table.n_rows == 0:
        raise EmptyTable("cannot fit a scaler on an empty table")
    return ScalerParams(table.features.min(axis=0), table.features.max(axis=0))


def apply_minmax(table, params, clamp=True):
    """Scale to [0, 1]; degenerate columns map to 0 and out-of-range values are clamped."""
    if params.mins.shape != (table.n_features,):
        raise DimensionMismatch(
            f"scaler fitted on {params.mins.shape[0]} features, table has {table.n_features}"
        )
    span = params.maxs - params.mins
    live = span > 0
    scaled = np.zeros_like(table.features)
    scaled[:, live] = (table.features[:, live] - params.mins[live]) / span[live]
    if clamp:
        np.clip(scaled, 0.0, 1.0, out=scaled)
    return table.with_features(scaled)


def invert_minmax(table, params):
    return table.with_features(table.features * (params.maxs - params.mins) + params.mins)


def split_indices(labels, spec):
    """Return sorted (train_rows, test_rows) index arrays."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    rng = keyed_rng(spec.seed, "train_test_split")
    if spec.stratified:
        train = []
        for c in (0, 1):
            rows = np.flatnonzero(labels == c)
            if rows.size == 0:
                continue
            if rows.size < 2:
                raise InsufficientRows(f"class {c} has {rows.size} row(s); stratified split needs 2")
            rows = rows[rng.permutation(rows.size)]
            k = min(max(int(math.floor(spec.train_fraction * rows.size + 0.5)), 1), rows.size - 1)
            train.append(rows[:k])
        train = np.concatenate(train)
    else:
        if n < 2:
            raise InsufficientRows("need at least 2 rows to split")
        k = min(max(int(math.floor(spec.train_fraction * n + 0.5)), 1), n - 1)
        train = rng.permutation(n)[:k]
    mask = np.zeros(n, dtype=bool)
    mask[train] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def train_test_split(table, spec=SplitSpec()):
    train, test = split_indices(table.labels, spec)
    return table.take(train), table.take(test)


def save_cache(table, path):
    """Lossless columnar cache (npz); float64 values round-trip bit-exactly."""
    np.savez(
        path,
        features=table.features,
        labels=table.labels,
        feature_names=np.array(table.feature_names, dtype=str),
        label_names=np.array(table.label_names, dtype=str),
    )


def load_cache(path):
    with np.load(path) as z:
        return FlowTable(
            tuple(z["feature_names"].tolist()),
            z["features"],
            z["labels"],
            tuple(z["label_names"].tolist()),
        )


def summary_statistics(table):
    """Per-feature descriptive statistics split by class, as a list of dict rows."""
    out = []
    for j, name in enumerate(table.feature_names):
        for c, cname in enumerate(table.label_names):
            col = table.features[table.labels == c, j]
            if col.size == 0:
                continue
            q1, med, q3 = np.percentile(col, [25, 50, 75])
            out.append({
                "feature": name, "class": cname, "count": int(col.size),
                "mean": float(col.mean()), "std": float(col.std()),
                "min": float(col.min()), "q1": float(q1), "median": float(med),
                "q3": float(q3), "max": float(col.max()),
            })
    return out
