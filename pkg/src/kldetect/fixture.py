"""Synthetic CICFlowMeter-style flow table with a planted keylogger signal.

The real Kaggle file is not redistributed; this fixture mimics its layout
(identifier columns, a few ``Infinity`` rates, a string class column) so the
full pipeline can run in CI.
"""
from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

import numpy as np

from .rng import keyed_rng

FIXTURE_ROWS = 2000
FIXTURE_SEED = 20240601

NUMERIC_COLUMNS = (
    "Flow Duration", "Tot Fwd Pkts", "Tot Bwd Pkts", "TotLen Fwd Pkts", "TotLen Bwd Pkts",
    "Fwd Pkt Len Max", "Fwd Pkt Len Min", "Fwd Pkt Len Mean", "Fwd Pkt Len Std",
    "Bwd Pkt Len Max", "Bwd Pkt Len Min", "Bwd Pkt Len Mean",
    "Flow Byts/s", "Flow Pkts/s", "Flow IAT Mean", "Pkt Len Min", "Pkt Len Max", "Pkt Len Std",
    "Subflow Bwd Byts", "Init Fwd Win Byts", "Down/Up Ratio", "Bwd PSH Flags",
)
HEADER = ("Unnamed: 0", "Flow ID", "Source IP", "Src Port", "Destination IP", "Dst Port", "Protocol",
          "Timestamp", *NUMERIC_COLUMNS, "Class")

_KEYLOGGER_PORTS = np.array([21, 25, 465, 587, 8080])
_BENIGN_PORTS = np.array([53, 80, 443])


def _ip(rng, n, prefix):
    return [f"{prefix}.{a}.{b}" for a, b in zip(rng.integers(0, 255, n), rng.integers(1, 255, n))]


def generate_rows(n=FIXTURE_ROWS, seed=FIXTURE_SEED, keylogger_share=0.35):
    rng = keyed_rng(seed, "fixture")
    y = (rng.random(n) < keylogger_share).astype(int)
    kl = y == 1

    use_known = rng.random(n) < np.where(kl, 0.7, 0.75)
    dst = np.where(kl, rng.choice(_KEYLOGGER_PORTS, n), rng.choice(_BENIGN_PORTS, n))
    dst = np.where(use_known, dst, rng.integers(1024, 65535, n))
    proto = np.where(rng.random(n) < np.where(kl, 0.9, 0.7), 6, 17)

    fwd_pkts = 1 + rng.poisson(np.where(kl, 6, 10))
    bwd_pkts = rng.poisson(np.where(kl, 4, 9))
    fwd_mean = rng.gamma(np.where(kl, 4.0, 3.0), np.where(kl, 26.0, 40.0))
    fwd_std = rng.gamma(np.where(kl, 2.5, 3.0), np.where(kl, 16.0, 20.0))
    fwd_max = fwd_mean + 2.0 * fwd_std * rng.random(n)
    fwd_min = np.maximum(fwd_mean - 2.0 * fwd_std * rng.random(n), 0.0)
    bwd_mean = rng.gamma(np.where(kl, 3.0, 2.5), np.where(kl, 80.0, 70.0)) * (bwd_pkts > 0)
    bwd_max = bwd_mean * (1.0 + rng.gamma(np.where(kl, 2.0, 1.0), 0.6, n))
    bwd_min = bwd_mean * rng.random(n) * 0.5
    duration = np.round(rng.lognormal(np.where(kl, 11.0, 10.0), 1.5)).astype(np.int64)
    duration[rng.random(n) < 0.01] = 0
    tot_fwd = fwd_pkts * fwd_mean
    tot_bwd = bwd_pkts * bwd_mean
    with np.errstate(divide="ignore"):
        byts_s = np.where(duration > 0, (tot_fwd + tot_bwd) / (duration / 1e6), np.inf)
        pkts_s = np.where(duration > 0, (fwd_pkts + bwd_pkts) / (duration / 1e6), np.inf)
    iat = duration / np.maximum(fwd_pkts + bwd_pkts - 1, 1)
    pkt_min = np.minimum(fwd_min, np.where(bwd_pkts > 0, bwd_min, fwd_min))
    pkt_max = np.maximum(fwd_max, bwd_max)
    pkt_std = 0.5 * (fwd_std + np.abs(bwd_max - bwd_min) / 2.0) * rng.lognormal(0.0, 0.3, n)
    win = np.where(rng.random(n) < np.where(kl, 0.6, 0.3), 8192, rng.integers(0, 65535, n))
    ratio = np.floor(bwd_pkts / fwd_pkts)

    numeric = np.column_stack([
        duration, fwd_pkts, bwd_pkts, tot_fwd, tot_bwd, fwd_max, fwd_min, fwd_mean, fwd_std,
        bwd_max, bwd_min, bwd_mean, byts_s, pkts_s, iat, pkt_min, pkt_max, pkt_std,
        tot_bwd, win, ratio, np.zeros(n),
    ])
    src = _ip(rng, n, "192.168")
    dst_ip = _ip(rng, n, "10.0")
    sport = rng.integers(1024, 65535, n)
    missing = rng.random(n) < 0.002
    rows = []
    for i in range(n):
        cells = []
        for v in numeric[i]:
            if np.isinf(v):
                cells.append("Infinity")
            elif float(v).is_integer():
                cells.append(str(int(v)))
            else:
                cells.append(f"{v:.6f}")
        if missing[i]:
            cells[NUMERIC_COLUMNS.index("Flow IAT Mean")] = ""
        flow_id = f"{src[i]}-{dst_ip[i]}-{sport[i]}-{dst[i]}-{proto[i]}"
        stamp = f"2019-07-{1 + i % 28:02d} {i % 24:02d}:{i % 60:02d}:{(7 * i) % 60:02d}"
        rows.append([str(i), flow_id, src[i], str(sport[i]), dst_ip[i], str(dst[i]), str(proto[i]),
                     stamp, *cells, "Keylogger" if y[i] else "Benign"])
    return rows


def write_fixture(path, n=FIXTURE_ROWS, seed=FIXTURE_SEED):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(generate_rows(n, seed))
    return path


def fixture_path():
    """Path to the 2,000-row fixture shipped inside the package."""
    return Path(str(resources.files("kldetect") / "data" / "fixture_flows.csv"))
