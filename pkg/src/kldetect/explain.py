"""Shapley-value attributions (exact and KernelSHAP) and LIME local surrogates.

Both explainers work on the model's class-1 probability. The Shapley value
function is interventional: ``v(S)`` is the mean model output over background
rows whose features in ``S`` are overwritten with the explained instance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePerturbations, DimensionMismatch, EmptyBackground, EmptySample
from .rng import keyed_rng

SHAP = "Shap"
LIME = "Lime"

# rows per model call when evaluating many coalitions at once
_EVAL_ROWS = 200_000


@dataclass
class Attribution:
    kind: str
    feature_contribs: np.ndarray
    base_value: float
    prediction: float
    fidelity: float
    extra: dict = field(default_factory=dict)

    def to_dict(self, feature_names=None):
        d = {
            "kind": self.kind,
            "feature_contribs": [float(v) for v in self.feature_contribs],
            "base_value": float(self.base_value),
            "prediction": float(self.prediction),
            "fidelity": float(self.fidelity),
        }
        if feature_names is not None:
            d["feature_names"] = list(feature_names)
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self, feature_names=None):
        return json.dumps(self.to_dict(feature_names), indent=2, sort_keys=True)


def _predict_fn(model):
    return model.predict_proba if hasattr(model, "predict_proba") else model


def _fsum_mean(values):
    return math.fsum(values) / len(values)


def sample_background(X, n=100, seed=0):
    """Seeded sample of up to ``n`` rows (without replacement) in original order."""
    X = getattr(X, "features", X)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyBackground("background sample is empty")
    if X.shape[0] <= n:
        return X.copy()
    rows = np.sort(keyed_rng(seed, "shap-background").choice(X.shape[0], size=n, replace=False))
    return X[rows]


@dataclass(frozen=True)
class ShapConfig:
    background: np.ndarray | None = None
    n_background: int = 100
    n_coalition_samples: int = 2048
    exact_threshold: int = 12
    seed: int = 0


def _check(instance, background):
    x = np.asarray(instance, dtype=np.float64).ravel()
    if background is None or len(background) == 0:
        raise EmptyBackground("a nonempty background sample is required")
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim != 2 or bg.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"instance has {x.shape[0]} features, background {bg.shape}")
    return x, bg


def _shapley_weights(m):
    """Weight |S|!(m-|S|-1)!/m! for every coalition size |S| = 0..m-1."""
    return np.array([math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m) for s in range(m)])


def exact_shapley(model, instance, background):
    """Exact interventional Shapley values by enumerating all 2^m coalitions.

    Returns ``(phi, base_value, prediction)``. The model is called once per
    coalition on an array of identical shape, so two coalitions that differ only
    in a feature the model never reads produce bit-identical values.
    """
    f = _predict_fn(model)
    x, bg = _check(instance, background)
    m = x.shape[0]
    n_masks = 1 << m
    v = np.empty(n_masks)
    for mask in range(n_masks):
        cols = [j for j in range(m) if mask >> j & 1]
        Z = bg.copy()
        Z[:, cols] = x[cols]
        v[mask] = _fsum_mean(f(Z))
    masks = np.arange(n_masks)
    sizes = np.array([bin(s).count("1") for s in range(n_masks)])
    w = _shapley_weights(m)
    phi = np.empty(m)
    for j in range(m):
        without = masks[(masks >> j & 1) == 0]
        phi[j] = math.fsum(w[sizes[without]] * (v[without | (1 << j)] - v[without]))
    return phi, float(v[0]), float(v[-1])


def _coalition_values(f, x, bg, masks):
    """Mean model output over the background for each boolean coalition row."""
    out = np.empty(masks.shape[0])
    per = max(1, _EVAL_ROWS // bg.shape[0])
    for start in range(0, masks.shape[0], per):
        mk = masks[start:start + per]
        Z = np.where(mk[:, None, :], x[None, None, :], bg[None, :, :]).reshape(-1, x.shape[0])
        vals = f(Z).reshape(mk.shape[0], bg.shape[0])
        out[start:start + per] = [_fsum_mean(row) for row in vals]
    return out


def kernel_coalitions(m, n_samples, seed=0):
    """Coalition masks and Shapley-kernel weights for KernelSHAP.

    Size groups ``{s, m - s}`` are enumerated completely, smallest ``s`` first,
    while the budget allows; the remaining kernel mass is spread over randomly
    drawn coalitions (each paired with its complement).
    """
    from itertools import combinations

    masks, weights = [], []
    groups = []
    for s in range(1, m // 2 + 1):
        paired = s != m - s
        mass = (m - 1) / (s * (m - s)) * (2 if paired else 1)
        count = math.comb(m, s) * (2 if paired else 1)
        groups.append((s, paired, mass, count))
    budget = n_samples
    g = 0
    while g < len(groups) and budget >= groups[g][3]:
        s, paired, _, count = groups[g]
        kernel = (m - 1) / (math.comb(m, s) * s * (m - s))
        for combo in combinations(range(m), s):
            mk = np.zeros(m, dtype=bool)
            mk[list(combo)] = True
            masks.append(mk)
            weights.append(kernel)
            if paired:
                masks.append(~mk)
                weights.append(kernel)
        budget -= count
        g += 1
    rest = groups[g:]
    if rest and budget > 0:
        rng = keyed_rng(seed, "kernel-shap")
        mass = np.array([r[2] for r in rest])
        mass_left = float(mass.sum())
        drawn = {}
        n_drawn = 0
        while n_drawn < budget:
            s, paired = rest[int(rng.choice(len(rest), p=mass / mass_left))][:2]
            mk = np.zeros(m, dtype=bool)
            mk[rng.choice(m, size=s, replace=False)] = True
            for cand in ((mk, ~mk) if paired else (mk,)):
                key = cand.tobytes()
                drawn[key] = drawn.get(key, 0) + 1
                n_drawn += 1
        for key in sorted(drawn):
            masks.append(np.frombuffer(key, dtype=bool).copy())
            weights.append(mass_left * drawn[key] / n_drawn)
    return np.array(masks, dtype=bool).reshape(-1, m), np.array(weights)


def kernel_shap(model, instance, background, n_samples=2048, seed=0):
    """KernelSHAP: Shapley-kernel weighted least squares with exact local accuracy."""
    f = _predict_fn(model)
    x, bg = _check(instance, background)
    m = x.shape[0]
    base = _fsum_mean(f(bg))
    fx = float(f(x[None, :])[0])
    delta = fx - base
    if m == 1:
        return np.array([delta]), base, fx
    masks, w = kernel_coalitions(m, n_samples, seed)
    y = _coalition_values(f, x, bg, masks) - base
    Zf = masks.astype(np.float64)
    A = Zf[:, :-1] - Zf[:, [-1]]
    b = y - Zf[:, -1] * delta
    sw = np.sqrt(w)
    sol = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)[0]
    phi = np.append(sol, delta - sol.sum())
    return phi, base, fx


def shap_values(model, instance, config=ShapConfig()):
    """Attribution for one instance; exact enumeration up to ``exact_threshold`` features."""
    bg = config.background
    if bg is None:
        raise EmptyBackground("ShapConfig.background must be set")
    m = np.asarray(instance).ravel().shape[0]
    if m <= config.exact_threshold:
        phi, base, pred = exact_shapley(model, instance, bg)
        mode = "exact"
    else:
        phi, base, pred = kernel_shap(model, instance, bg, config.n_coalition_samples, config.seed)
        mode = "kernel"
    residual = abs(base + math.fsum(phi) - pred)
    return Attribution(SHAP, phi, base, pred, residual, {"mode": mode})


def shap_global_importance(model, sample, config=ShapConfig()):
    """Mean |phi| per feature over ``sample``.

    Returns ``(order, importance, phi_matrix)`` with ``order`` listing feature
    indices by descending importance (ties by index).
    """
    X = np.asarray(getattr(sample, "features", sample), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptySample("global importance needs a nonempty sample")
    phis = np.stack([shap_values(model, x, config).feature_contribs for x in X])
    importance = np.abs(phis).mean(axis=0)
    order = np.lexsort((np.arange(importance.size), -importance))
    return order, importance, phis


# --------------------------------------------------------------------------- LIME


@dataclass(frozen=True)
class LimeConfig:
    n_perturbations: int = 5000
    kernel_width: float | None = None  # None: 0.75 * sqrt(n_features)
    ridge_lambda: float = 1.0
    top_k_features: int = 10
    noise_scale: float = 0.3
    seed: int = 0


def weighted_ridge(Z, y, w, lam):
    """Weighted ridge with an unpenalised intercept. Returns ``(coef, intercept)``."""
    sw = w.sum()
    zm = w @ Z / sw
    ym = float(w @ y / sw)
    Zc = Z - zm
    yc = y - ym
    G = (Zc * w[:, None]).T @ Zc + lam * np.eye(Z.shape[1])
    coef = np.linalg.solve(G, (Zc * w[:, None]).T @ yc)
    return coef, ym - float(zm @ coef)


def weighted_r2(y, yhat, w):
    ym = w @ y / w.sum()
    ss_tot = float(w @ (y - ym) ** 2)
    ss_res = float(w @ (y - yhat) ** 2)
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)


def lime_explain(model, instance, config=LimeConfig()):
    """Local linear surrogate fitted to Gaussian perturbations around ``instance``.

    Regressors are offsets from the instance, so the intercept is the
    surrogate's prediction at the instance itself. Features outside the
    ``top_k_features`` largest |coefficients| get zero weight after a refit.
    """
    f = _predict_fn(model)
    x = np.asarray(instance, dtype=np.float64).ravel()
    m = x.shape[0]
    if config.n_perturbations < config.top_k_features + 1:
        raise ValueError("n_perturbations must exceed top_k_features")
    width = config.kernel_width if config.kernel_width is not None else 0.75 * math.sqrt(m)
    rng = keyed_rng(config.seed, "lime")
    offsets = config.noise_scale * rng.standard_normal((config.n_perturbations, m))
    offsets[0] = 0.0
    preds = np.asarray(f(x + offsets), dtype=np.float64)
    d2 = np.einsum("ij,ij->i", offsets, offsets)
    if not width > 0:
        raise ValueError("kernel_width must be positive")
    if math.isinf(width):
        w = np.ones_like(d2)
    else:
        with np.errstate(over="ignore", divide="ignore"):
            w = np.exp(-(d2 / width) / width)
    # row 0 is the instance itself and always has weight 1
    if not w[1:].sum() > 0:
        raise DegeneratePerturbations("every perturbed sample has zero kernel weight; widen kernel_width")

    coef_all, _ = weighted_ridge(offsets, preds, w, config.ridge_lambda)
    k = min(config.top_k_features, m)
    top = np.sort(np.lexsort((np.arange(m), -np.abs(coef_all)))[:k])
    coef_k, intercept = weighted_ridge(offsets[:, top], preds, w, config.ridge_lambda)
    fidelity = weighted_r2(preds, intercept + offsets[:, top] @ coef_k, w)
    contribs = np.zeros(m)
    contribs[top] = coef_k
    prediction = float(preds[0])
    extra = {
        "top_features": [int(i) for i in top],
        "predicted_class": int(prediction > 0.5),
        "kernel_width": float(width),
    }
    return Attribution(LIME, contribs, float(intercept), prediction, fidelity, extra)
