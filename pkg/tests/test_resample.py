import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_table
from oracles import knn_brute
from kldetect.errors import DataWarning, MinorityTooSmall
from kldetect.resample import SmoteConfig, nearest_neighbors, smote, smote_detailed


def check_synthetic(train, res, tol=1e-9):
    """Every synthetic row lies on a segment to one of its base row's k nearest minority neighbours."""
    minority = res.table.labels[-1]
    min_rows = np.flatnonzero(train.labels == minority)
    pts = train.features[min_rows]
    pos = {int(r): i for i, r in enumerate(min_rows)}
    synth = res.table.features[train.n_rows:]
    for s, b, p, g in zip(synth, res.base_rows, res.neighbor_rows, res.gaps):
        assert train.labels[b] == minority and train.labels[p] == minority
        assert pos[int(p)] in knn_brute(pts, pos[int(b)], res.k_used)
        assert 0.0 <= g <= 1.0
        x_b, x_p = train.features[b], train.features[p]
        assert np.all(np.abs(s - (x_b + g * (x_p - x_b))) <= tol)
        lo, hi = np.minimum(x_b, x_p), np.maximum(x_b, x_p)
        assert np.all(s >= lo - tol) and np.all(s <= hi + tol)


def test_two_point_segment():
    t = make_table([[5.0, 5.0]] * 3 + [[0.0, 0.0], [1.0, 1.0]], [0, 0, 0, 1, 1])
    res = smote_detailed(t, SmoteConfig(k_neighbors=1, seed=4))
    synth = res.table.features[5:]
    assert synth.shape == (1, 2)
    g = res.gaps[0]
    b = t.features[res.base_rows[0]]
    assert np.allclose(synth[0], b + g * (t.features[res.neighbor_rows[0]] - b))
    assert synth[0, 0] == synth[0, 1] and 0.0 <= synth[0, 0] <= 1.0


def test_balance_contract(rng):
    t = make_table(rng.random((14, 3)), [0] * 10 + [1] * 4)
    out = smote(t, SmoteConfig(k_neighbors=3))
    assert out.class_counts().tolist() == [10, 10]
    # originals untouched and first
    assert out.features[:14].tobytes() == t.features.tobytes()


def test_partial_ratio(rng):
    t = make_table(rng.random((30, 2)), [0] * 20 + [1] * 10)
    out = smote(t, SmoteConfig(target_ratio=0.75))
    assert out.class_counts().tolist() == [20, 15]


def test_majority_label_one(rng):
    t = make_table(rng.random((12, 2)), [1] * 9 + [0] * 3)
    out = smote(t, SmoteConfig(k_neighbors=2))
    assert out.class_counts().tolist() == [9, 9]


def test_seeded_toy_against_brute_force(rng):
    t = make_table(rng.random((20, 3)), [0] * 14 + [1] * 6)
    res = smote_detailed(t, SmoteConfig(k_neighbors=3, seed=7))
    check_synthetic(t, res)


def test_determinism(rng):
    t = make_table(rng.random((40, 4)), [0] * 30 + [1] * 10)
    a = smote(t, SmoteConfig(seed=3))
    b = smote(t, SmoteConfig(seed=3))
    c = smote(t, SmoteConfig(seed=4))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.features.tobytes() != c.features.tobytes()


def test_k_clamped_with_warning(rng):
    t = make_table(rng.random((13, 2)), [0] * 10 + [1] * 3)
    with pytest.warns(DataWarning):
        res = smote_detailed(t, SmoteConfig(k_neighbors=5))
    assert res.k_used == 2
    check_synthetic(t, res)


def test_minority_too_small(rng):
    with pytest.raises(MinorityTooSmall):
        smote(make_table(rng.random((5, 2)), [0, 0, 0, 0, 1]))


def test_already_balanced_is_identity(rng):
    t = make_table(rng.random((6, 2)), [0, 1] * 3)
    assert smote(t).features.tobytes() == t.features.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        SmoteConfig(k_neighbors=0)
    with pytest.raises(ValueError):
        SmoteConfig(target_ratio=1.5)


def test_nearest_neighbors_matches_brute(rng):
    pts = rng.random((60, 3))
    nn = nearest_neighbors(pts, 4)
    for i in range(60):
        assert set(nn[i].tolist()) <= knn_brute(pts, i, 4)
        assert i not in nn[i]


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 40), st.integers(1, 6), st.integers(0, 2**31))
def test_property_segments(n_min, extra, k, seed):
    rng = np.random.default_rng(seed)
    n_maj = n_min + extra
    t = make_table(rng.random((n_min + n_maj, 3)).round(2), [0] * n_maj + [1] * n_min)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataWarning)
        res = smote_detailed(t, SmoteConfig(k_neighbors=k, seed=seed))
    assert res.table.class_counts().tolist() == [n_maj, n_maj]
    check_synthetic(t, res)
