import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpknock.datamodel import AugmentedDataset, Dataset
from dpknock.statistics import (
    Family,
    RidgeConfig,
    SgdConfig,
    centered_gram,
    compute_stats,
    hsic_sensitivity,
    hsic_stats,
    hsic_values,
    marginal_corr_stats,
    marginal_sensitivity,
    median_heuristic,
    ridge_sensitivity,
    ridge_stats,
    screening_stats,
    sgd_constants,
    sgd_min_lambda,
    sgd_sensitivity,
    sgd_stats,
)
from dpknock.verify import default_family_configs, verify_sensitivity

from conftest import make_aug


def _aug(X, Xt, y, c_x=10.0, c_y=10.0):
    X = np.asarray(X, dtype=float)
    base = Dataset(X, np.asarray(y, dtype=float), c_x, c_y)
    Xt = np.clip(np.asarray(Xt, dtype=float), -c_x, c_x)
    p = X.shape[1]
    return AugmentedDataset(base, Xt, 0, np.eye(p), np.zeros(p), np.arange(X.shape[0]))


def _family_kwargs(aug):
    ridge, sgd = default_family_configs(aug.n, aug.p, aug.base.c_x, aug.base.c_y)
    return {"ridge": ridge, "sgd": sgd}


def test_marginal_small_example():
    aug = _aug([[1.0], [1.0]], [[1.0], [-1.0]], [1.0, 1.0])
    assert marginal_corr_stats(aug).w[0] == 1.0


def test_marginal_sensitivity_value():
    assert marginal_sensitivity(100, 1.0, 3.0) == pytest.approx(0.12, abs=1e-15)


@pytest.mark.parametrize("family", list(Family))
def test_identical_knockoffs_give_zero(family):
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (40, 3))
    aug = _aug(X, X, X[:, 0] + rng.standard_normal(40), c_x=1.0, c_y=4.0)
    w = compute_stats(aug, family, **_family_kwargs(aug)).w
    np.testing.assert_allclose(w, 0.0, atol=1e-12)


def test_feature_ids_are_one_based(aug):
    st_ = marginal_corr_stats(aug, features=[4, 1])
    assert list(st_.feature_ids) == [5, 2]
    assert st_.sensitivity_l2 == pytest.approx(st_.sensitivity * math.sqrt(2))
    assert st_.to_rows()[0]["feature_id"] == 5


# --- HSIC ----------------------------------------------------------------

def _hsic_brute(x, y, bx, by):
    n = len(x)
    K = np.exp(-np.subtract.outer(x, x) ** 2 / (2 * bx**2))
    L = np.exp(-np.subtract.outer(y, y) ** 2 / (2 * by**2))
    t1 = t2 = t3 = 0.0
    for i, j in itertools.product(range(n), repeat=2):
        t1 += K[i, j] * L[i, j]
    for i, j, k, l in itertools.product(range(n), repeat=4):
        t2 += K[i, j] * L[k, l]
    for i, j, k in itertools.product(range(n), repeat=3):
        t3 += K[i, j] * L[i, k]
    return t1 / n**2 + t2 / n**4 - 2 * t3 / n**3


def test_hsic_matches_three_term_oracle(backend):
    x = np.array([0.3, -1.2, 0.8, 2.0])
    y = np.array([1.0, -0.5, 0.2, 0.9])
    fast = backend.hsic_columns(centered_gram(y, 0.7), x[:, None], np.array([1.3]))[0]
    assert abs(fast - _hsic_brute(x, y, 1.3, 0.7)) < 1e-12


def test_hsic_constant_y_is_zero():
    rng = np.random.default_rng(1)
    h = hsic_values(rng.standard_normal((20, 3)), np.full(20, 2.0), 1.0, 1.0)
    np.testing.assert_allclose(h, 0.0, atol=1e-15)


def test_hsic_sensitivity_value():
    assert hsic_sensitivity(100) == pytest.approx(0.0792, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 10_000))
def test_hsic_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    h = hsic_values(rng.standard_normal((n, 2)), rng.standard_normal(n), 0.8, 1.1)
    assert np.all(h >= -1e-14)


def test_hsic_rejects_bad_bandwidth(aug):
    with pytest.raises(ValueError):
        hsic_stats(aug, (0.0, 1.0))


def test_median_heuristic():
    assert median_heuristic([0.0, 1.0, 3.0]) == 2.0
    assert median_heuristic([1.0, 1.0]) == 1.0


# --- ridge ---------------------------------------------------------------

def test_ridge_huge_lambda_shrinks(aug):
    assert np.max(np.abs(ridge_stats(aug, RidgeConfig(1e9)).w)) < 1e-8


def test_ridge_orthonormal_closed_form():
    n, d, lam = 50, 3, 0.5
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(rng.standard_normal((n, 2 * d)))
    Z = Q * math.sqrt(n)
    y = rng.standard_normal(n)
    aug = _aug(Z[:, :d], Z[:, d:], y, c_x=100.0, c_y=100.0)
    beta = Z.T @ y / n / (1 + lam)
    expect = np.abs(beta[:d]) - np.abs(beta[d:])
    np.testing.assert_allclose(ridge_stats(aug, RidgeConfig(lam)).w, expect, atol=1e-12)


def test_ridge_sensitivity_value():
    n, d, c_x, c_y, lam = 1000, 20, 1.5, 3.0, 0.1
    expect = (2 * 2.25 * 3 * 0.001 * 20 * 0.1**-1.5
              + 4 * 1.5 * 3 * 0.001 * math.sqrt(20) * 10)
    assert ridge_sensitivity(n, d, c_x, c_y, lam) == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(9.3431, abs=1e-4)


def test_ridge_rejects_lambda():
    with pytest.raises(ValueError):
        RidgeConfig(0.0)


# --- SGD -----------------------------------------------------------------

def test_sgd_zero_response():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (30, 4))
    aug = _aug(X, rng.uniform(-1, 1, (30, 4)), np.zeros(30), c_x=1.0, c_y=1.0)
    cfg = SgdConfig(lam=2 * sgd_min_lambda(30, 4, 1.0, 0.5))
    np.testing.assert_array_equal(sgd_stats(aug, cfg).w, 0.0)


@settings(max_examples=100)
@given(st.integers(2, 10_000), st.integers(1, 50), st.floats(0.1, 10), st.floats(1e-3, 100),
       st.floats(0.05, 0.95), st.floats(0.01, 10))
def test_sgd_sensitivity_ratio_bound(n, d, m, lam, c, r):
    assert sgd_sensitivity(n, d, m, lam, c, r) <= 4 * (1 + r) * n**-c * (1 + 1e-12)


def test_sgd_formula_value():
    l1, l2 = sgd_constants(3, 2.0, 1.0, 1.0)
    # M^2 (2d+1) = 28
    assert (l1, l2) == (57.0, 29.0)
    assert sgd_sensitivity(100, 3, 2.0, 1.0, 0.5, 1.0) == pytest.approx(4 * 57 / 29 / 10, rel=1e-14)


def test_sgd_warns_when_unstable(aug):
    with pytest.warns(UserWarning, match="stability"):
        st_ = sgd_stats(aug, SgdConfig(lam=1e-3))
    assert st_.diagnostics["stability_ok"] is False


def test_sgd_config_validation():
    with pytest.raises(ValueError):
        SgdConfig(c=1.0)
    with pytest.raises(ValueError):
        SgdConfig(r_beta=0.0)


# --- screening -----------------------------------------------------------

def test_screening_zero_response():
    data = Dataset(np.ones((5, 2)), np.zeros(5), 1.0, 1.0)
    u, du = screening_stats(data)
    np.testing.assert_array_equal(u, 0.0)
    assert du == 2 * 1.0 * 1.0 / 5


def test_screening_duplicate_columns():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, 20)
    u, _ = screening_stats(Dataset(np.c_[x, x, -x], rng.uniform(-1, 1, 20), 1.0, 1.0))
    assert u[0] == u[1] == u[2]


def test_screening_neighbour_bound():
    rng = np.random.default_rng(5)
    for _ in range(200):
        data = Dataset(rng.uniform(-2, 2, (15, 4)), rng.uniform(-3, 3, 15), 2.0, 3.0)
        k = int(rng.integers(15))
        other = data.replace_row(k, rng.choice([-2.0, 2.0], 4), float(rng.choice([-3.0, 3.0])))
        u1, du = screening_stats(data)
        u2, _ = screening_stats(other)
        assert np.max(np.abs(u1 - u2)) <= du + 1e-15


# --- structural properties -----------------------------------------------

@pytest.mark.parametrize("family", list(Family))
def test_flip_sign(family):
    for seed in range(5):
        aug = make_aug(n=80, p=5, seed=seed)
        kw = _family_kwargs(aug)
        w = compute_stats(aug, family, **kw).w
        for j in range(aug.p):
            ws = compute_stats(aug.swap(j), family, **kw).w
            expect = w.copy()
            expect[j] = -expect[j]
            np.testing.assert_allclose(ws, expect, atol=1e-10, rtol=0)


@pytest.mark.parametrize("family", list(Family))
def test_identical_neighbour_has_zero_change(family):
    rep = verify_sensitivity(family, trials=5, n=30, p=4, identical=True)
    assert rep.max_observed == 0.0


@pytest.mark.parametrize("family", list(Family))
def test_sensitivity_holds_small(family):
    rep = verify_sensitivity(family, trials=30, n=30, p=4, seed=7)
    assert rep.ok, rep.witness
