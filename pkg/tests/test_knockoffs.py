import numpy as np
import pytest
from scipy import linalg

from dpknock.datamodel import Dataset
from dpknock.knockoffs import (
    GaussianKnockoffConfig,
    ar_covariance,
    empirical_joint_covariance,
    generate_knockoffs,
    row_noise,
    solve_equicorrelated_r,
    write_knockoffs,
)


def _gauss(n, sigma, seed, c_x=50.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, sigma.shape[0])) @ np.linalg.cholesky(sigma).T
    return Dataset(X, np.zeros(n), c_x, 1.0)


def test_r_identity():
    np.testing.assert_allclose(solve_equicorrelated_r(np.eye(4)), np.full(4, 0.999))


def test_r_two_by_two():
    # correlation eigenvalues are 1 +- 0.9, so r = 0.999 * 2 * 0.1
    r = solve_equicorrelated_r(np.array([[1.0, 0.9], [0.9, 1.0]]))
    np.testing.assert_allclose(r, [0.1998, 0.1998], rtol=1e-12)


@pytest.mark.parametrize("sigma", [ar_covariance(10), ar_covariance(5, 1.0, 0.8),
                                   np.diag([0.5, 2.0, 4.0])])
def test_r_satisfies_psd_invariant(sigma):
    r = solve_equicorrelated_r(sigma)
    D = np.diag(r)
    m = 2 * D - D @ linalg.solve(sigma, D)
    assert np.all(r >= 0)
    assert np.linalg.eigvalsh(m).min() >= -1e-10
    GaussianKnockoffConfig(sigma, r, 0)  # validates without raising


def test_non_spd_sigma_rejected():
    with pytest.raises(np.linalg.LinAlgError):
        solve_equicorrelated_r(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_invalid_r_rejected():
    with pytest.raises(ValueError):
        GaussianKnockoffConfig(np.eye(2), np.array([3.0, 3.0]), 0)


def test_identity_sigma_unit_r_gives_pure_noise():
    data = _gauss(20, np.eye(3), 0)
    cfg = GaussianKnockoffConfig(np.eye(3), np.ones(3), 42)
    aug = generate_knockoffs(data, cfg)
    np.testing.assert_allclose(aug.X_tilde, row_noise(42, range(20), 3), atol=1e-14)


def test_zero_r_copies_x():
    sigma = ar_covariance(4)
    data = _gauss(30, sigma, 1)
    aug = generate_knockoffs(data, GaussianKnockoffConfig(sigma, np.zeros(4), 5))
    np.testing.assert_array_equal(aug.X_tilde, data.X)


def test_same_seed_reproduces_bit_exact():
    sigma = ar_covariance(5)
    data = _gauss(40, sigma, 2, c_x=1.5)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, 9)
    np.testing.assert_array_equal(generate_knockoffs(data, cfg).X_tilde,
                                  generate_knockoffs(data, cfg).X_tilde)


@pytest.mark.parametrize("changed", [0, 17, 39])
def test_per_row_determinism(changed):
    sigma = ar_covariance(5)
    data = _gauss(40, sigma, 3, c_x=1.5)
    other = data.replace_row(changed, np.full(5, 1.5), 0.0)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, 11)
    a = generate_knockoffs(data, cfg).X_tilde
    b = generate_knockoffs(other, cfg).X_tilde
    keep = np.arange(40) != changed
    np.testing.assert_array_equal(a[keep], b[keep])
    assert not np.array_equal(a[changed], b[changed])


def test_row_ids_key_the_randomness():
    sigma = ar_covariance(3)
    data = _gauss(10, sigma, 4)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, 8)
    full = generate_knockoffs(data, cfg)
    sub = generate_knockoffs(data.subset([3, 7]), cfg, row_ids=[3, 7])
    np.testing.assert_allclose(sub.X_tilde, full.X_tilde[[3, 7]], rtol=0, atol=1e-14)


def test_knockoffs_clipped_to_bound():
    sigma = ar_covariance(4)
    aug = generate_knockoffs(_gauss(500, sigma, 5, c_x=0.5), GaussianKnockoffConfig.equicorrelated(sigma, 1))
    assert np.max(np.abs(aug.X_tilde)) <= 0.5


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        generate_knockoffs(_gauss(10, np.eye(3), 0), GaussianKnockoffConfig.equicorrelated(np.eye(4), 0))


def test_exchangeability_ar():
    sigma = ar_covariance(3)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, 77)
    aug = generate_knockoffs(_gauss(50000, sigma, 6), cfg)
    gap = np.abs(empirical_joint_covariance(aug) - cfg.joint_covariance).max()
    assert gap < 0.05


def test_exchangeability_scalar_pure_noise():
    cfg = GaussianKnockoffConfig(np.eye(1), np.ones(1), 3)
    aug = generate_knockoffs(_gauss(50000, np.eye(1), 7), cfg)
    assert abs(empirical_joint_covariance(aug)[0, 1]) < 0.05


def test_zero_r_cross_block_is_sigma():
    sigma = ar_covariance(3)
    aug = generate_knockoffs(_gauss(20000, sigma, 8), GaussianKnockoffConfig(sigma, np.zeros(3), 0))
    cov = empirical_joint_covariance(aug)
    np.testing.assert_allclose(cov[:3, 3:], cov[:3, :3])


def test_marginals_match():
    sigma = ar_covariance(4)
    n = 20000
    aug = generate_knockoffs(_gauss(n, sigma, 9), GaussianKnockoffConfig.equicorrelated(sigma, 4))
    X, Xt = aug.base.X, aug.X_tilde
    var = np.diag(sigma)
    se_mean = np.sqrt(var / n)
    se_var = var * np.sqrt(2.0 / n)
    assert np.all(np.abs(X.mean(0) - Xt.mean(0)) <= 4 * np.sqrt(2) * se_mean)
    assert np.all(np.abs(X.var(0) - Xt.var(0)) <= 4 * np.sqrt(2) * se_var)


def test_small_n_warns():
    sigma = ar_covariance(3)
    aug = generate_knockoffs(_gauss(4, sigma, 0), GaussianKnockoffConfig.equicorrelated(sigma, 0))
    with pytest.warns(UserWarning):
        empirical_joint_covariance(aug)


def test_write_knockoffs(tmp_path):
    sigma = ar_covariance(2)
    aug = generate_knockoffs(_gauss(3, sigma, 0), GaussianKnockoffConfig.equicorrelated(sigma, 0))
    path = tmp_path / "kn.csv"
    write_knockoffs(path, aug)
    lines = path.read_text().splitlines()
    assert lines[0] == "xt1,xt2" and len(lines) == 4
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=",", skiprows=1), aug.X_tilde)
