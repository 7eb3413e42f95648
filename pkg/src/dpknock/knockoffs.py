"""Gaussian model-X knockoffs with per-row seeded randomness.

Row ``i`` of the knockoff matrix is ``f(X_i, R_i)`` where ``R_i`` is a
standard normal vector drawn from a Philox stream keyed by
``(knockoff_seed, i)``. Rows that agree between two datasets therefore
receive identical knockoff rows, so replacing one observation changes
exactly one row of ``[X, X_tilde, y]``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .datamodel import AugmentedDataset, Dataset

SAFETY = 0.999
PSD_TOL = 1e-10


def ar_covariance(p: int, scale: float = 0.5, decay: float = 0.3) -> np.ndarray:
    """``scale * decay**|i-j|``."""
    idx = np.arange(p)
    return scale * decay ** np.abs(idx[:, None] - idx[None, :])


def solve_equicorrelated_r(sigma) -> np.ndarray:
    """Equicorrelated diagonal: ``0.999 * min(2*lambda_min(corr), 1) * sigma_jj``."""
    sigma = np.asarray(sigma, dtype=float)
    linalg.cholesky(sigma, lower=True)  # raises LinAlgError when not SPD
    d = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(d, d)
    lam_min = linalg.eigvalsh(corr, subset_by_index=[0, 0])[0]
    s = min(2.0 * lam_min, 1.0)
    return SAFETY * s * np.diag(sigma)


def _psd_sqrt(a):
    vals, vecs = linalg.eigh((a + a.T) / 2.0)
    vals = np.where(vals < 0, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True, eq=False)
class GaussianKnockoffConfig:
    sigma: np.ndarray
    r: np.ndarray
    knockoff_seed: int
    # derived: x_tilde = x @ transform + z @ noise_root
    transform: np.ndarray = field(init=False, repr=False)
    noise_root: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        r = np.array(self.r, dtype=float).reshape(-1)
        p = sigma.shape[0]
        if sigma.shape != (p, p) or r.shape != (p,):
            raise ValueError(f"sigma {sigma.shape} and r {r.shape} disagree")
        if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0):
            raise ValueError("sigma must be symmetric")
        if np.any(r < 0):
            raise ValueError("r must be nonnegative")
        if not 0 <= int(self.knockoff_seed) < 2**64:
            raise ValueError("knockoff_seed must be a 64-bit unsigned integer")
        chol = linalg.cho_factor(sigma, lower=True)
        D = np.diag(r)
        sinv_d = linalg.cho_solve(chol, D)  # sigma^{-1} diag(r)
        cov = 2.0 * D - D @ sinv_d
        cov = (cov + cov.T) / 2.0
        min_eig = linalg.eigvalsh(cov, subset_by_index=[0, 0])[0]
        if min_eig < -PSD_TOL:
            raise ValueError(
                f"2 diag(r) - diag(r) sigma^-1 diag(r) is not PSD (min eigenvalue {min_eig:.3g})"
            )
        for name, val in (("sigma", sigma), ("r", r)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "knockoff_seed", int(self.knockoff_seed))
        # row-vector form of X (I - sigma^{-1} diag(r))
        object.__setattr__(self, "transform", np.eye(p) - sinv_d)
        object.__setattr__(self, "noise_root", _psd_sqrt(cov))

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @property
    def joint_covariance(self) -> np.ndarray:
        """Target covariance ``[[S, S - D], [S - D, S]]`` of ``[X, X_tilde]``."""
        off = self.sigma - np.diag(self.r)
        return np.block([[self.sigma, off], [off, self.sigma]])

    @classmethod
    def equicorrelated(cls, sigma, knockoff_seed: int) -> "GaussianKnockoffConfig":
        return cls(sigma, solve_equicorrelated_r(sigma), knockoff_seed)

    def with_seed(self, knockoff_seed: int) -> "GaussianKnockoffConfig":
        return GaussianKnockoffConfig(self.sigma, self.r, knockoff_seed)


def row_noise(knockoff_seed: int, row_ids, p: int) -> np.ndarray:
    """Standard normal draws, one independent Philox stream per row id."""
    out = np.empty((len(row_ids), p))
    for k, i in enumerate(row_ids):
        gen = np.random.Generator(np.random.Philox(key=[int(knockoff_seed), int(i)]))
        out[k] = gen.standard_normal(p)
    return out


def generate_knockoffs(data: Dataset, config: GaussianKnockoffConfig, row_ids=None,
                       clip: bool = True) -> AugmentedDataset:
    """Knockoff matrix for ``data``.

    ``row_ids`` gives each row's position in the original data (defaults
    to ``range(n)``) and keys its randomness. Knockoff entries are
    clipped to ``[-c_x, c_x]`` so the declared bound holds for
    sensitivity calculations.
    """
    if config.p != data.p:
        raise ValueError(f"config has p={config.p}, data has p={data.p}")
    if row_ids is None:
        row_ids = np.arange(data.n)
    row_ids = np.asarray(row_ids, dtype=np.int64)
    if row_ids.shape != (data.n,):
        raise ValueError("row_ids must have one entry per row")
    Z = row_noise(config.knockoff_seed, row_ids, data.p)
    Xt = data.X @ config.transform + Z @ config.noise_root
    if clip:
        Xt = np.clip(Xt, -data.c_x, data.c_x)
    ids = row_ids.copy()
    ids.setflags(write=False)
    return AugmentedDataset(data, Xt, config.knockoff_seed, config.sigma, config.r, ids)


def empirical_joint_covariance(aug: AugmentedDataset) -> np.ndarray:
    """Sample covariance of the rows of ``[X, X_tilde]`` (2p x 2p)."""
    if aug.n < 2 * aug.p:
        warnings.warn(f"n={aug.n} < 2p={2 * aug.p}; covariance estimate is rank deficient",
                      stacklevel=2)
    return np.cov(np.hstack([aug.base.X, aug.X_tilde]), rowvar=False)


def write_knockoffs(path, aug: AugmentedDataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"xt{j}" for j in range(1, aug.p + 1)])
        for row in aug.X_tilde:
            w.writerow([repr(float(v)) for v in row])
