"""Knockoff statistics with almost-sure sensitivity certificates.

Every family returns a :class:`KnockoffStatistics` whose ``sensitivity``
bounds how much any single ``W_j`` can move when one row of
``[X, X_tilde, y]`` is replaced, and whose ``sensitivity_l2`` bounds the
Euclidean change of the whole vector. The bounds depend only on the
declared data bounds, the sample size and the number of scored
features, never on the realised data.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from .datamodel import AugmentedDataset, Dataset


class Family(str, enum.Enum):
    MARGINAL = "marginal"
    HSIC = "hsic"
    RIDGE = "ridge"
    SGD = "sgd"


@dataclass(frozen=True, eq=False)
class KnockoffStatistics:
    w: np.ndarray
    family: Family
    sensitivity: float
    feature_ids: np.ndarray  # 1-based
    sensitivity_l2: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.w) != len(self.feature_ids):
            raise ValueError("w and feature_ids differ in length")
        if not (math.isfinite(self.sensitivity) and self.sensitivity >= 0):
            raise ValueError(f"invalid sensitivity {self.sensitivity}")

    def to_rows(self):
        return [
            {"feature_id": int(j), "W": float(v), "family": self.family.value,
             "sensitivity": self.sensitivity}
            for j, v in zip(self.feature_ids, self.w)
        ]


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("ridge lambda must be positive")


@dataclass(frozen=True)
class SgdConfig:
    lam: float = 1.0
    c: float = 0.5
    r_beta: float = 1.0
    m_bound: float | None = None  # None: max(c_x, c_y)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("SGD lambda must be positive")
        if not 0 < self.c < 1:
            raise ValueError("step-size exponent c must lie in (0, 1)")
        if not self.r_beta > 0:
            raise ValueError("projection radius must be positive")


def _feature_ids(aug, features):
    if features is None:
        return np.arange(1, aug.p + 1)
    return np.asarray(features, dtype=np.int64) + 1


# --- sensitivity formulas ------------------------------------------------

def marginal_sensitivity(n, c_x, c_y):
    return 4.0 * c_x * c_y / n


def hsic_sensitivity(n, k_bound=1.0, l_bound=1.0):
    return 8.0 * (n - 1) / n**2 * math.sqrt(k_bound * l_bound)


def ridge_sensitivity(n, d, c_x, c_y, lam):
    """l2 bound for ``d`` scored features, data-independent lambda branch."""
    return (2.0 * c_x**2 * c_y * d / n * lam**-1.5
            + 4.0 * c_x * c_y * math.sqrt(d) / n / lam)


def sgd_constants(d, m_bound, lam, r_beta):
    """Lipschitz constants ``(L1, L2)`` of the ridge loss in dimension 2d."""
    a = m_bound**2 * (2 * d + 1)
    return a * (1.0 + r_beta) + lam * r_beta, a + lam


def sgd_sensitivity(n, d, m_bound, lam, c, r_beta):
    l1, l2 = sgd_constants(d, m_bound, lam, r_beta)
    return 4.0 * l1 / l2 * n**-c


def sgd_stability_gap(n, d, m_bound, lam, c):
    """``kappa/L2`` minus the required lower bound; negative means violated."""
    _, l2 = sgd_constants(d, m_bound, lam, 0.0)
    need = c * (1 - c) / (1 - 2.0 ** (-(1 - c))) * math.log(n) / n ** (1 - c)
    return lam / l2 - need


def sgd_min_lambda(n, d, m_bound, c):
    """Smallest lambda meeting the one-pass stability condition."""
    a = m_bound**2 * (2 * d + 1)
    g = c * (1 - c) / (1 - 2.0 ** (-(1 - c))) * math.log(n) / n ** (1 - c)
    if g >= 1:
        raise ValueError(f"no lambda satisfies the stability condition at n={n}, c={c}")
    return g * a / (1 - g)


# --- statistics ----------------------------------------------------------

def marginal_corr_stats(aug: AugmentedDataset, features=None) -> KnockoffStatistics:
    X, Xt, y = aug.columns(features)
    n = aug.n
    w = (np.abs(X.T @ y) - np.abs(Xt.T @ y)) / n
    s = marginal_sensitivity(n, aug.base.c_x, aug.base.c_y)
    return KnockoffStatistics(w, Family.MARGINAL, s, _feature_ids(aug, features),
                              s * math.sqrt(len(w)))


def median_heuristic(v) -> float:
    v = np.asarray(v, dtype=float)
    diffs = np.abs(v[:, None] - v[None, :])[np.triu_indices(v.size, k=1)]
    med = float(np.median(diffs)) if diffs.size else 0.0
    return med if med > 0 else 1.0


def centered_gram(v, bandwidth):
    v = np.asarray(v, dtype=float)
    K = np.exp(-((v[:, None] - v[None, :]) ** 2) / (2.0 * bandwidth**2))
    return K - K.mean(axis=0)[None, :] - K.mean(axis=1)[:, None] + K.mean()


def hsic_values(cols, y, bw_x, bw_y):
    """Empirical HSIC of each column against ``y``."""
    cols = np.asarray(cols, dtype=float)
    bw_x = np.broadcast_to(np.asarray(bw_x, dtype=float), (cols.shape[1],))
    return kernels.hsic_columns(centered_gram(y, bw_y), cols, bw_x)


def hsic_stats(aug: AugmentedDataset, bandwidths, features=None) -> KnockoffStatistics:
    """HSIC difference statistics with Gaussian kernels.

    Parameters
    ----------
    bandwidths : tuple
        ``(bw_x, bw_y)``. ``bw_x`` is a scalar or one value per scored
        feature; a feature and its knockoff share a bandwidth.
    """
    bw_x, bw_y = bandwidths
    X, Xt, y = aug.columns(features)
    bw_x = np.broadcast_to(np.asarray(bw_x, dtype=float), (X.shape[1],))
    if np.any(bw_x <= 0) or not bw_y > 0:
        raise ValueError("kernel bandwidths must be positive")
    kc = centered_gram(y, bw_y)
    h = kernels.hsic_columns(kc, X, bw_x)
    ht = kernels.hsic_columns(kc, Xt, bw_x)
    w = np.abs(h) - np.abs(ht)
    s = hsic_sensitivity(aug.n)
    return KnockoffStatistics(w, Family.HSIC, s, _feature_ids(aug, features),
                              s * math.sqrt(len(w)),
                              {"hsic": h, "hsic_knockoff": ht})


def ridge_coefficients(Xb, y, lam):
    n = Xb.shape[0]
    gram = Xb.T @ Xb / n + lam * np.eye(Xb.shape[1])
    return linalg.solve(gram, Xb.T @ y / n, assume_a="pos")


def ridge_stats(aug: AugmentedDataset, cfg: RidgeConfig, features=None) -> KnockoffStatistics:
    X, Xt, y = aug.columns(features)
    d = X.shape[1]
    if d < 1:
        raise ValueError("need at least one feature")
    beta = ridge_coefficients(np.hstack([X, Xt]), y, cfg.lam)
    w = np.abs(beta[:d]) - np.abs(beta[d:])
    s = ridge_sensitivity(aug.n, d, aug.base.c_x, aug.base.c_y, cfg.lam)
    return KnockoffStatistics(w, Family.RIDGE, s, _feature_ids(aug, features), s,
                              {"beta": beta})


def sgd_stats(aug: AugmentedDataset, cfg: SgdConfig, features=None) -> KnockoffStatistics:
    X, Xt, y = aug.columns(features)
    n, d = X.shape
    m_bound = cfg.m_bound if cfg.m_bound is not None else max(aug.base.c_x, aug.base.c_y)
    _, l2 = sgd_constants(d, m_bound, cfg.lam, cfg.r_beta)
    gap = sgd_stability_gap(n, d, m_bound, cfg.lam, cfg.c)
    if gap < 0:
        warnings.warn(
            f"SGD stability condition violated (kappa/L2 short by {-gap:.3g}); "
            "the sensitivity certificate may not hold",
            stacklevel=2,
        )
    beta = kernels.sgd_pass(np.hstack([X, Xt]), y, cfg.lam, cfg.c, l2, cfg.r_beta)
    w = np.abs(beta[:d]) - np.abs(beta[d:])
    s = sgd_sensitivity(n, d, m_bound, cfg.lam, cfg.c, cfg.r_beta)
    return KnockoffStatistics(w, Family.SGD, s, _feature_ids(aug, features), s,
                              {"beta": beta, "stability_ok": gap >= 0})


def compute_stats(aug, family, features=None, ridge=None, sgd=None, bandwidths=None):
    """Dispatch on ``family``; missing configs fall back to defaults."""
    family = Family(family)
    if family is Family.MARGINAL:
        return marginal_corr_stats(aug, features)
    if family is Family.HSIC:
        if bandwidths is None:
            bandwidths = (aug.base.c_x, aug.base.c_y)
        return hsic_stats(aug, bandwidths, features)
    if family is Family.RIDGE:
        return ridge_stats(aug, ridge or RidgeConfig(), features)
    return sgd_stats(aug, sgd or SgdConfig(), features)


def screening_stats(data: Dataset):
    """Marginal screening scores ``|X_j . y| / n`` and their sensitivity."""
    u = np.abs(data.X.T @ data.y) / data.n
    return u, 2.0 * data.c_x * data.c_y / data.n
