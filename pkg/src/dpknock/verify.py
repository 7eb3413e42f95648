"""Brute-force oracles: neighbour sensitivity, exchangeability, threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datamodel import Dataset
from .knockoffs import GaussianKnockoffConfig, ar_covariance, empirical_joint_covariance, \
    generate_knockoffs
from .selection import knockoff_threshold, knockoff_threshold_naive
from .statistics import Family, RidgeConfig, SgdConfig, compute_stats, sgd_min_lambda

# per-statistic claims are checked in l-infinity, vector claims in l2
# the marginal bound is attained exactly at box corners; allow for rounding
ROUNDING_RTOL = 1e-12
_NORM = {Family.MARGINAL: "linf", Family.HSIC: "linf", Family.RIDGE: "l2", Family.SGD: "l2"}


@dataclass
class SensitivityReport:
    family: Family
    n: int
    p: int
    trials: int
    norm: str
    bound: float
    max_observed: float = 0.0
    violations: int = 0
    witness: dict | None = None

    @property
    def max_ratio(self) -> float:
        return self.max_observed / self.bound if self.bound > 0 else 0.0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "family": self.family.value, "n": self.n, "p": self.p, "trials": self.trials,
            "norm": self.norm, "bound": self.bound, "max_observed": self.max_observed,
            "max_ratio": self.max_ratio, "violations": self.violations,
            "witness": self.witness,
        }


def default_family_configs(n, p, c_x, c_y):
    """Ridge and SGD settings used by the neighbour oracle."""
    m_bound = max(c_x, c_y)
    lam = 1.01 * sgd_min_lambda(n, p, m_bound, 0.5)
    return RidgeConfig(1.0), SgdConfig(lam=lam, c=0.5, r_beta=1.0, m_bound=m_bound)


def _random_row(rng, p, c_x, c_y):
    if rng.random() < 0.5:
        # box corner: every coordinate at its bound
        return rng.choice([-c_x, c_x], size=p), float(rng.choice([-c_y, c_y]))
    return rng.uniform(-c_x, c_x, size=p), float(rng.uniform(-c_y, c_y))


def _random_dataset(rng, n, p, c_x, c_y, chol):
    if rng.random() < 0.5:
        X = rng.standard_normal((n, p)) @ chol.T
        beta = np.zeros(p)
        beta[: min(3, p)] = 1.0
        y = X @ beta + rng.standard_normal(n)
    else:
        X = rng.uniform(-c_x, c_x, size=(n, p))
        y = rng.uniform(-c_y, c_y, size=n)
    return Dataset(X, y, c_x, c_y)


def verify_sensitivity(family, trials: int = 1000, n: int = 50, p: int = 8, seed: int = 0,
                       c_x: float = 1.5, c_y: float | None = None, ridge=None, sgd=None,
                       bandwidths=None, identical: bool = False) -> SensitivityReport:
    """Replace one row, regenerate knockoffs with the same seed, compare.

    With ``identical=True`` the replacement row equals the original, so
    every observed change must be exactly zero.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    family = Family(family)
    if c_y is None:
        c_y = 1.5 * math.sqrt(math.log(n))
    d_ridge, d_sgd = default_family_configs(n, p, c_x, c_y)
    ridge = ridge or d_ridge
    sgd = sgd or d_sgd
    sigma = ar_covariance(p)
    chol = np.linalg.cholesky(sigma)
    base_cfg = GaussianKnockoffConfig.equicorrelated(sigma, 0)
    rng = np.random.default_rng(np.random.SeedSequence([seed, int(family.value.encode().hex(), 16)]))
    norm = _NORM[family]
    report = None
    for trial in range(trials):
        data = _random_dataset(rng, n, p, c_x, c_y, chol)
        k = int(rng.integers(n))
        if identical:
            x_new, y_new = data.X[k], data.y[k]
        else:
            x_new, y_new = _random_row(rng, p, c_x, c_y)
        other = data.replace_row(k, x_new, y_new)
        cfg = base_cfg.with_seed(int(rng.integers(2**63)))
        s1 = compute_stats(generate_knockoffs(data, cfg), family, ridge=ridge, sgd=sgd,
                           bandwidths=bandwidths)
        s2 = compute_stats(generate_knockoffs(other, cfg), family, ridge=ridge, sgd=sgd,
                           bandwidths=bandwidths)
        diff = s1.w - s2.w
        observed = float(np.max(np.abs(diff))) if norm == "linf" else float(np.linalg.norm(diff))
        if report is None:
            report = SensitivityReport(family, n, p, trials, norm, s1.sensitivity)
        if observed > report.max_observed:
            report.max_observed = observed
        if observed > report.bound * (1 + ROUNDING_RTOL):
            report.violations += 1
            if report.witness is None:
                report.witness = {"trial": trial, "row": k, "observed": observed,
                                  "knockoff_seed": cfg.knockoff_seed,
                                  "old_row": data.X[k].tolist(), "old_y": float(data.y[k]),
                                  "new_row": np.asarray(x_new).tolist(), "new_y": float(y_new)}
    return report


def check_exchangeability(n: int = 50000, p: int = 3, seed: int = 0, c_x: float = 50.0):
    """Max-abs gap between the empirical and target joint covariance.

    ``c_x`` defaults large so clipping does not distort the Gaussian law.
    """
    sigma = ar_covariance(p)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(sigma).T
    data = Dataset(X, np.zeros(n), c_x, 1.0)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, seed + 1)
    aug = generate_knockoffs(data, cfg)
    gap = np.abs(empirical_joint_covariance(aug) - cfg.joint_covariance)
    return float(gap.max())


def random_w_vectors(trials: int, seed: int = 0):
    """Test vectors covering sign-pure, tie-heavy and zero-containing cases."""
    rng = np.random.default_rng(seed)
    kinds = ["gauss", "positive", "negative", "ties", "zeros", "shifted"]
    for t in range(trials):
        kind = kinds[t % len(kinds)]
        size = int(rng.integers(1, 60))
        if kind == "gauss":
            w = rng.standard_normal(size)
        elif kind == "positive":
            w = np.abs(rng.standard_normal(size)) + 1e-3
        elif kind == "negative":
            w = -np.abs(rng.standard_normal(size)) - 1e-3
        elif kind == "ties":
            w = rng.integers(-3, 6, size).astype(float)
        elif kind == "zeros":
            w = rng.standard_normal(size)
            w[rng.random(size) < 0.4] = 0.0
        else:
            w = rng.standard_normal(size) + 1.5
        q = float(rng.choice([0.05, 0.1, 0.2, 0.3, 0.5]))
        yield kind, w, q


@dataclass
class OracleReport:
    trials: int
    mismatches: int = 0
    witnesses: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def check_threshold_oracle(trials: int = 1000, seed: int = 0) -> OracleReport:
    report = OracleReport(trials)
    for kind, w, q in random_w_vectors(trials, seed):
        for offset in (0, 1):
            fast = knockoff_threshold(w, q, offset)
            slow = knockoff_threshold_naive(w, q, offset)
            if fast != slow:
                report.mismatches += 1
                if len(report.witnesses) < 5:
                    report.witnesses.append({"kind": kind, "w": w.tolist(), "q": q,
                                             "offset": offset, "fast": fast, "naive": slow})
    return report
