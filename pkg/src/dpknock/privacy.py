"""Gaussian differential privacy primitives.

Noise calibration lives with the callers in :mod:`dpknock.selection`;
this module only supplies the raw mechanisms, the trade-off function and
a composition ledger.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import kernels


def gdp_tradeoff(mu: float, alpha: float) -> float:
    """Trade-off curve ``G_mu(alpha) = Phi(Phi^{-1}(1 - alpha) - mu)``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return float(norm.cdf(norm.ppf(1.0 - alpha) - mu))


def compose(budgets) -> float:
    """Root-sum-square composition of GDP parameters."""
    budgets = [float(b) for b in budgets]
    if any(b < 0 for b in budgets):
        raise ValueError("GDP parameters must be nonnegative")
    return math.sqrt(math.fsum(b * b for b in budgets))


@dataclass
class PrivacyBudget:
    mu: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")

    def split(self, k: int) -> "PrivacyBudget":
        """Per-part budget when ``k`` parts compose back to ``mu``."""
        return PrivacyBudget(self.mu / math.sqrt(k))


@dataclass
class NoiseLedger:
    entries: list = field(default_factory=list)

    def spend(self, label: str, mu: float) -> None:
        if mu < 0:
            raise ValueError("cannot spend a negative budget")
        self.entries.append((label, float(mu)))

    def extend(self, other: "NoiseLedger", prefix: str = "") -> None:
        for label, mu in other.entries:
            self.spend(prefix + label, mu)

    @property
    def total(self) -> float:
        return compose(mu for _, mu in self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [{"label": lab, "mu_spent": mu} for lab, mu in self.entries],
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def make_noise_stream(seed=None, production: bool = False) -> np.random.Generator:
    """Generator for privacy noise.

    With ``production=True`` the seed is ignored and the stream is drawn
    from OS entropy, so runs cannot be replayed.
    """
    if production or seed is None:
        return np.random.default_rng(np.random.SeedSequence())
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x901E]))


def check_seeds(split_seed, knockoff_seed, noise_seed) -> None:
    """Refuse runs where the split, knockoff and noise seeds coincide."""
    seeds = [s for s in (split_seed, knockoff_seed, noise_seed) if s is not None]
    if len(set(int(s) for s in seeds)) != len(seeds):
        raise ValueError(
            f"split, knockoff and noise seeds must be distinct, got {split_seed}, "
            f"{knockoff_seed}, {noise_seed}"
        )


def gaussian_mechanism(value, sensitivity: float, mu: float, noise_stream):
    """``value + N(0, (sensitivity / mu)^2)``; works elementwise on arrays."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if sensitivity < 0:
        raise ValueError("sensitivity must be nonnegative")
    value = np.asarray(value, dtype=float)
    noise = noise_stream.normal(0.0, 1.0, size=value.shape) * (sensitivity / mu)
    out = value + noise
    return float(out) if out.ndim == 0 else out


def noisy_max_peel(scores, k: int, per_round_noise_sd: float, noise_stream) -> list:
    """Report-noisy-max applied ``k`` times without replacement.

    Each round adds fresh ``N(0, sd^2)`` noise to every surviving score and
    removes the winner. Returns 0-based indices in peel order. With
    ``sd == 0`` ties go to the lowest index.
    """
    scores = np.asarray(scores, dtype=float)
    p = scores.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}], got {k}")
    if per_round_noise_sd < 0:
        raise ValueError("noise sd must be nonnegative")
    if per_round_noise_sd == 0:
        noise = np.zeros((k, p))
    else:
        noise = noise_stream.normal(0.0, per_round_noise_sd, size=(k, p))
    return [int(i) for i in kernels.peel(scores, noise)]
