"""Knockoff selection procedures with Gaussian-DP noise.

Noise variances used here, with ``D`` the statistic sensitivity:

* mirror peeling: peel noise ``8 m D^2 / mu^2``, release ``2 m D^2 / mu^2``
* DP screening:   ``4 K D_u^2 / mu^2`` per round
* post-screening release: ``2 D^2 / mu^2`` (half of the budget)
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .datamodel import Dataset, make_split
from .knockoffs import GaussianKnockoffConfig, generate_knockoffs
from .privacy import NoiseLedger, check_seeds, make_noise_stream, noisy_max_peel
from .statistics import (
    Family,
    KnockoffStatistics,
    RidgeConfig,
    SgdConfig,
    compute_stats,
    median_heuristic,
    screening_stats,
)


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class SelectionResult:
    selected: list  # sorted 1-based ids
    threshold: float
    released_w: dict  # 1-based id -> noisy statistic
    peeled: list  # 1-based ids in peel order
    mu_spent: float
    diagnostics: dict = field(default_factory=dict)
    ledger: NoiseLedger = field(default_factory=NoiseLedger)

    def to_dict(self) -> dict:
        return {
            "selected": [int(j) for j in self.selected],
            "threshold": _json_float(self.threshold),
            "mu_spent": _json_float(self.mu_spent),
            "b_n": _json_float(self.diagnostics["b_n"]) if "b_n" in self.diagnostics else None,
            "peeled": [int(j) for j in self.peeled],
            "released": {str(k): float(v) for k, v in self.released_w.items()},
            "ledger": self.ledger.to_dict(),
            "diagnostics": {k: v for k, v in self.diagnostics.items() if k != "b_n"},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


@dataclass
class EValueResult:
    e_avg: np.ndarray
    k_hat: int
    selected: list  # sorted 1-based ids
    mu_spent: float = 0.0
    splits: list = field(default_factory=list)  # per-split SelectionResult
    ledger: NoiseLedger = field(default_factory=NoiseLedger)

    def to_dict(self) -> dict:
        return {
            "selected": [int(j) for j in self.selected],
            "k_hat": int(self.k_hat),
            "e_avg": [float(e) for e in self.e_avg],
            "mu_spent": _json_float(self.mu_spent),
            "splits": [
                {"threshold": _json_float(s.threshold),
                 "screened": [int(j) for j in s.peeled],
                 "released": {str(k): float(v) for k, v in s.released_w.items()}}
                for s in self.splits
            ],
            "ledger": self.ledger.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def knockoff_threshold(w, q: float, offset: int = 1) -> float:
    """Knockoff(+) threshold over the positive magnitudes of ``w``.

    Returns the smallest ``t`` among the distinct nonzero ``|w_j|`` with
    ``(offset + #{w_j <= -t}) / max(1, #{w_j >= t}) <= q``, or ``inf``.
    """
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise ValueError("w must be nonempty")
    return float(kernels.knockoff_threshold(w, float(q), int(offset)))


def knockoff_threshold_naive(w, q: float, offset: int = 1) -> float:
    """Direct double loop over the threshold definition. Test oracle."""
    best = math.inf
    for t in {abs(float(v)) for v in w}:
        if t <= 0:
            continue
        neg = sum(1 for v in w if v <= -t)
        pos = sum(1 for v in w if v >= t)
        if (offset + neg) / max(1, pos) <= q and t < best:
            best = t
    return best


def b_n(sensitivity: float, mu: float, m: int, p: int) -> float:
    """Noise-magnitude power diagnostic ``(8 D / mu) sqrt(3 m log p)``."""
    return 8.0 * sensitivity / mu * math.sqrt(3.0 * m * math.log(p))


def default_peel_size(p: int, k_n: int = 20) -> int:
    return min(p, max(2 * k_n, 40))


def mirror_peeling_select(stats: KnockoffStatistics, m: int, mu: float, q: float,
                          noise_stream, noise_scale: float = 1.0) -> SelectionResult:
    """Private disclosure of the top ``m`` statistics by peeling, then thresholding.

    ``noise_scale`` multiplies every noise standard deviation; values above
    1 only add privacy and are used to check that FDR control does not
    depend on the noise level.
    """
    w = np.asarray(stats.w, dtype=float)
    p = w.size
    if not 1 <= m <= p:
        raise ValueError(f"peel size m must lie in [1, {p}], got {m}")
    if not mu > 0:
        raise ValueError("mu must be positive")
    delta = stats.sensitivity
    peel_sd = noise_scale * math.sqrt(8.0 * m) * delta / mu
    release_sd = noise_scale * math.sqrt(2.0 * m) * delta / mu
    order = noisy_max_peel(np.abs(w), m, peel_sd, noise_stream)
    if release_sd > 0:
        noise = noise_stream.normal(0.0, release_sd, size=m)
    else:
        noise = np.zeros(m)
    released = {i: float(w[i] + z) for i, z in zip(order, noise)}
    # each round discloses an index and a value, mu / sqrt(2m) apiece
    ledger = NoiseLedger()
    step_mu = mu / math.sqrt(2.0 * m)
    for j in range(m):
        ledger.spend(f"peel[{j + 1}]", step_mu)
        ledger.spend(f"release[{j + 1}]", step_mu)
    w_rel = np.array([released[i] for i in order])
    T = knockoff_threshold(w_rel, q)
    fid = stats.feature_ids
    selected = sorted(int(fid[i]) for i in order if released[i] >= T)
    bn = b_n(delta, mu, m, p) if p > 1 else 0.0
    diag = {"b_n": bn, "family": stats.family.value, "sensitivity": delta,
            "peel_noise_sd": peel_sd, "release_noise_sd": release_sd}
    q1, q3 = np.percentile(np.abs(w_rel), [25, 75])
    diag["b_n_exceeds_iqr"] = bool(bn > q3 - q1)
    return SelectionResult(selected, T, {int(fid[i]): released[i] for i in order},
                           [int(fid[i]) for i in order], ledger.total, diag, ledger)


def dp_screen(u, sensitivity_u: float, k_n: int, mu: float, noise_stream,
              ledger: NoiseLedger | None = None) -> list:
    """Private top-``k_n`` screening; 0-based indices in peel order."""
    u = np.asarray(u, dtype=float)
    if not 1 <= k_n <= u.size:
        raise ValueError(f"K_n must lie in [1, {u.size}], got {k_n}")
    if not mu > 0:
        raise ValueError("mu must be positive")
    sd = 2.0 * math.sqrt(k_n) * sensitivity_u / mu
    out = noisy_max_peel(u, k_n, sd, noise_stream)
    if ledger is not None:
        for j in range(k_n):
            ledger.spend(f"screen[{j + 1}]", mu / math.sqrt(k_n))
    return out


@dataclass
class PipelineConfig:
    """Settings shared by the single-split, multi-split and mirror procedures.

    ``sigma`` is the known covariate covariance used for knockoff
    generation. ``n1=None`` splits the sample in half. ``hsic_bandwidth``
    is ``None`` for bound-based bandwidths ``(c_x, c_y)``, ``"median"``
    for the median heuristic on the screening half, or an explicit
    ``(bw_x, bw_y)`` pair.
    """

    sigma: np.ndarray
    mu: float = 1.0
    q: float = 0.2
    k_n: int = 20
    n1: int | None = None
    family: Family = Family.RIDGE
    ridge: RidgeConfig = field(default_factory=RidgeConfig)
    sgd: SgdConfig = field(default_factory=SgdConfig)
    hsic_bandwidth: object = None
    split_seed: int = 1
    knockoff_seed: int = 2
    noise_seed: int | None = 3
    production: bool = False
    b_splits: int = 5
    alpha_kn: float | None = None  # None: q / 2
    m: int | None = None
    noise_scale: float = 1.0

    def __post_init__(self):
        self.family = Family(self.family)
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.k_n < 1:
            raise ValueError("K_n must be at least 1")
        if self.b_splits < 1:
            raise ValueError("B must be at least 1")
        if self.alpha_kn is not None and not 0 < self.alpha_kn < 1:
            raise ValueError("alpha_kn must lie in (0, 1)")
        check_seeds(self.split_seed, self.knockoff_seed, self.noise_seed)
        self._ko = None

    def knockoff_config(self, seed=None) -> GaussianKnockoffConfig:
        if self._ko is None:
            self._ko = GaussianKnockoffConfig.equicorrelated(self.sigma, self.knockoff_seed)
        return self._ko if seed is None else self._ko.with_seed(seed)

    def stream(self):
        return make_noise_stream(self.noise_seed, self.production)


def _bandwidths(cfg, screen_half: Dataset, features):
    if cfg.family is not Family.HSIC:
        return None
    if cfg.hsic_bandwidth is None:
        return (screen_half.c_x, screen_half.c_y)
    if isinstance(cfg.hsic_bandwidth, str) and cfg.hsic_bandwidth == "median":
        bw_x = np.array([median_heuristic(screen_half.X[:, j]) for j in features])
        return (bw_x, median_heuristic(screen_half.y))
    return tuple(cfg.hsic_bandwidth)


def _post_screen(data, cfg, plan, knockoff_seed, mu, stream, private, ledger):
    """Steps 1-5 of the post-screening procedure on one split.

    Returns ``(screened, stats, released)`` with 0-based screened indices.
    """
    if cfg.k_n > data.p:
        raise ValueError(f"K_n={cfg.k_n} exceeds p={data.p}")
    half1 = data.subset(plan.I1)
    half2 = data.subset(plan.I2)
    u, du = screening_stats(half1)
    if private:
        screened = dp_screen(u, du, cfg.k_n, mu / math.sqrt(2.0), stream, ledger)
    else:
        screened = noisy_max_peel(u, cfg.k_n, 0.0, stream)
    # knockoffs for all p columns, then restricted to the screened set
    aug = generate_knockoffs(half2, cfg.knockoff_config(knockoff_seed), row_ids=plan.I2)
    stats = compute_stats(aug, cfg.family, screened, ridge=cfg.ridge, sgd=cfg.sgd,
                          bandwidths=_bandwidths(cfg, half1, screened))
    if private:
        sd = cfg.noise_scale * math.sqrt(2.0) * stats.sensitivity_l2 / mu
        released = stats.w + stream.normal(0.0, 1.0, size=stats.w.shape) * sd
        ledger.spend("release", mu / math.sqrt(2.0))
    else:
        released = stats.w.copy()
    return screened, stats, released, aug


def _single_split(data: Dataset, cfg: PipelineConfig, private: bool) -> SelectionResult:
    n1 = cfg.n1 if cfg.n1 is not None else data.n // 2
    plan = make_split(data.n, n1, cfg.split_seed)
    stream = cfg.stream()
    ledger = NoiseLedger()
    screened, stats, released, aug = _post_screen(
        data, cfg, plan, cfg.knockoff_seed, cfg.mu, stream, private, ledger)
    T = knockoff_threshold(released, cfg.q)
    ids = [j + 1 for j in screened]
    selected = sorted(i for i, v in zip(ids, released) if v >= T)
    diag = {
        "family": cfg.family.value,
        "sensitivity": stats.sensitivity,
        "sensitivity_l2": stats.sensitivity_l2,
        "n1": plan.n1,
        "n2": plan.n2,
        "knockoff_width": int(aug.p),
        "private": private,
    }
    if "stability_ok" in stats.diagnostics:
        diag["sgd_stability_ok"] = bool(stats.diagnostics["stability_ok"])
    return SelectionResult(selected, T, dict(zip(ids, map(float, released))), ids,
                           ledger.total if private else math.inf, diag, ledger)


def single_split_select(data: Dataset, cfg: PipelineConfig) -> SelectionResult:
    """Private screening on one half, private knockoff filter on the other."""
    return _single_split(data, cfg, private=True)


def nonprivate_baseline(data: Dataset, cfg: PipelineConfig) -> SelectionResult:
    """The single-split pipeline with every noise term removed.

    ``mu_spent`` is reported as ``inf``: the output carries no privacy
    guarantee.
    """
    return _single_split(data, cfg, private=False)


def ebh(e, q: float):
    """e-BH: returns ``(k_hat, selected 0-based indices)``."""
    e = np.asarray(e, dtype=float)
    p = e.size
    order = np.argsort(-e, kind="stable")
    ranked = e[order]
    ks = np.arange(1, p + 1)
    ok = np.flatnonzero(ranked >= p / (q * ks))
    if ok.size == 0:
        return 0, []
    k_hat = int(ok[-1] + 1)
    return k_hat, sorted(int(i) for i in order[:k_hat])


def _derived_seed(seed, b):
    return int(np.random.SeedSequence([int(seed), 0xE5, b]).generate_state(1, np.uint64)[0])


def multi_split_select(data: Dataset, cfg: PipelineConfig, private: bool = True) -> EValueResult:
    """Repeat the post-screening procedure over ``B`` splits and aggregate by e-BH.

    Each split receives ``mu / sqrt(B)`` so the splits compose to ``mu``.
    """
    B = cfg.b_splits
    alpha = cfg.alpha_kn if cfg.alpha_kn is not None else cfg.q / 2.0
    n1 = cfg.n1 if cfg.n1 is not None else data.n // 2
    p = data.p
    stream = cfg.stream()
    mu_b = cfg.mu / math.sqrt(B)
    ledger = NoiseLedger()
    e_sum = np.zeros(p)
    splits = []
    for b in range(1, B + 1):
        plan = make_split(data.n, n1, _derived_seed(cfg.split_seed, b))
        ko_seed = _derived_seed(cfg.knockoff_seed, b)
        sub = NoiseLedger()
        screened, stats, released, _ = _post_screen(
            data, cfg, plan, ko_seed, mu_b, stream, private, sub)
        ledger.extend(sub, prefix=f"split[{b}].")
        T = knockoff_threshold(released, alpha)
        n_neg = int(np.sum(released <= -T)) if math.isfinite(T) else 0
        e = np.zeros(p)
        if math.isfinite(T):
            hits = np.asarray(screened)[released >= T]
            e[hits] = p / (1.0 + n_neg)
        e_sum += e
        ids = [j + 1 for j in screened]
        splits.append(SelectionResult(
            sorted(i for i, v in zip(ids, released) if v >= T), T,
            dict(zip(ids, map(float, released))), ids, sub.total if private else math.inf))
    e_avg = e_sum / B
    k_hat, sel = ebh(e_avg, cfg.q)
    return EValueResult(e_avg, k_hat, [j + 1 for j in sel],
                        ledger.total if private else math.inf, splits, ledger)


def mirror_select(data: Dataset, cfg: PipelineConfig) -> SelectionResult:
    """Knockoffs on the full data followed by mirror peeling."""
    aug = generate_knockoffs(data, cfg.knockoff_config())
    bw = None
    if cfg.family is Family.HSIC:
        if isinstance(cfg.hsic_bandwidth, str):
            raise ValueError("median bandwidths need a screening half; use explicit values")
        bw = cfg.hsic_bandwidth
    stats = compute_stats(aug, cfg.family, ridge=cfg.ridge, sgd=cfg.sgd, bandwidths=bw)
    m = cfg.m if cfg.m is not None else default_peel_size(data.p, cfg.k_n)
    res = mirror_peeling_select(stats, m, cfg.mu, cfg.q, cfg.stream(), cfg.noise_scale)
    if res.diagnostics.get("b_n_exceeds_iqr"):
        warnings.warn(f"b_n={res.diagnostics['b_n']:.3g} exceeds the IQR of released |W|; "
                      "expect reduced power", stacklevel=2)
    return res
