"""Monte Carlo harness for the linear-model simulation study.

Each repetition ``rep`` of a configuration uses the seed
``base_seed + rep``, from which the data, split, knockoff and noise seeds
are derived. A report is therefore a pure function of the config list
and the base seed, and repetitions can run in any order or in parallel.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datamodel import Dataset
from .knockoffs import ar_covariance
from .selection import (
    PipelineConfig,
    mirror_select,
    multi_split_select,
    nonprivate_baseline,
    single_split_select,
)
from .statistics import Family, RidgeConfig, SgdConfig

REP_COLUMNS = ["config_id", "rep", "n", "p", "mu", "beta", "family", "procedure",
               "n_selected", "fdp", "power"]
AGG_COLUMNS = ["config_id", "n", "p", "mu", "beta", "family", "procedure", "algo", "reps",
               "fdr", "fdr_se", "power", "power_se", "mean_selected", "x_clip_rate",
               "y_clip_rate"]


@dataclass
class SimConfig:
    n: int
    p: int
    mu: float
    beta_value: float = 1.0
    s: int = 10
    rho_scale: float = 0.5
    rho_decay: float = 0.3
    c_x: float = 1.5
    c1: float = 1.5
    q: float = 0.2
    k_n: int = 20
    reps: int = 100
    base_seed: int = 0
    family: Family = Family.RIDGE
    lambda_rule: str | float = "default"  # "default" (s / ||beta||^2) or a fixed positive value
    algo: str = "single"  # single | multi | mirror
    m: int | None = None
    b_splits: int = 5
    alpha_kn: float | None = None
    noise_scale: float = 1.0
    config_id: int = 0

    def __post_init__(self):
        self.family = Family(self.family)
        if self.s > self.p:
            raise ValueError("s must not exceed p")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.algo not in ("single", "multi", "mirror"):
            raise ValueError(f"unknown algo {self.algo!r}")

    @property
    def c_y(self) -> float:
        return self.c1 * math.sqrt(math.log(self.n))

    @property
    def sigma(self) -> np.ndarray:
        return ar_covariance(self.p, self.rho_scale, self.rho_decay)

    @property
    def lam(self) -> float:
        if self.lambda_rule == "default":
            norm2 = self.s * self.beta_value**2
            return self.s / norm2 if norm2 > 0 else 1.0
        lam = float(self.lambda_rule)
        if not lam > 0:
            raise ValueError("fixed lambda must be positive")
        return lam

    @property
    def true_support(self) -> set:
        return set(range(1, self.s + 1))


def _seeds(rep_seed):
    state = np.random.SeedSequence([int(rep_seed), 0x51]).generate_state(8, np.uint64)
    uniq = list(dict.fromkeys(int(s) for s in state))
    return uniq[0], uniq[1], uniq[2], uniq[3]


def _draw(cfg: SimConfig, data_seed):
    rng = np.random.default_rng(data_seed)
    chol = np.linalg.cholesky(cfg.sigma)
    X = np.clip(rng.standard_normal((cfg.n, cfg.p)) @ chol.T, -cfg.c_x, cfg.c_x)
    beta = np.zeros(cfg.p)
    beta[: cfg.s] = cfg.beta_value
    y_raw = X @ beta + rng.standard_normal(cfg.n)
    return X, y_raw


def generate_instance(cfg: SimConfig, rep_seed) -> Dataset:
    """Linear model with AR covariates; X and y clipped to their bounds."""
    X, y = _draw(cfg, _seeds(rep_seed)[0])
    return Dataset(X, y, cfg.c_x, cfg.c_y)


def fdp_and_power(selected, true_support, s: int):
    """False discovery proportion and power; power is NaN when ``s == 0``."""
    selected = set(selected)
    true_support = set(true_support)
    fdp = len(selected - true_support) / max(1, len(selected))
    power = len(selected & true_support) / s if s > 0 else math.nan
    return fdp, power


def pipeline_config(cfg: SimConfig, rep_seed) -> PipelineConfig:
    _, split_seed, ko_seed, noise_seed = _seeds(rep_seed)
    lam = cfg.lam
    return PipelineConfig(
        sigma=cfg.sigma, mu=cfg.mu, q=cfg.q, k_n=cfg.k_n, family=cfg.family,
        ridge=RidgeConfig(lam), sgd=SgdConfig(lam=lam),
        split_seed=split_seed, knockoff_seed=ko_seed, noise_seed=noise_seed,
        b_splits=cfg.b_splits, alpha_kn=cfg.alpha_kn, m=cfg.m, noise_scale=cfg.noise_scale,
    )


def run_procedure(cfg: SimConfig, data: Dataset, pcfg: PipelineConfig, procedure: str):
    private = procedure == "DP"
    if cfg.algo == "single":
        res = single_split_select(data, pcfg) if private else nonprivate_baseline(data, pcfg)
    elif cfg.algo == "multi":
        res = multi_split_select(data, pcfg, private=private)
    else:
        if not private:
            pcfg.noise_scale = 0.0
        res = mirror_select(data, pcfg)
    return res


def run_rep(cfg: SimConfig, procedure: str, rep: int) -> dict:
    rep_seed = cfg.base_seed + rep
    X, y_raw = _draw(cfg, _seeds(rep_seed)[0])
    data = Dataset(X, y_raw, cfg.c_x, cfg.c_y)
    x_clip = float(np.mean(np.abs(X) >= cfg.c_x))
    y_clip = float(np.mean(np.abs(y_raw) > cfg.c_y))
    res = run_procedure(cfg, data, pipeline_config(cfg, rep_seed), procedure)
    fdp, power = fdp_and_power(res.selected, cfg.true_support, cfg.s)
    return {
        "config_id": cfg.config_id, "rep": rep, "n": cfg.n, "p": cfg.p, "mu": cfg.mu,
        "beta": cfg.beta_value, "family": cfg.family.value, "procedure": procedure,
        "n_selected": len(res.selected), "fdp": fdp, "power": power,
        "x_clip_rate": x_clip, "y_clip_rate": y_clip,
    }


def _mean_se(values):
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


@dataclass
class SimReport:
    config: SimConfig
    procedure: str
    records: list = field(default_factory=list)

    @property
    def fdr(self):
        return _mean_se(r["fdp"] for r in self.records)[0]

    @property
    def fdr_se(self):
        return _mean_se(r["fdp"] for r in self.records)[1]

    @property
    def power(self):
        return _mean_se(r["power"] for r in self.records)[0]

    @property
    def power_se(self):
        return _mean_se(r["power"] for r in self.records)[1]

    def aggregate(self) -> dict:
        c = self.config
        return {
            "config_id": c.config_id, "n": c.n, "p": c.p, "mu": c.mu, "beta": c.beta_value,
            "family": c.family.value, "procedure": self.procedure, "algo": c.algo,
            "reps": len(self.records), "fdr": self.fdr, "fdr_se": self.fdr_se,
            "power": self.power, "power_se": self.power_se,
            "mean_selected": float(np.mean([r["n_selected"] for r in self.records])),
            "x_clip_rate": float(np.mean([r["x_clip_rate"] for r in self.records])),
            "y_clip_rate": float(np.mean([r["y_clip_rate"] for r in self.records])),
        }


def _job(args):
    return run_rep(*args)


def run_config(cfg: SimConfig, procedure: str, jobs: int = 1) -> SimReport:
    procedure = procedure.upper()
    if procedure not in ("DP", "NP"):
        raise ValueError(f"procedure must be DP or NP, got {procedure!r}")
    tasks = [(cfg, procedure, rep) for rep in range(cfg.reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_job, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_job(t) for t in tasks]
    records.sort(key=lambda r: r["rep"])
    return SimReport(cfg, procedure, records)


def run_grid(cfgs, procedure: str, jobs: int = 1) -> list:
    return [run_config(cfg, procedure, jobs) for cfg in cfgs]


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_reports(reports, out_dir, prefix: str = "sim") -> tuple:
    os.makedirs(out_dir, exist_ok=True)
    rep_path = os.path.join(out_dir, f"{prefix}_reps.csv")
    agg_path = os.path.join(out_dir, f"{prefix}_aggregate.csv")
    with open(rep_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REP_COLUMNS)
        for rep in reports:
            for r in rep.records:
                w.writerow([_fmt(r[c]) for c in REP_COLUMNS])
    with open(agg_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGG_COLUMNS)
        for rep in reports:
            agg = rep.aggregate()
            w.writerow([_fmt(agg[c]) for c in AGG_COLUMNS])
    return rep_path, agg_path
