import csv
import math

import numpy as np
import pytest

from dpknock.simharness import (
    AGG_COLUMNS,
    REP_COLUMNS,
    SimConfig,
    fdp_and_power,
    generate_instance,
    run_config,
    run_rep,
    write_reports,
)


def _small(**kw):
    base = dict(n=200, p=30, mu=1.0, s=5, k_n=8, reps=6, family="marginal")
    base.update(kw)
    return SimConfig(**base)


def test_design_covariance():
    sigma = _small().sigma
    assert sigma[0, 1] == pytest.approx(0.15, abs=1e-15)
    np.testing.assert_allclose(np.diag(sigma), 0.5)


def test_response_bound_and_lambda():
    cfg = _small(n=400, beta_value=2.0)
    assert cfg.c_y == pytest.approx(1.5 * math.sqrt(math.log(400)))
    assert cfg.lam == pytest.approx(0.25)
    assert _small(lambda_rule=3.0).lam == 3.0


def test_fdp_and_power_examples():
    assert fdp_and_power({1, 2, 11}, {1, 2, 3, 4}, 4) == (1 / 3, 0.5)
    assert fdp_and_power(set(), {1, 2}, 2) == (0.0, 0.0)
    fdp, power = fdp_and_power({3}, set(), 0)
    assert fdp == 1.0 and math.isnan(power)


def test_instance_is_bounded_and_reproducible():
    cfg = _small()
    a, b = generate_instance(cfg, 4), generate_instance(cfg, 4)
    np.testing.assert_array_equal(a.X, b.X)
    assert np.all(np.abs(a.X) <= cfg.c_x) and np.all(np.abs(a.y) <= cfg.c_y)


def test_config_validation():
    with pytest.raises(ValueError):
        _small(s=40)
    with pytest.raises(ValueError):
        _small(algo="nope")
    with pytest.raises(ValueError):
        _small(reps=0)


@pytest.mark.parametrize("algo", ["single", "mirror", "multi"])
def test_run_config_reproducible_csv(tmp_path, algo):
    cfg = _small(algo=algo, m=10, b_splits=2, reps=3)
    outs = []
    for k in range(2):
        reports = [run_config(cfg, "DP"), run_config(cfg, "NP")]
        outs.append(write_reports(reports, tmp_path / str(k)))
    for a, b in zip(*outs):
        assert open(a, "rb").read() == open(b, "rb").read()


def test_parallel_matches_serial():
    cfg = _small(reps=4)
    a = run_config(cfg, "NP", jobs=1).records
    b = run_config(cfg, "NP", jobs=2).records
    assert a == b


def test_aggregate_consistency(tmp_path):
    rep = run_config(_small(), "NP")
    rp, ap = write_reports([rep], tmp_path)
    rows = list(csv.DictReader(open(rp)))
    assert list(rows[0]) == REP_COLUMNS and len(rows) == 6
    agg = next(csv.DictReader(open(ap)))
    assert list(agg) == AGG_COLUMNS
    fdps = [float(r["fdp"]) for r in rows]
    assert float(agg["fdr"]) == pytest.approx(np.mean(fdps), abs=1e-12)
    assert float(agg["fdr_se"]) == pytest.approx(np.std(fdps, ddof=1) / math.sqrt(6), abs=1e-12)


def test_clip_rate_small():
    rep = run_config(_small(n=400, p=50, reps=3), "NP")
    agg = rep.aggregate()
    # N(0, 0.5) tail beyond 1.5 is about 0.034
    assert agg["x_clip_rate"] < 0.05
    assert 0 <= agg["y_clip_rate"] < 1


def test_null_signal_power_uses_configured_s():
    r = run_rep(_small(beta_value=0.0), "NP", 0)
    assert 0.0 <= r["power"] <= 1.0


def test_zero_sparsity_power_nan():
    rep = run_config(_small(s=0, reps=2), "NP")
    assert math.isnan(rep.power)
    assert rep.aggregate()["reps"] == 2


def test_procedure_validation():
    with pytest.raises(ValueError):
        run_config(_small(), "XX")
