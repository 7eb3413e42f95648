"""Command-line entry point: ``dpknock {select,simulate,verify}``.

Exit codes: 0 success, 1 runtime error, 2 validation error, 3 failed
verification. A ``--config`` JSON file may supply any flag (keys use the
flag's dest name, e.g. ``seed_noise``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
import warnings

import numpy as np

from .datamodel import ParseError, ValidationError, load_dataset
from .knockoffs import ar_covariance, generate_knockoffs, write_knockoffs
from .selection import (
    PipelineConfig,
    mirror_select,
    multi_split_select,
    single_split_select,
)
from .statistics import Family, RidgeConfig, SgdConfig

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, EXIT_VERIFY = 0, 1, 2, 3


class CliValidationError(Exception):
    pass


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def parse_sigma(spec, p):
    """``ar:<scale>:<decay>`` or a path to a p x p CSV (no header)."""
    if spec is None:
        raise CliValidationError("--sigma is required to generate knockoffs")
    if spec.startswith("ar:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise CliValidationError("--sigma ar shorthand is ar:<scale>:<decay>")
        return ar_covariance(p, float(parts[1]), float(parts[2]))
    if not os.path.exists(spec):
        raise CliValidationError(f"sigma file not found: {spec}")
    sigma = np.loadtxt(spec, delimiter=",", ndmin=2)
    if sigma.shape != (p, p):
        raise CliValidationError(f"sigma has shape {sigma.shape}, data has p={p}")
    return sigma


def _add_select(sub):
    ap = sub.add_parser("select", help="run a private knockoff selection on a CSV file")
    ap.add_argument("--input", help="CSV with columns y,x1..xp")
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--q", type=float, default=0.2)
    ap.add_argument("--algo", choices=["mirror", "single", "multi"], default="single")
    ap.add_argument("--family", choices=[f.value for f in Family], default="ridge")
    ap.add_argument("--sigma", help="p x p covariance CSV or ar:<scale>:<decay>")
    ap.add_argument("--cx", type=float)
    ap.add_argument("--cy", type=float)
    ap.add_argument("--m", type=int, help="peel size (mirror)")
    ap.add_argument("--kn", type=int, default=20, help="screening size")
    ap.add_argument("--n1", type=int, help="screening half size (default n/2)")
    ap.add_argument("--b-splits", type=int, default=5)
    ap.add_argument("--alpha-kn", type=float)
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0)
    ap.add_argument("--sgd-c", type=float, default=0.5)
    ap.add_argument("--sgd-rbeta", type=float, default=1.0)
    ap.add_argument("--bandwidth", help="HSIC bandwidths bw_x,bw_y or 'median'")
    ap.add_argument("--seed-split", type=int, default=1)
    ap.add_argument("--seed-knockoff", type=int, default=2)
    ap.add_argument("--seed-noise", type=int)
    ap.add_argument("--production-privacy", action="store_true",
                    help="draw privacy noise from OS entropy (not replayable)")
    ap.add_argument("--knockoff-out", help="write the knockoff matrix (mirror) to CSV")
    ap.add_argument("--stats-out", help="write released statistics to CSV")
    ap.set_defaults(func=cmd_select)
    return ap


def _add_simulate(sub):
    ap = sub.add_parser("simulate", help="Monte Carlo FDR/power study")
    ap.add_argument("--n-grid", default="400,800")
    ap.add_argument("--p-grid", default="200")
    ap.add_argument("--mu-grid", default="1.0")
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--s", type=int, default=10)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--q", type=float, default=0.2)
    ap.add_argument("--kn", type=int, default=20)
    ap.add_argument("--family", choices=[f.value for f in Family], default="ridge")
    ap.add_argument("--algo", choices=["mirror", "single", "multi"], default="single")
    ap.add_argument("--procedure", choices=["dp", "np", "both"], default="both")
    ap.add_argument("--lambda", dest="lam", help="fixed ridge lambda (default s/||beta||^2)")
    ap.add_argument("--m", type=int)
    ap.add_argument("--b-splits", type=int, default=5)
    ap.add_argument("--base-seed", type=int, default=0)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out-dir", default="sim_out")
    ap.set_defaults(func=cmd_simulate)
    return ap


def _add_verify(sub):
    ap = sub.add_parser("verify", help="run an oracle check")
    ap.add_argument("--check", choices=["sensitivity", "exchangeability", "threshold-oracle"],
                    required=False)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--family", choices=[f.value for f in Family], default="marginal")
    ap.add_argument("--n", type=int)
    ap.add_argument("--p", type=int)
    ap.add_argument("--tol", type=float, default=0.05, help="exchangeability tolerance")
    ap.add_argument("--seed", type=int, default=0)
    ap.set_defaults(func=cmd_verify)
    return ap


def build_parser():
    ap = argparse.ArgumentParser(prog="dpknock", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON file with default flag values")
    sub = ap.add_subparsers(dest="command", required=True)
    subs = [_add_select(sub), _add_simulate(sub), _add_verify(sub)]
    return ap, subs


def _emit(obj):
    print(json.dumps(obj, indent=2))


def cmd_select(args):
    if args.input is None:
        raise CliValidationError("--input is required")
    if args.cx is None or args.cy is None:
        raise CliValidationError("--cx and --cy are required")
    if not args.mu > 0:
        raise CliValidationError("--mu must be positive")
    if not 0 < args.q < 1:
        raise CliValidationError("--q must lie in (0, 1)")
    seed_noise = args.seed_noise
    if seed_noise is None and not args.production_privacy:
        seed_noise = secrets.randbits(63)
        print(f"dpknock: --seed-noise not given, using {seed_noise}", file=sys.stderr)
    data = load_dataset(args.input, args.cx, args.cy)
    sigma = parse_sigma(args.sigma, data.p)
    bandwidth = None
    if args.bandwidth:
        bandwidth = "median" if args.bandwidth == "median" else tuple(_floats(args.bandwidth))
    try:
        cfg = PipelineConfig(
            sigma=sigma, mu=args.mu, q=args.q, k_n=min(args.kn, data.p), n1=args.n1,
            family=args.family, ridge=RidgeConfig(args.lam),
            sgd=SgdConfig(lam=args.lam, c=args.sgd_c, r_beta=args.sgd_rbeta),
            hsic_bandwidth=bandwidth, split_seed=args.seed_split,
            knockoff_seed=args.seed_knockoff, noise_seed=seed_noise,
            production=args.production_privacy, b_splits=args.b_splits,
            alpha_kn=args.alpha_kn, m=args.m,
        )
    except ValueError as exc:
        raise CliValidationError(str(exc)) from exc
    if args.algo != "mirror" and args.kn > data.p:
        raise CliValidationError(f"--kn {args.kn} exceeds p={data.p}")
    if args.algo == "mirror":
        res = mirror_select(data, cfg)
        if args.knockoff_out:
            write_knockoffs(args.knockoff_out, generate_knockoffs(data, cfg.knockoff_config()))
    elif args.algo == "single":
        res = single_split_select(data, cfg)
    else:
        res = multi_split_select(data, cfg)
    out = res.to_dict()
    out["seeds"] = {"split": args.seed_split, "knockoff": args.seed_knockoff,
                    "noise": None if args.production_privacy else seed_noise}
    out["algo"] = args.algo
    if args.stats_out and hasattr(res, "released_w"):
        with open(args.stats_out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_id", "W", "family", "sensitivity"])
            for j, v in res.released_w.items():
                w.writerow([j, repr(v), args.family, res.diagnostics.get("sensitivity")])
    _emit(out)
    return EXIT_OK


def cmd_simulate(args):
    from .simharness import SimConfig, run_grid, write_reports

    jobs = args.jobs or int(os.environ.get("DPKNOCK_JOBS", "1"))
    if args.reps < 1:
        raise CliValidationError("--reps must be >= 1")
    cfgs = []
    try:
        for n in _ints(args.n_grid):
            for p in _ints(args.p_grid):
                for mu in _floats(args.mu_grid):
                    cfgs.append(SimConfig(
                        n=n, p=p, mu=mu, beta_value=args.beta, s=args.s, q=args.q,
                        k_n=args.kn, reps=args.reps, base_seed=args.base_seed,
                        family=args.family, algo=args.algo, m=args.m,
                        b_splits=args.b_splits,
                        lambda_rule=float(args.lam) if args.lam else "default",
                        config_id=len(cfgs)))
    except ValueError as exc:
        raise CliValidationError(str(exc)) from exc
    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {args.out_dir}: {exc}") from exc
    procs = ["DP", "NP"] if args.procedure == "both" else [args.procedure.upper()]
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for proc in procs:
            reports.extend(run_grid(cfgs, proc, jobs=jobs))
    rep_path, agg_path = write_reports(reports, args.out_dir)
    _emit({"reps_csv": rep_path, "aggregate_csv": agg_path,
           "aggregates": [r.aggregate() for r in reports]})
    return EXIT_OK


def cmd_verify(args):
    from .verify import check_exchangeability, check_threshold_oracle, verify_sensitivity

    if args.check is None:
        raise CliValidationError("--check is required")
    if args.trials < 1:
        raise CliValidationError("--trials must be >= 1")
    if args.check == "threshold-oracle":
        rep = check_threshold_oracle(args.trials, args.seed)
        _emit({"check": args.check, "trials": rep.trials, "mismatches": rep.mismatches,
               "witnesses": rep.witnesses})
        return EXIT_OK if rep.ok else EXIT_VERIFY
    if args.check == "exchangeability":
        n = args.n or 50000
        p = args.p or 3
        gap = check_exchangeability(n, p, args.seed)
        ok = gap < args.tol
        _emit({"check": args.check, "n": n, "p": p, "max_deviation": gap,
               "tol": args.tol, "ok": ok})
        return EXIT_OK if ok else EXIT_VERIFY
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = verify_sensitivity(args.family, args.trials, args.n or 50, args.p or 8, args.seed)
    out = {"check": args.check, **rep.to_dict()}
    _emit(out)
    return EXIT_OK if rep.ok else EXIT_VERIFY


def _apply_config(ap, subs, argv):
    pre, _ = ap.parse_known_args(argv)
    if not pre.config:
        return
    with open(pre.config) as fh:
        defaults = json.load(fh)
    if not isinstance(defaults, dict):
        raise CliValidationError("--config must hold a JSON object")
    for sp in subs:
        known = {a.dest for a in sp._actions}
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()
                           if k.replace("-", "_") in known})


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    ap, subs = build_parser()
    try:
        _apply_config(ap, subs, argv)
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    except (OSError, ValueError, CliValidationError) as exc:
        print(f"dpknock: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (CliValidationError, ParseError, ValidationError) as exc:
        print(f"dpknock: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"dpknock: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
