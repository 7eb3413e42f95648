"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Both backends are loaded
explicitly, so the ``DPKNOCK_PURE`` switch has no effect here.
"""

import argparse
import timeit

import numpy as np

from dpknock import kernels
from dpknock.statistics import centered_gram


def cases(rng, scale):
    n = 400 * scale
    xb = rng.uniform(-1.5, 1.5, (n, 40))
    y = rng.uniform(-3, 3, n)
    w = rng.standard_normal(200 * scale)
    scores = np.abs(rng.standard_normal(200 * scale))
    noise = rng.standard_normal((40, scores.size))
    kc = centered_gram(y, 3.0)
    cols = xb[:, :10]
    bws = np.full(10, 1.5)
    return {
        "sgd_pass": lambda b: b.sgd_pass(xb, y, 50.0, 0.5, 600.0, 1.0),
        "hsic_columns": lambda b: b.hsic_columns(kc, cols, bws),
        "peel": lambda b: b.peel(scores, noise),
        "knockoff_threshold": lambda b: b.knockoff_threshold(w, 0.2, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1, help="multiply problem sizes")
    args = ap.parse_args()
    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases(rng, args.scale).items():
        times = {}
        for bname, mod in backends.items():
            number = 3
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=number,
                                             repeat=args.repeat)) / number
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<20}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times.values())
              + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
