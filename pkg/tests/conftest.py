import numpy as np
import pytest

from dpknock.datamodel import Dataset
from dpknock.knockoffs import GaussianKnockoffConfig, ar_covariance, generate_knockoffs
from dpknock import kernels


BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)


def make_aug(n=60, p=6, seed=0, c_x=1.5, c_y=3.0, signal=3):
    rng = np.random.default_rng(seed)
    sigma = ar_covariance(p)
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(sigma).T
    beta = np.zeros(p)
    beta[:signal] = 1.0
    y = X @ beta + rng.standard_normal(n)
    data = Dataset(X, y, c_x, c_y)
    cfg = GaussianKnockoffConfig.equicorrelated(sigma, seed + 101)
    return generate_knockoffs(data, cfg)


@pytest.fixture
def aug():
    return make_aug()


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, ok, detail):
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":").rstrip("abc"))):
            terminalreporter.write_line(line)
