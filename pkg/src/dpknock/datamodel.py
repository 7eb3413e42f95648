"""Data containers, CSV ingestion and seeded sample splitting.

Feature ids are 1-based wherever they leave the package (JSON, CSV,
``SelectionResult.selected``); arrays are indexed from 0 internally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class ParseError(ValueError):
    """Malformed input file. Carries the 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response vector and design matrix with declared bounds.

    Entries outside ``[-c_x, c_x]`` (covariates) and ``[-c_y, c_y]``
    (response) are clipped at construction; ``clipped`` records whether
    that happened. Arrays are stored read-only.
    """

    X: np.ndarray
    y: np.ndarray
    c_x: float
    c_y: float
    clipped: bool = field(default=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValidationError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(f"y must have length {X.shape[0]}, got shape {y.shape}")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValidationError(f"need n >= 2 and p >= 1, got {X.shape}")
        if not (self.c_x > 0 and self.c_y > 0):
            raise ValidationError("bounds c_x and c_y must be positive")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("non-finite entry in X or y")
        Xc = np.clip(X, -self.c_x, self.c_x)
        yc = np.clip(y, -self.c_y, self.c_y)
        did_clip = bool(self.clipped or np.any(Xc != X) or np.any(yc != y))
        object.__setattr__(self, "X", _frozen(Xc))
        object.__setattr__(self, "y", _frozen(yc))
        object.__setattr__(self, "c_x", float(self.c_x))
        object.__setattr__(self, "c_y", float(self.c_y))
        object.__setattr__(self, "clipped", did_clip)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.c_x, self.c_y)

    def replace_row(self, i, x_row, y_val) -> "Dataset":
        """Neighbouring dataset with row ``i`` (0-based) replaced."""
        X = self.X.copy()
        y = self.y.copy()
        X[i] = x_row
        y[i] = y_val
        return Dataset(X, y, self.c_x, self.c_y)


@dataclass(frozen=True, eq=False)
class AugmentedDataset:
    """A dataset joined with its knockoff matrix.

    ``row_ids`` are the 0-based row positions in the original (unsplit)
    data that keyed the per-row knockoff randomness.
    """

    base: Dataset
    X_tilde: np.ndarray
    knockoff_seed: int
    sigma: np.ndarray
    r: np.ndarray
    row_ids: np.ndarray

    def __post_init__(self):
        if self.X_tilde.shape != self.base.X.shape:
            raise ValidationError(
                f"knockoff shape {self.X_tilde.shape} != data shape {self.base.X.shape}"
            )
        object.__setattr__(self, "X_tilde", _frozen(self.X_tilde))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def p(self) -> int:
        return self.base.p

    def columns(self, features=None):
        """Return ``(X_C, X_tilde_C, y)`` for 0-based feature indices."""
        if features is None:
            return self.base.X, self.X_tilde, self.base.y
        idx = np.asarray(features, dtype=np.int64)
        return self.base.X[:, idx], self.X_tilde[:, idx], self.base.y

    def swap(self, j) -> "AugmentedDataset":
        """Swap column ``j`` of X with its knockoff (flip-sign checks)."""
        X = self.base.X.copy()
        Xt = self.X_tilde.copy()
        X[:, j], Xt[:, j] = self.X_tilde[:, j], self.base.X[:, j]
        base = Dataset(X, self.base.y, self.base.c_x, self.base.c_y)
        return AugmentedDataset(base, Xt, self.knockoff_seed, self.sigma, self.r, self.row_ids)


@dataclass(frozen=True)
class SplitPlan:
    split_seed: int
    I1: np.ndarray
    I2: np.ndarray

    @property
    def n1(self) -> int:
        return len(self.I1)

    @property
    def n2(self) -> int:
        return len(self.I2)


def make_split(n: int, n1: int, split_seed: int) -> SplitPlan:
    """Uniformly random partition of ``range(n)`` into sizes n1 and n - n1.

    The partition depends only on ``(n, n1, split_seed)``.
    """
    if not (1 <= n1 < n):
        raise ValueError(f"need 1 <= n1 < n, got n1={n1}, n={n}")
    rng = np.random.default_rng(np.random.SeedSequence([int(split_seed), 0x5B17]))
    perm = rng.permutation(n)
    I1 = np.sort(perm[:n1])
    I2 = np.sort(perm[n1:])
    I1.setflags(write=False)
    I2.setflags(write=False)
    return SplitPlan(int(split_seed), I1, I2)


def load_dataset(path, c_x: float, c_y: float) -> Dataset:
    """Read ``y,x1,...,xp`` CSV with a single header row."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "y":
            raise ParseError("header must start with 'y' followed by x1..xp", line=1)
        expected = [f"x{j}" for j in range(1, len(header))]
        if header[1:] != expected:
            raise ParseError(f"expected covariate columns {expected[0]}..{expected[-1]}", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"not a number: {cell!r}", line=lineno, column=col) from None
            rows.append(vals)
    if not rows:
        raise ParseError("no data rows", line=2)
    arr = np.array(rows)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"non-finite value at line {r + 2}, column {c + 1}")
    return Dataset(arr[:, 1:], arr[:, 0], c_x, c_y)


def write_dataset(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x{j}" for j in range(1, data.p + 1)])
        for yi, xi in zip(data.y, data.X):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])
