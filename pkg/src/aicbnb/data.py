"""Dataset loading, standardization, Gram precomputation and dependency detection.

Predictor columns are addressed 1..p throughout the package; index 0 is the
all-ones intercept column of the augmented design.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

DEPENDENCY_TOL = 1e-8
ALPHA_ZERO_TOL = 1e-10
CONSTANT_TOL = 1e-12


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Standardization:
    """Per-column (mean, scale) pairs; the last entry belongs to the response."""

    means: tuple[float, ...]
    scales: tuple[float, ...]
    constant: tuple[bool, ...]
    ddof: int = 1

    @property
    def convention(self) -> str:
        return f"mean 0, sample std 1 (divisor n-{self.ddof})" if self.ddof else "mean 0, population std 1 (divisor n)"

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "ddof": self.ddof,
            "means": list(self.means),
            "scales": list(self.scales),
            "constant": list(self.constant),
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray
    response: np.ndarray
    names: tuple[str, ...]
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        X = np.asarray(self.values, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: values {X.shape}, response {y.shape}")
        if X.shape[0] < 2:
            raise DataError(f"need at least 2 rows, got {X.shape[0]}")
        if X.shape[1] < 1:
            raise DataError("need at least one predictor column")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("data contains non-finite values")
        if len(self.names) != X.shape[1] + 1:
            raise DataError(f"expected {X.shape[1] + 1} names, got {len(self.names)}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return self.names[:-1]

    @property
    def response_name(self) -> str:
        return self.names[-1]

    @property
    def constant_columns(self) -> tuple[int, ...]:
        """1-based indices of predictors flagged constant during standardization."""
        if self.standardization is None:
            return ()
        return tuple(j + 1 for j, c in enumerate(self.standardization.constant[:-1]) if c)

    def column(self, j: int) -> np.ndarray:
        """Column j of the intercept-augmented design (0 is the ones vector)."""
        if j == 0:
            return np.ones(self.n)
        return self.values[:, j - 1]

    def unstandardize(self) -> "Dataset":
        if self.standardization is None:
            return self
        s = self.standardization
        means = np.asarray(s.means)
        scales = np.asarray(s.scales)
        X = self.values * scales[:-1] + np.where(s.constant[:-1], 0.0, means[:-1])
        y = self.response * scales[-1] + means[-1]
        return Dataset(X, y, self.names)


def from_arrays(X, y, names: Optional[Sequence[str]] = None) -> Dataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if names is None:
        names = [f"x{j + 1}" for j in range(X.shape[1])] + ["y"]
    return Dataset(X, np.asarray(y, dtype=float), tuple(names))


def load_csv(path: Union[str, Path], response: Union[str, int, None] = None) -> Dataset:
    """Read a comma-separated file with one header row.

    ``response`` is a column name or a 0-based column index; ``None`` picks the
    last column.  Remaining columns become predictors in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]

    if response is None:
        r_idx = len(header) - 1
    elif isinstance(response, int):
        r_idx = response
    elif response in header:
        r_idx = header.index(response)
    elif response.lstrip("-").isdigit():
        r_idx = int(response)
    else:
        raise DataError(f"{path}: response column {response!r} not in header")
    if not -len(header) <= r_idx < len(header):
        raise DataError(f"{path}: response column index {r_idx} out of range")
    r_idx %= len(header)
    if len(header) < 2:
        raise DataError(f"{path}: need a response and at least one predictor")

    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}: row {line} has {len(row)} cells, header has {len(header)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} at row {line}, column {header[j]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite cell {cell!r} at row {line}, column {header[j]!r}")
            data[i, j] = v
    if data.shape[0] < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {data.shape[0]}")

    keep = [j for j in range(len(header)) if j != r_idx]
    names = tuple(header[j] for j in keep) + (header[r_idx],)
    return Dataset(data[:, keep], data[:, r_idx], names)


def standardize(d: Dataset, ddof: int = 1) -> Dataset:
    """Center and scale every predictor and the response.

    Constant predictors are left untouched and flagged; a constant response
    raises :class:`DataError`.
    """
    if d.standardization is not None:
        raise DataError("dataset is already standardized")
    full = np.column_stack([d.values, d.response])
    means = full.mean(axis=0)
    stds = full.std(axis=0, ddof=ddof)
    constant = stds <= CONSTANT_TOL * np.abs(means) + 1e-300
    if constant[-1]:
        raise DataError(f"response {d.response_name!r} is constant")
    out = np.where(constant, full, (full - means) / np.where(constant, 1.0, stds))
    scales = np.where(constant, 1.0, stds)
    meta = Standardization(
        means=tuple(float(m) for m in means),
        scales=tuple(float(s) for s in scales),
        constant=tuple(bool(c) for c in constant),
        ddof=ddof,
    )
    return Dataset(out[:, :-1], out[:, -1], d.names, meta)


@dataclass(frozen=True, eq=False)
class GramSystem:
    """Inner products of the augmented design ``[1, x^1, ..., x^p]`` and ``y``."""

    G: np.ndarray
    b: np.ndarray
    yty: float
    n: int

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    @property
    def p(self) -> int:
        return self.G.shape[0] - 1


def build_gram(d: Dataset) -> GramSystem:
    A = np.empty((d.n, d.p + 1))
    A[:, 0] = 1.0
    A[:, 1:] = d.values
    with np.errstate(over="raise", invalid="raise"):
        try:
            G = A.T @ A
            b = A.T @ d.response
            yty = float(d.response @ d.response)
        except FloatingPointError as exc:
            raise DataError(f"overflow while forming inner products: {exc}") from None
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(b)) and math.isfinite(yty)):
        raise DataError("overflow while forming inner products")
    sums = d.values.sum(axis=0)
    G[0, 0] = d.n
    G[0, 1:] = sums
    G[1:, 0] = sums
    b[0] = d.response.sum()
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    b.setflags(write=False)
    return GramSystem(G, b, yty, d.n)


@dataclass(frozen=True)
class DependencySet:
    """Column ``dependent`` lies in the span of ``basis`` (plus the intercept if flagged).

    Every member of :attr:`members` can be written as a combination of the
    other members and the intercept.
    """

    dependent: int
    basis: frozenset
    alpha: tuple  # (intercept coefficient, then one per sorted basis index)
    intercept: bool

    @property
    def members(self) -> frozenset:
        return self.basis | {self.dependent}

    @property
    def mask(self) -> int:
        m = 0
        for j in self.members:
            m |= 1 << j
        return m

    def coefficients(self) -> dict:
        return dict(zip([0] + sorted(self.basis), self.alpha))

    def to_dict(self) -> dict:
        return {
            "dependent": self.dependent,
            "basis": sorted(self.basis),
            "intercept": self.intercept,
            "alpha": list(self.alpha),
        }


@dataclass(frozen=True)
class DependencyCollection:
    sets: tuple = ()

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __bool__(self) -> bool:
        return bool(self.sets)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(s.mask for s in self.sets)

    def to_list(self) -> list:
        return [s.to_dict() for s in self.sets]


def find_dependencies(d: Dataset, tol: float = DEPENDENCY_TOL) -> DependencyCollection:
    """Greedy scan of columns 0..p keeping an independent basis.

    A column whose projection residual onto the current basis is within
    ``tol * ||x^j||`` is recorded together with the basis columns it needs.
    """
    basis = [0]
    cols = [d.column(0)]
    found = []
    for j in range(1, d.p + 1):
        xj = d.column(j)
        norm_j = float(np.linalg.norm(xj))
        B = np.column_stack(cols)
        alpha, *_ = np.linalg.lstsq(B, xj, rcond=None)
        resid = float(np.linalg.norm(B @ alpha - xj))
        if resid > tol * norm_j:
            basis.append(j)
            cols.append(xj)
            continue
        col_norms = np.linalg.norm(B, axis=0)
        used = np.abs(alpha) * col_norms > ALPHA_ZERO_TOL * max(norm_j, 1e-300)
        members = frozenset(k for k, u in zip(basis, used) if u and k != 0)
        coef = (float(alpha[0]) if used[0] else 0.0,) + tuple(
            float(a) for k, a in zip(basis, alpha) if k in members
        )
        found.append(DependencySet(j, members, coef, bool(used[0])))
    return DependencyCollection(tuple(found))
