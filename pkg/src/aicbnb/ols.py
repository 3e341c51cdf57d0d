"""Subset least squares on a Gram system, AIC arithmetic and the enumeration oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .data import GramSystem

PIVOT_TOL = 1e-10
ZERO_TOL = 1e-9
ENUM_CAP = 20
LOG_2PI = math.log(2.0 * math.pi)


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for j in indices:
        m |= 1 << j
    return m


def indices_of(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def rss_floor(g: GramSystem) -> float:
    return max(1e-12 * g.yty, 1e-300)


class Factor:
    """Up-looking Cholesky factor of a growing Gram submatrix.

    Columns are appended one at a time; a column whose new pivot falls below
    ``PIVOT_TOL`` times its own diagonal is linearly dependent on the columns
    already kept and is dropped (its coefficient is zero).  The residual sum
    of squares is maintained alongside, so it costs O(r) per append.
    """

    def __init__(self, g: GramSystem):
        self.g = g
        m = g.dim
        self.L = np.zeros((m, m))
        self.wy = np.zeros(m)
        self.kept: list[int] = []
        self._stack: list[tuple[int, bool, float]] = []
        self.rss = g.yty
        self.push(0)

    @property
    def size(self) -> int:
        return len(self.kept)

    @property
    def columns(self) -> list[int]:
        return [c for c, _, _ in self._stack]

    @property
    def dropped(self) -> list[int]:
        return [c for c, kept, _ in self._stack if not kept]

    def _row(self, c: int) -> tuple[np.ndarray, float]:
        r = len(self.kept)
        a = self.g.G[self.kept, c]
        w = solve_triangular(self.L[:r, :r], a, lower=True, check_finite=False) if r else a
        return w, float(self.g.G[c, c] - w @ w)

    def trial(self, c: int) -> float:
        """rss after appending column c, without changing the factor."""
        w, d = self._row(c)
        if d <= PIVOT_TOL * self.g.G[c, c] or d <= 0.0:
            return self.rss
        r = len(self.kept)
        t = (self.g.b[c] - w @ self.wy[:r]) / math.sqrt(d)
        return self.rss - t * t

    def push(self, c: int) -> bool:
        r = len(self.kept)
        w, d = self._row(c)
        if r and (d <= PIVOT_TOL * self.g.G[c, c] or d <= 0.0):
            self._stack.append((c, False, self.rss))
            return False
        if d <= 0.0:
            raise ValueError(f"column {c} has a non-positive diagonal")
        piv = math.sqrt(d)
        self.L[r, :r] = w
        self.L[r, r] = piv
        self.wy[r] = (self.g.b[c] - w @ self.wy[:r]) / piv
        self._stack.append((c, True, self.rss))
        self.kept.append(c)
        self.rss = self.rss - self.wy[r] ** 2
        return True

    def pop(self) -> int:
        c, kept, prev = self._stack.pop()
        if kept:
            self.kept.pop()
        self.rss = prev
        return c

    def beta(self) -> np.ndarray:
        """Coefficients of the kept columns, in :attr:`kept` order."""
        r = len(self.kept)
        return solve_triangular(self.L[:r, :r].T, self.wy[:r], lower=False, check_finite=False)

    def inverse_diagonal(self) -> np.ndarray:
        r = len(self.kept)
        Linv = solve_triangular(self.L[:r, :r], np.eye(r), lower=True, check_finite=False)
        return np.einsum("ij,ij->j", Linv, Linv)


@dataclass(frozen=True)
class OlsFit:
    subset: tuple[int, ...]
    beta: dict  # column index (0 = intercept) -> coefficient
    rss: float
    n: int
    dropped: tuple[int, ...] = ()

    @property
    def sigma2(self) -> float:
        return self.rss / self.n

    def coef(self, j: int) -> float:
        return self.beta.get(j, 0.0)

    def nonzero(self, candidates: Iterable[int], zero_tol: float = ZERO_TOL) -> list[int]:
        scale = max(1.0, max((abs(v) for v in self.beta.values()), default=0.0))
        return [j for j in candidates if abs(self.beta.get(j, 0.0)) > zero_tol * scale]


def _fit_from_factor(f: Factor, subset: tuple[int, ...]) -> OlsFit:
    beta = dict(zip(f.kept, (float(v) for v in f.beta())))
    for c in f.dropped:
        beta[c] = 0.0
    return OlsFit(subset, beta, max(float(f.rss), 0.0), f.g.n, tuple(f.dropped))


def solve_subset(g: GramSystem, S: Iterable[int]) -> OlsFit:
    """Least squares of y on the intercept and the columns in S."""
    subset = tuple(sorted(set(S)))
    if subset and (subset[0] < 1 or subset[-1] > g.p):
        raise ValueError(f"subset {subset} outside 1..{g.p}")
    f = Factor(g)
    for c in subset:
        f.push(c)
    return _fit_from_factor(f, subset)


def subset_rss(g: GramSystem, S: Iterable[int]) -> float:
    f = Factor(g)
    for c in sorted(set(S)):
        f.push(c)
    return max(float(f.rss), 0.0)


def drop_one_rss(g: GramSystem, S: Iterable[int]) -> dict:
    """rss of S minus each member, keyed by the removed column."""
    subset = sorted(set(S))
    f = Factor(g)
    for c in subset:
        f.push(c)
    out = {}
    if not f.dropped and subset:
        inv = f.inverse_diagonal()
        beta = f.beta()
        for pos, c in enumerate(f.kept[1:], start=1):
            out[c] = float(f.rss) + beta[pos] ** 2 / inv[pos]
        return {c: max(v, 0.0) for c, v in out.items()}
    for c in subset:
        out[c] = subset_rss(g, (s for s in subset if s != c))
    return out


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    k: int
    clamped: bool = False


def objective(rss: float, k: int, n: int, floor: float = 1e-300) -> ObjectiveValue:
    """``n log(rss) + 2k`` with rss clamped below at ``floor``."""
    clamped = rss < floor
    return ObjectiveValue(n * math.log(max(rss, floor)) + 2 * k, k, clamped)


def subset_objective(g: GramSystem, rss: float, k: int) -> ObjectiveValue:
    return objective(rss, k, g.n, rss_floor(g))


def aic_offset(n: int) -> float:
    return 4.0 + n * (LOG_2PI - math.log(n) + 1.0)


def full_aic(obj, n: int) -> float:
    """Restore the constant dropped from the selection objective."""
    value = obj.value if isinstance(obj, ObjectiveValue) else float(obj)
    return value + aic_offset(n)


def gap_percent(upper: float, lower: float) -> float:
    if upper < lower - 1e-9:
        raise ValueError(f"upper bound {upper} below lower bound {lower}")
    if math.isinf(upper) or math.isinf(lower):
        return math.inf
    return max(upper - lower, 0.0) / max(1.0, abs(upper)) * 100.0


@dataclass
class Enumeration:
    subset: tuple[int, ...]
    objective: ObjectiveValue
    rss: float
    table: Optional[list] = None  # rows of (mask, k, rss, objective)


def enumerate_all(g: GramSystem, cap: int = ENUM_CAP, table: bool = False) -> Enumeration:
    """Evaluate every subset of 1..p by depth-first extension of one factor.

    Ties on the objective go to the smaller subset, then the
    lexicographically smallest one.
    """
    p = g.p
    if p > cap:
        raise ValueError(f"p={p} exceeds the enumeration cap {cap}")
    n = g.n
    floor = rss_floor(g)
    f = Factor(g)
    rows = [] if table else None
    best = [None]

    def visit(chosen: list[int]):
        rss = max(float(f.rss), 0.0)
        k = len(chosen)
        val = n * math.log(max(rss, floor)) + 2 * k
        if rows is not None:
            rows.append((mask_of(chosen), k, rss, val))
        key = (val, k, tuple(chosen))
        if best[0] is None or key < best[0][0]:
            best[0] = (key, rss)

    def rec(start: int, chosen: list[int]):
        visit(chosen)
        for c in range(start, p + 1):
            f.push(c)
            chosen.append(c)
            rec(c + 1, chosen)
            chosen.pop()
            f.pop()

    rec(1, [])
    (val, k, subset), rss = best[0]
    obj = objective(rss, k, n, floor)
    return Enumeration(subset, obj, rss, rows)


def write_table(path, rows: list, n: int) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mask", "k", "rss", "objective", "full_aic"])
        for mask, k, rss, val in sorted(rows):
            w.writerow([mask, k, repr(rss), repr(val), repr(val + aic_offset(n))])
