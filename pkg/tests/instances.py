"""Random problem generators and brute-force oracles shared by the tests.

The oracles work on raw rows with numpy's dense least squares, never on the
Gram system, so they stay independent of the code they check.
"""

import itertools
import math

import numpy as np

from aicbnb import data


def random_instance(seed, n=None, p=None, dependent=False, signal=0.5):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 61)) if n is None else n
    p = int(rng.integers(4, 15)) if p is None else p
    X = rng.normal(size=(n, p))
    if dependent:
        inject_dependencies(X, rng)
    beta = rng.normal(size=p) * (rng.random(p) < signal)
    y = X @ beta + rng.normal(size=n)
    return data.from_arrays(X, y)


def inject_dependencies(X, rng):
    """Overwrite one to three columns with exact combinations of others."""
    n, p = X.shape
    kinds = rng.permutation(3)[: int(rng.integers(1, 4))]
    targets = rng.choice(np.arange(1, p), size=len(kinds), replace=False)
    for kind, t in zip(kinds, targets):
        src = rng.choice(t, size=min(t, 2), replace=False)
        if kind == 0:
            X[:, t] = X[:, src[0]]
        elif kind == 1:
            X[:, t] = X[:, src].sum(axis=1) + 1.5
        else:
            X[:, t] = 2.0 * X[:, src[0]] - 0.5 * X[:, src[-1]]
    return X


def prepared(d, standardize=True):
    if standardize:
        d = data.standardize(d)
    return d, data.build_gram(d), data.find_dependencies(d)


def dense_rss(d, subset):
    A = np.column_stack([np.ones(d.n)] + [d.column(j) for j in sorted(subset)])
    beta, *_ = np.linalg.lstsq(A, d.response, rcond=None)
    r = d.response - A @ beta
    return float(r @ r)


def floor_of(d):
    return max(1e-12 * float(d.response @ d.response), 1e-300)


def dense_objective(d, subset):
    return d.n * math.log(max(dense_rss(d, subset), floor_of(d))) + 2 * len(subset)


def all_subsets(p):
    for k in range(p + 1):
        yield from itertools.combinations(range(1, p + 1), k)


def dense_table(d):
    """mask -> objective for every subset, computed row-wise."""
    out = {}
    for S in all_subsets(d.p):
        m = 0
        for j in S:
            m |= 1 << j
        out[m] = dense_objective(d, S)
    return out


def completion_min(table, z1, z0, free):
    best = math.inf
    for m, v in table.items():
        if m & z1 == z1 and not m & z0 and not m & ~(z1 | free):
            best = min(best, v)
    return best


def acceptance_family(count=60, seed0=1000):
    """n in [20, 60], p in [4, 14], every third instance with exact dependencies."""
    return [random_instance(seed0 + i, dependent=(i % 3 == 0)) for i in range(count)]
