"""Branching-variable selection rules.

All selectors take a node exposing ``Z``, ``Z1`` and ``Z0`` (sorted index
lists) and return a member of ``Z``; ties always go to the smallest index.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional

from .data import GramSystem
from .ols import OlsFit, drop_one_rss, rss_floor, solve_subset

RULES = ("auto", "std", "mfb", "sb")


class SolutionPool:
    """The best ``capacity`` distinct feasible subsets seen so far, sorted by objective."""

    def __init__(self, capacity: int = 10):
        if not 1 <= capacity <= 100:
            raise ValueError(f"pool capacity must be in 1..100, got {capacity}")
        self.capacity = capacity
        self._entries: list[tuple[float, int]] = []
        self._masks: set[int] = set()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[tuple[float, int]]:
        return list(self._entries)

    def add(self, mask: int, value: float) -> bool:
        if mask in self._masks:
            return False
        if len(self._entries) >= self.capacity and value >= self._entries[-1][0]:
            return False
        bisect.insort(self._entries, (value, mask))
        self._masks.add(mask)
        if len(self._entries) > self.capacity:
            _, evicted = self._entries.pop()
            self._masks.discard(evicted)
        return True

    def scores(self, candidates) -> dict:
        return {j: sum(1 for _, m in self._entries if m >> j & 1) for j in candidates}


def _require_free(node) -> list[int]:
    Z = list(node.Z)
    if not Z:
        raise ValueError("node has no free variables to branch on")
    return Z


def select_default(node, fit: OlsFit) -> int:
    """Largest relaxation coefficient in magnitude."""
    Z = _require_free(node)
    best = Z[0]
    best_val = abs(fit.coef(best))
    for j in Z[1:]:
        v = abs(fit.coef(j))
        if v > best_val:
            best, best_val = j, v
    return best


def select_most_frequent(node, pool: SolutionPool, fit: Optional[OlsFit] = None) -> int:
    Z = _require_free(node)
    if not len(pool):
        if fit is None:
            return Z[0]
        return select_default(node, fit)
    scores = pool.scores(Z)
    top = max(scores.values())
    return min(j for j in Z if scores[j] == top)


@dataclass
class StrongResult:
    index: int
    thetas: dict  # k -> relaxation value of the z_k = 0 child
    child_fit: OlsFit
    child_lower: float
    solves: int = field(default=0)


def select_strong(node, g: GramSystem) -> StrongResult:
    """Pick the variable whose z_k = 0 child has the largest relaxation value.

    The z_k = 1 side never needs a solve: its relaxation is the node's own
    free set, so its value is the node value plus two for every k.
    """
    Z = _require_free(node)
    Z1 = list(node.Z1)
    n = g.n
    floor = rss_floor(g)
    rss = drop_one_rss(g, Z1 + Z)
    thetas = {k: n * math.log(max(rss[k], floor)) + 2 * len(Z1) for k in Z}
    top = max(thetas.values())
    J = min(k for k in Z if thetas[k] == top)
    fit = solve_subset(g, [j for j in Z1 + Z if j != J])
    lower = n * math.log(max(fit.rss, floor)) + 2 * len(Z1)
    return StrongResult(J, thetas, fit, lower, solves=len(Z) + 1)
