"""Forward-selection and backward-elimination heuristics.

Both passes minimise ``n log(rss(S)) + 2|S|`` one move at a time and stop at
the first step that fails to improve by more than ``IMPROVE_TOL``.  Inside a
branch-and-bound node the forward pass starts from the fixed-in set and the
backward pass from fixed-in plus free, so every result respects the node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .data import GramSystem
from .ols import (
    Factor,
    ObjectiveValue,
    drop_one_rss,
    full_aic,
    mask_of,
    objective,
    rss_floor,
    subset_rss,
)

IMPROVE_TOL = 1e-9


@dataclass
class StepwiseResult:
    subset: tuple[int, ...]
    rss: float
    objective: ObjectiveValue
    direction: str
    moves: list = field(default_factory=list)  # (op, index, objective after move)
    evaluations: int = 0

    @property
    def mask(self) -> int:
        return mask_of(self.subset)

    def full_aic(self, n: int) -> float:
        return full_aic(self.objective, n)


def _finish(g: GramSystem, S, direction, moves, evals) -> StepwiseResult:
    subset = tuple(sorted(S))
    rss = subset_rss(g, subset)
    return StepwiseResult(subset, rss, objective(rss, len(subset), g.n, rss_floor(g)), direction, moves, evals)


def forward(g: GramSystem, base: Iterable[int] = (), candidates: Optional[Iterable[int]] = None) -> StepwiseResult:
    n = g.n
    floor = rss_floor(g)
    S = sorted(set(base))
    pool = sorted(set(range(1, g.p + 1) if candidates is None else candidates) - set(S))
    f = Factor(g)
    for c in S:
        f.push(c)
    current = n * math.log(max(f.rss, floor)) + 2 * len(S)
    moves, evals = [], 1
    while pool:
        k = len(S) + 1
        best, best_val = None, math.inf
        for c in pool:
            val = n * math.log(max(f.trial(c), floor)) + 2 * k
            evals += 1
            if val < best_val:
                best, best_val = c, val
        if not best_val < current - IMPROVE_TOL:
            break
        f.push(best)
        S.append(best)
        pool.remove(best)
        current = best_val
        moves.append(("add", best, best_val))
    return _finish(g, S, "forward", moves, evals)


def backward(g: GramSystem, base: Iterable[int] = (), candidates: Optional[Iterable[int]] = None) -> StepwiseResult:
    n = g.n
    floor = rss_floor(g)
    fixed = set(base)
    removable = sorted(set(range(1, g.p + 1) if candidates is None else candidates) - fixed)
    S = sorted(fixed | set(removable))
    current = n * math.log(max(subset_rss(g, S), floor)) + 2 * len(S)
    moves, evals = [], 1
    while removable:
        k = len(S) - 1
        rss = drop_one_rss(g, S)
        best, best_val = None, math.inf
        for c in removable:
            val = n * math.log(max(rss[c], floor)) + 2 * k
            evals += 1
            if val < best_val:
                best, best_val = c, val
        if not best_val < current - IMPROVE_TOL:
            break
        S.remove(best)
        removable.remove(best)
        current = best_val
        moves.append(("remove", best, best_val))
    return _finish(g, S, "backward", moves, evals)


def run_both(g: GramSystem, Z1: Iterable[int], Z: Iterable[int]) -> tuple[StepwiseResult, StepwiseResult]:
    Z1, Z = list(Z1), list(Z)
    return forward(g, Z1, Z), backward(g, Z1, Z)


def stepwise_bound(node, g: GramSystem) -> StepwiseResult:
    """Better of the forward and backward passes restricted to ``node``."""
    fw, bw = run_both(g, node.Z1, node.Z)
    return fw if fw.objective.value < bw.objective.value else bw


def sw_forward(g: GramSystem) -> StepwiseResult:
    return forward(g)


def sw_backward(g: GramSystem) -> StepwiseResult:
    return backward(g)
