"""Per-cardinality best subsets and the sweeps that assemble them into an AIC optimum.

``best_subset_k`` minimises rss over subsets of a fixed size (or at most that
size) with its own branch-and-bound: a node's bound is the rss of its whole
free set, which is valid because rss never increases when columns are added.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional

from . import stepwise as sw
from .bnb import STATUS_OPTIMAL, NodeState, SolveReport, apply_dependency_fixing, violates_cut
from .data import DependencyCollection, GramSystem
from .ols import full_aic, gap_percent, indices_of, mask_of, objective, rss_floor, solve_subset, subset_rss

EXACT = "exact"
AT_MOST = "at-most"


@dataclass
class CardinalityResult:
    k: int
    eta: float
    subset: Optional[tuple[int, ...]]
    objective: float
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.subset is not None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "eta": None if math.isinf(self.eta) else self.eta,
            "subset": None if self.subset is None else list(self.subset),
            "objective": None if math.isinf(self.objective) else self.objective,
            "nodes": self.nodes,
        }


def _subset_obj(g: GramSystem, rss: float, k: int) -> float:
    return objective(rss, k, g.n, rss_floor(g)).value


def best_subset_k(
    g: GramSystem,
    deps: Optional[DependencyCollection] = None,
    k: int = 0,
    mode: str = EXACT,
    warm: Optional[tuple[tuple[int, ...], float]] = None,
) -> CardinalityResult:
    """Smallest rss over subsets with exactly ``k`` (or at most ``k``) columns.

    Subsets containing a whole dependent set are excluded; if nothing of
    the requested size survives, ``eta`` is infinite.  ``warm`` seeds the
    incumbent with a known feasible (subset, rss) pair.
    """
    p = g.p
    if not 0 <= k <= p:
        raise ValueError(f"k={k} outside 0..{p}")
    if mode not in (EXACT, AT_MOST):
        raise ValueError(f"unknown mode {mode!r}")
    deps = deps if deps is not None else DependencyCollection()
    exact = mode == EXACT

    best_rss, best_subset = math.inf, None
    if warm is not None:
        ws, wr = warm
        if len(ws) <= k and (not exact or len(ws) == k) and not violates_cut(mask_of(ws), deps):
            best_rss, best_subset = wr, tuple(sorted(ws))

    def consider(subset):
        nonlocal best_rss, best_subset
        if violates_cut(mask_of(subset), deps):
            return
        r = subset_rss(g, subset)
        if r < best_rss or (r == best_rss and best_subset is not None and tuple(subset) < best_subset):
            best_rss, best_subset = r, tuple(subset)

    counter = itertools.count()
    heap = [(-math.inf, next(counter), NodeState.root(p))]
    nodes = 0
    while heap:
        bound, _, node = heapq.heappop(heap)
        if bound >= best_rss:
            continue
        node = apply_dependency_fixing(node, deps)
        n1, nz = bin(node.z1).count("1"), bin(node.free).count("1")
        if n1 > k or (exact and n1 + nz < k) or violates_cut(node.z1, deps):
            continue
        nodes += 1
        Z1, Z = node.Z1, node.Z
        if n1 == k or not Z:
            consider(Z1)
            continue
        if exact and n1 + nz == k:
            consider(Z1 + Z)
            continue
        if not exact and n1 + nz <= k and not violates_cut(node.z1 | node.free, deps):
            consider(Z1 + Z)
            continue
        fit = solve_subset(g, Z1 + Z)
        if fit.rss >= best_rss:
            continue
        # fill to size k with the free columns carrying the largest coefficients
        ranked = sorted(Z, key=lambda j: (-abs(fit.coef(j)), j))
        consider(sorted(Z1 + ranked[: k - n1]))
        j = ranked[0]
        bit = 1 << j
        for child in (
            NodeState(node.z1 | bit, node.z0, node.free & ~bit, node.depth + 1),
            NodeState(node.z1, node.z0 | bit, node.free & ~bit, node.depth + 1),
        ):
            heapq.heappush(heap, (fit.rss, next(counter), child))

    if best_subset is None:
        return CardinalityResult(k, math.inf, None, math.inf, nodes)
    return CardinalityResult(k, best_rss, best_subset, _subset_obj(g, best_rss, len(best_subset)), nodes)


def k_cap(theta_bar: float, theta_hat: float, p: Optional[int] = None) -> int:
    """Largest cardinality an optimal subset can have given a feasible value ``theta_bar``."""
    if theta_bar < theta_hat - 1e-9:
        raise ValueError(f"feasible value {theta_bar} below the unrestricted optimum {theta_hat}")
    hi = p if p is not None else math.inf
    if math.isinf(theta_bar):
        return p if p is not None else math.inf
    return int(max(0, min(hi, math.floor((theta_bar - theta_hat) / 2 + 1e-12))))


def _report(g, best, per_k, solves, t0, method, extra=None) -> SolveReport:
    subset, value = best
    obj = objective(subset_rss(g, subset), len(subset), g.n, rss_floor(g))
    d = {"per_k": [r.to_dict() for r in per_k], "solves": solves}
    d.update(extra or {})
    return SolveReport(
        subset=tuple(subset),
        objective=obj.value,
        k=len(subset),
        full_aic=full_aic(obj, g.n),
        lower_bound=obj.value,
        gap=gap_percent(obj.value, obj.value),
        nodes=sum(r.nodes for r in per_k),
        relaxations=solves,
        wall_time=time.perf_counter() - t0,
        status=STATUS_OPTIMAL,
        n=g.n,
        method=method,
        clamped=obj.clamped,
        extra=d,
    )


def sweep_naive(g: GramSystem, deps: Optional[DependencyCollection] = None) -> SolveReport:
    """Solve every cardinality 0..p and keep the best objective."""
    t0 = time.perf_counter()
    per_k = [best_subset_k(g, deps, k, EXACT) for k in range(g.p + 1)]
    feasible = [r for r in per_k if r.feasible]
    top = min(feasible, key=lambda r: (r.objective, r.k))
    return _report(g, (top.subset, top.objective), per_k, len(per_k), t0, "naive")


def sweep_fast(
    g: GramSystem,
    deps: Optional[DependencyCollection] = None,
    mode: str = EXACT,
    seed_stepwise: bool = False,
) -> SolveReport:
    """Ascending sweep that stops once k exceeds the cardinality cap.

    ``mode='at-most'`` solves the relaxed-size problems and seeds each with
    the previous answer.  ``seed_stepwise`` starts the feasible value from a
    forward stepwise pass instead of +inf.
    """
    t0 = time.perf_counter()
    p = g.p
    theta_hat = _subset_obj(g, subset_rss(g, range(1, p + 1)), 0)
    best_subset, theta_bar = None, math.inf
    if seed_stepwise:
        fw = sw.forward(g)
        best_subset, theta_bar = fw.subset, fw.objective.value
    per_k, stopped_at = [], None
    warm = None
    for k in range(p + 1):
        if k > k_cap(theta_bar, theta_hat, p):
            stopped_at = k
            break
        res = best_subset_k(g, deps, k, mode, warm=warm)
        per_k.append(res)
        if res.feasible:
            warm = (res.subset, res.eta)
            if theta_bar >= res.objective:
                best_subset, theta_bar = res.subset, res.objective
    extra = {
        "theta_hat": theta_hat,
        "stopped_at": stopped_at,
        "cardinality_mode": mode,
        "seeded_from_stepwise": seed_stepwise,
    }
    name = "fast-le" if mode == AT_MOST else "fast-eq"
    return _report(g, (best_subset, theta_bar), per_k, len(per_k), t0, name, extra)
