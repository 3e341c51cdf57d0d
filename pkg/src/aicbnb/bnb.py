"""Branch-and-bound over (Z1, Z0, Z) fixings of the subset-selection problem.

Each node's relaxation keeps every column of Z1 and Z free, so its bound is
``n log(rss(Z1 | Z)) + 2|Z1|``.  The z_j = 1 child has the same free set and
inherits the bound plus two without a solve.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

from . import stepwise as sw
from .branching import RULES, SolutionPool, select_default, select_most_frequent, select_strong
from .data import DependencyCollection, GramSystem
from .ols import (
    ENUM_CAP,
    ZERO_TOL,
    Factor,
    ObjectiveValue,
    OlsFit,
    aic_offset,
    full_aic,
    gap_percent,
    indices_of,
    mask_of,
    objective,
    rss_floor,
    solve_subset,
)

STATUS_OPTIMAL = "optimal"
STATUS_NODE_LIMIT = "node-limit"
STATUS_TIME_LIMIT = "time-limit"


class InvariantError(RuntimeError):
    """An internal consistency check failed."""


@dataclass(eq=False)
class NodeState:
    z1: int
    z0: int
    free: int
    depth: int = 0
    lower: float = -math.inf
    inherited: bool = False
    relax_rss: Optional[float] = None
    fit: Optional[OlsFit] = field(default=None, repr=False)

    def __post_init__(self):
        if self.z1 & self.z0 or self.z1 & self.free or self.z0 & self.free:
            raise ValueError("Z1, Z0 and Z must be disjoint")

    @classmethod
    def root(cls, p: int) -> "NodeState":
        return cls(0, 0, ((1 << p) - 1) << 1)

    @classmethod
    def from_sets(cls, Z1=(), Z0=(), Z=(), **kw) -> "NodeState":
        return cls(mask_of(Z1), mask_of(Z0), mask_of(Z), **kw)

    @property
    def Z1(self) -> list[int]:
        return indices_of(self.z1)

    @property
    def Z0(self) -> list[int]:
        return indices_of(self.z0)

    @property
    def Z(self) -> list[int]:
        return indices_of(self.free)

    def covers(self, p: int) -> bool:
        return (self.z1 | self.z0 | self.free) == ((1 << p) - 1) << 1


@dataclass(frozen=True)
class Incumbent:
    subset: tuple[int, ...]
    obj: ObjectiveValue
    rss: float
    source: str = ""

    @property
    def mask(self) -> int:
        return mask_of(self.subset)


@dataclass
class SolverConfig:
    branching: str = "auto"
    pool_size: int = 10
    stepwise_depth: int = 10
    node_limit: int = 10**9
    time_limit: float = 5000.0
    search: str = "best-first"
    prune_tol: float = 1e-9
    zero_tol: float = ZERO_TOL
    enum_cap: int = ENUM_CAP
    strong_cap: Optional[int] = None
    rank_check: str = "collection"
    prune: bool = True
    trace: bool = False

    def __post_init__(self):
        if self.branching not in RULES:
            raise ValueError(f"unknown branching rule {self.branching!r}; choose from {RULES}")
        if self.search not in ("best-first", "depth-first"):
            raise ValueError(f"unknown search order {self.search!r}")
        if self.rank_check not in ("collection", "full"):
            raise ValueError(f"unknown rank check mode {self.rank_check!r}")
        if not 1 <= self.pool_size <= 100:
            raise ValueError("pool_size must be in 1..100")
        if self.node_limit <= 0 or self.time_limit <= 0 or self.enum_cap <= 0:
            raise ValueError("limits must be positive")
        if self.stepwise_depth < -1:
            raise ValueError("stepwise_depth must be >= -1 (-1 disables stepwise)")
        if not 0.0 <= self.prune_tol <= 1e-3:
            raise ValueError("prune_tol must lie in [0, 1e-3]")
        if self.strong_cap is not None and self.strong_cap <= 0:
            raise ValueError("strong_cap must be positive")

    def to_dict(self) -> dict:
        return {
            "branching": self.branching,
            "pool_size": self.pool_size,
            "stepwise_depth": self.stepwise_depth,
            "node_limit": self.node_limit,
            "time_limit": self.time_limit,
            "search": self.search,
            "prune_tol": self.prune_tol,
            "zero_tol": self.zero_tol,
            "strong_cap": self.strong_cap,
            "rank_check": self.rank_check,
        }


@dataclass
class SolveReport:
    subset: tuple[int, ...]
    objective: float
    k: int
    full_aic: float
    lower_bound: float
    gap: float
    nodes: int
    relaxations: int
    wall_time: float
    status: str
    n: int
    rule: str = ""
    method: str = "bnb"
    clamped: bool = False
    extra: dict = field(default_factory=dict)
    trace: Optional[list] = field(default=None, repr=False)

    @property
    def lower_full_aic(self) -> float:
        return self.lower_bound + aic_offset(self.n)

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "status": self.status,
            "rule": self.rule,
            "subset": list(self.subset),
            "k": self.k,
            "objective": self.objective,
            "full_aic": self.full_aic,
            "lower_bound": self.lower_bound,
            "lower_full_aic": self.lower_full_aic,
            "gap_percent": self.gap,
            "nodes": self.nodes,
            "relaxations": self.relaxations,
            "wall_time": self.wall_time,
            "n": self.n,
            "clamped": self.clamped,
        }
        d.update(self.extra)
        return d


def relax_bound(node: NodeState, g: GramSystem) -> tuple[float, OlsFit]:
    fit = solve_subset(g, indices_of(node.z1 | node.free))
    lower = g.n * math.log(max(fit.rss, rss_floor(g))) + 2 * bin(node.z1).count("1")
    return lower, fit


def harvest_incumbent(node: NodeState, fit: OlsFit, g: GramSystem, zero_tol: float = ZERO_TOL) -> Incumbent:
    """Feasible point from the relaxation: fixed-in columns plus free columns with nonzero coefficients."""
    subset = tuple(sorted(set(node.Z1) | set(fit.nonzero(node.Z, zero_tol))))
    return Incumbent(subset, objective(fit.rss, len(subset), g.n, rss_floor(g)), fit.rss, "relaxation")


def branch(node: NodeState, j: int) -> tuple[NodeState, NodeState]:
    bit = 1 << j
    if not node.free & bit:
        raise ValueError(f"index {j} is not free at this node")
    child1 = NodeState(
        node.z1 | bit, node.z0, node.free & ~bit, node.depth + 1,
        lower=node.lower + 2, inherited=True, relax_rss=node.relax_rss, fit=node.fit,
    )
    child0 = NodeState(node.z1, node.z0 | bit, node.free & ~bit, node.depth + 1, lower=node.lower)
    return child1, child0


def apply_dependency_fixing(node: NodeState, deps: DependencyCollection) -> NodeState:
    """Fix z_q = 0 whenever the rest of a dependent set is already fixed in.

    Moving variables to Z0 never changes Z1, so a single pass reaches the
    fixed point.
    """
    fix = 0
    for D in deps.masks:
        rest = D & ~node.z1
        if rest and rest & (rest - 1) == 0 and rest & node.free:
            fix |= rest
    if not fix:
        return node
    return replace(node, z0=node.z0 | fix, free=node.free & ~fix, inherited=False, fit=None)


def rank_fixing(node: NodeState, g: GramSystem) -> NodeState:
    """Slow per-node variant: fix every free column already spanned by Z1 and the intercept."""
    f = Factor(g)
    for c in node.Z1:
        f.push(c)
    fix = 0
    for q in node.Z:
        if not f.push(q):
            fix |= 1 << q
        f.pop()
    if not fix:
        return node
    return replace(node, z0=node.z0 | fix, free=node.free & ~fix, inherited=False, fit=None)


def violates_cut(Z1, deps: DependencyCollection) -> bool:
    z1 = Z1 if isinstance(Z1, int) else mask_of(Z1)
    return any(D & z1 == D for D in deps.masks)


def resolve_rule(rule: str, deps: DependencyCollection) -> str:
    if rule == "auto":
        return "mfb" if deps else "sb"
    return rule


class _Frontier:
    def __init__(self, order: str):
        self.best_first = order == "best-first"
        self.items: list = []
        self.counter = itertools.count()

    def push(self, node: NodeState):
        if self.best_first:
            heapq.heappush(self.items, (node.lower, -node.depth, next(self.counter), node))
        else:
            self.items.append(node)

    def pop(self) -> NodeState:
        if self.best_first:
            return heapq.heappop(self.items)[-1]
        return self.items.pop()

    def min_lower(self) -> float:
        if not self.items:
            return math.inf
        if self.best_first:
            return self.items[0][0]
        return min(nd.lower for nd in self.items)

    def __len__(self):
        return len(self.items)


def solve(g: GramSystem, deps: Optional[DependencyCollection] = None, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Globally minimise ``n log(rss(S)) + 2|S|`` over subsets S of 1..p."""
    t0 = time.perf_counter()
    deps = deps if deps is not None else DependencyCollection()
    cfg = cfg or SolverConfig()
    rule = resolve_rule(cfg.branching, deps)
    n, p = g.n, g.p
    floor = rss_floor(g)
    pool = SolutionPool(cfg.pool_size)
    trace = [] if cfg.trace else None

    inc: Optional[Incumbent] = None
    nodes = relaxations = 0
    pruned_min = math.inf
    global_lower = -math.inf

    def offer(cand: Incumbent):
        nonlocal inc
        pool.add(cand.mask, cand.obj.value)
        if violates_cut(cand.mask, deps):
            return
        if inc is None or cand.obj.value < inc.obj.value - 1e-9:
            inc = cand

    def cutoff() -> float:
        if inc is None or not cfg.prune:
            return math.inf
        v = inc.obj.value
        return v - cfg.prune_tol * max(1.0, abs(v))

    def fathom(lower: float):
        nonlocal pruned_min
        pruned_min = min(pruned_min, lower)

    frontier = _Frontier(cfg.search)
    frontier.push(NodeState.root(p))
    status = STATUS_OPTIMAL

    while frontier:
        if nodes >= cfg.node_limit:
            status = STATUS_NODE_LIMIT
            break
        if time.perf_counter() - t0 > cfg.time_limit:
            status = STATUS_TIME_LIMIT
            break
        node = frontier.pop()
        if node.lower >= cutoff():
            fathom(node.lower)
            continue
        nodes += 1
        entry = {"id": nodes, "depth": node.depth} if trace is not None else None

        fixed = rank_fixing(node, g) if cfg.rank_check == "full" else node
        fixed = apply_dependency_fixing(fixed, deps)
        if violates_cut(fixed.z1, deps):
            raise InvariantError(f"node with Z1={fixed.Z1} contains a whole dependent set")
        node = fixed
        fresh = node.fit is None
        if fresh:
            lower, fit = relax_bound(node, g)
            relaxations += 1
            node.lower = max(lower, node.lower)
            node.fit = fit
            node.relax_rss = fit.rss
            node.inherited = False

        action = "branched"
        chosen = None
        if node.lower >= cutoff():
            fathom(node.lower)
            action = "pruned"
        else:
            if fresh:
                offer(harvest_incumbent(node, node.fit, g, cfg.zero_tol))
            if node.free and node.depth <= cfg.stepwise_depth:
                fw, bw = sw.run_both(g, node.Z1, node.Z)
                for res, tag in ((fw, "forward"), (bw, "backward")):
                    offer(Incumbent(res.subset, res.objective, res.rss, "stepwise-" + tag))
            if not node.free:
                action = "leaf"
            elif node.lower >= cutoff():
                fathom(node.lower)
                action = "closed"
            else:
                child0_fit = child0_lower = None
                Z = node.Z
                if rule == "sb" and (cfg.strong_cap is None or len(Z) <= cfg.strong_cap):
                    res = select_strong(node, g)
                    relaxations += res.solves
                    chosen, child0_fit, child0_lower = res.index, res.child_fit, res.child_lower
                elif rule == "mfb":
                    chosen = select_most_frequent(node, pool, node.fit)
                else:
                    chosen = select_default(node, node.fit)
                child1, child0 = branch(node, chosen)
                if child0_fit is not None:
                    child0.fit = child0_fit
                    child0.relax_rss = child0_fit.rss
                    child0.lower = max(child0_lower, node.lower)
                # best-first ties prefer the z=1 child (created first); depth-first pops it first
                children = (child1, child0) if frontier.best_first else (child0, child1)
                for child in children:
                    if violates_cut(child.z1, deps) or child.lower >= cutoff():
                        fathom(child.lower)
                    else:
                        frontier.push(child)

        if trace is not None:
            global_lower = min(frontier.min_lower(), inc.obj.value if inc else math.inf, pruned_min)
            entry.update(
                z1=node.z1, z0=node.z0, free=node.free, lower=node.lower,
                inherited=node.inherited, action=action, branch=chosen,
                incumbent=inc.obj.value if inc else None, global_lower=global_lower,
            )
            trace.append(entry)

    if inc is None:
        raise InvariantError("search finished without a feasible subset")
    upper = inc.obj.value
    if status == STATUS_OPTIMAL:
        lower = min(upper, pruned_min)
    else:
        lower = min(upper, pruned_min, frontier.min_lower())
    gap = gap_percent(upper, min(lower, upper))
    return SolveReport(
        subset=inc.subset,
        objective=upper,
        k=len(inc.subset),
        full_aic=full_aic(inc.obj, n),
        lower_bound=min(lower, upper),
        gap=gap,
        nodes=nodes,
        relaxations=relaxations,
        wall_time=time.perf_counter() - t0,
        status=status,
        n=n,
        rule=rule,
        clamped=inc.obj.clamped,
        extra={"incumbent_source": inc.source, "open_nodes": len(frontier)},
        trace=trace,
    )
