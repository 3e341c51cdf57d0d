"""Command-line front end.

Exit codes: 0 success (a run that hit a limit still succeeds), 1 usage or
configuration error, 2 input/output error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import mean

from . import __version__
from . import cardinality as ca
from . import ols, report
from . import stepwise as sw
from .bnb import InvariantError, SolverConfig, solve
from .data import DataError, build_gram, find_dependencies, load_csv, standardize

log = logging.getLogger("aicbnb")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Problem:
    """A loaded dataset with its Gram system and dependency collection."""

    def __init__(self, path, response=None, raw=False):
        self.path = str(path)
        self.raw_data = load_csv(path, response)
        self.data = self.raw_data if raw else standardize(self.raw_data)
        self.gram = build_gram(self.data)
        self.deps = find_dependencies(self.data)
        self.name = Path(path).stem

    def names(self, subset):
        return [self.data.names[j - 1] for j in subset]

    def meta(self) -> dict:
        s = self.data.standardization
        return {
            "dataset": {
                "path": self.path,
                "name": self.name,
                "n": self.data.n,
                "p": self.data.p,
                "response": self.data.response_name,
                "predictors": list(self.data.predictor_names),
            },
            "standardization": s.to_dict() if s else {"convention": "none (raw data)"},
            "constant_columns": list(self.data.constant_columns),
            "dependencies": self.deps.to_list(),
            "aic_constant": ols.aic_offset(self.data.n),
            "tolerances": {
                "pivot": ols.PIVOT_TOL,
                "rss_floor_relative": 1e-12,
                "dependency": 1e-8,
                "alpha_zero": 1e-10,
            },
        }


def _add_data_args(p):
    p.add_argument("path", help="CSV file with a header row")
    p.add_argument("--response", default=None, help="response column name or 0-based index (default: last)")
    p.add_argument("--raw", action="store_true", help="skip standardization")
    p.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aicbnb", description="Exact AIC best-subset selection by branch-and-bound.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="branch-and-bound solve")
    _add_data_args(p)
    _add_solver_args(p)
    p.add_argument("--trace", metavar="PATH", help="write one JSON line per visited node")
    p.add_argument("--enumerate-check", action="store_true", help="cross-check against full enumeration")

    p = sub.add_parser("stepwise", help="forward/backward stepwise baselines")
    _add_data_args(p)
    p.add_argument("--direction", choices=("forward", "backward", "both"), default="both")

    p = sub.add_parser("cardinality", help="per-cardinality sweeps")
    _add_data_args(p)
    p.add_argument("--mode", choices=("naive", "fast-eq", "fast-le"), default="fast-eq")
    p.add_argument("--seed-stepwise", action="store_true", help="start the fast sweep from a forward stepwise value")
    p.add_argument("--table", metavar="PATH", help="write the per-k table as CSV")

    p = sub.add_parser("enumerate", help="brute-force all 2^p subsets")
    _add_data_args(p)
    p.add_argument("--cap", type=int, default=ols.ENUM_CAP)
    p.add_argument("--full-table", metavar="PATH", help="write every subset as a CSV row")

    p = sub.add_parser("bench", help="compare branching rules over a manifest of datasets")
    p.add_argument("manifest", help="JSON manifest: {'datasets': [{'path', 'response', 'name'}]}")
    p.add_argument("--rules", default="std,mfb,sb")
    p.add_argument("--time-limit", type=float, default=5000.0)
    p.add_argument("--node-limit", type=int, default=10**9)
    p.add_argument("--raw", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", metavar="PATH")
    return parser


def _add_solver_args(p):
    p.add_argument("--branching", choices=("auto", "std", "mfb", "sb"), default="auto")
    p.add_argument("--pool-size", type=int, default=10)
    p.add_argument("--stepwise-depth", type=int, default=10)
    p.add_argument("--time-limit", type=float, default=5000.0)
    p.add_argument("--node-limit", type=int, default=10**9)
    p.add_argument("--search", choices=("best-first", "depth-first"), default="best-first")
    p.add_argument("--strong-cap", type=int, default=None)
    p.add_argument("--rank-check", choices=("collection", "full"), default="collection")


def _config(args, **over) -> SolverConfig:
    try:
        return SolverConfig(
            branching=over.get("branching", getattr(args, "branching", "auto")),
            pool_size=getattr(args, "pool_size", 10),
            stepwise_depth=getattr(args, "stepwise_depth", 10),
            time_limit=args.time_limit,
            node_limit=args.node_limit,
            search=getattr(args, "search", "best-first"),
            strong_cap=getattr(args, "strong_cap", None),
            rank_check=getattr(args, "rank_check", "collection"),
            trace=over.get("trace", False),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(args, body: dict, kind: str) -> dict:
    doc = report.envelope(kind, body)
    if getattr(args, "json", None):
        report.write(doc, args.json)
    return doc


def cmd_solve(args) -> int:
    cfg = _config(args, trace=bool(args.trace))
    prob = Problem(args.path, args.response, args.raw)
    rep = solve(prob.gram, prob.deps, cfg)
    body = rep.to_dict()
    body.update(prob.meta())
    body["selected"] = prob.names(rep.subset)
    body["config"] = cfg.to_dict()
    code = EXIT_OK
    if args.enumerate_check:
        e = ols.enumerate_all(prob.gram, cap=cfg.enum_cap)
        ok = abs(e.objective.value - rep.objective) <= 1e-6 or rep.status != "optimal"
        body["enumerate_check"] = {
            "status": "ok" if ok else "mismatch",
            "oracle_subset": list(e.subset),
            "oracle_objective": e.objective.value,
        }
        if not ok:
            code = EXIT_INTERNAL
    if args.trace:
        with open(args.trace, "w") as fh:
            for entry in rep.trace:
                fh.write(json.dumps(report.jsonable(entry)) + "\n")
    _emit(args, body, "solve")
    print(report.HEADER)
    print(report.row(prob.name, f"MINLP/{rep.rule}", rep.full_aic, rep.k, rep.wall_time, rep.gap, rep.nodes))
    print(f"status: {rep.status}; selected: {', '.join(body['selected']) or '(none)'}")
    if args.enumerate_check:
        print(f"enumerate-check: {body['enumerate_check']['status']}")
    return code


def _stepwise_body(res, n, names) -> dict:
    return {
        "direction": res.direction,
        "subset": list(res.subset),
        "selected": names(res.subset),
        "k": len(res.subset),
        "rss": res.rss,
        "objective": res.objective.value,
        "full_aic": res.full_aic(n),
        "evaluations": res.evaluations,
        "moves": [{"op": op, "index": j, "objective": v} for op, j, v in res.moves],
    }


def cmd_stepwise(args) -> int:
    import time

    prob = Problem(args.path, args.response, args.raw)
    runs = {"forward": [sw.sw_forward], "backward": [sw.sw_backward], "both": [sw.sw_forward, sw.sw_backward]}
    body = {"runs": []}
    print(report.HEADER)
    for fn in runs[args.direction]:
        t0 = time.perf_counter()
        res = fn(prob.gram)
        dt = time.perf_counter() - t0
        b = _stepwise_body(res, prob.data.n, prob.names)
        b["wall_time"] = dt
        body["runs"].append(b)
        label = "SW+" if res.direction == "forward" else "SW-"
        print(report.row(prob.name, label, b["full_aic"], b["k"], dt, None, None))
        for m in b["moves"]:
            print(f"  {m['op']:<6} {prob.data.names[m['index'] - 1]:<20} objective {m['objective']:.4f}")
    body.update(prob.meta())
    _emit(args, body, "stepwise")
    return EXIT_OK


def cmd_cardinality(args) -> int:
    prob = Problem(args.path, args.response, args.raw)
    if args.mode == "naive":
        rep = ca.sweep_naive(prob.gram, prob.deps)
    else:
        mode = ca.AT_MOST if args.mode == "fast-le" else ca.EXACT
        rep = ca.sweep_fast(prob.gram, prob.deps, mode, seed_stepwise=args.seed_stepwise)
    body = rep.to_dict()
    body.update(prob.meta())
    body["selected"] = prob.names(rep.subset)
    if args.table:
        import csv

        with open(args.table, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "eta", "objective", "nodes"])
            for r in rep.extra["per_k"]:
                w.writerow([r["k"], r["eta"], r["objective"], r["nodes"]])
    _emit(args, body, "cardinality")
    print(report.HEADER)
    print(report.row(prob.name, rep.method, rep.full_aic, rep.k, rep.wall_time, rep.gap, None))
    print(f"per-k solves: {rep.extra['solves']}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    import time

    prob = Problem(args.path, args.response, args.raw)
    t0 = time.perf_counter()
    try:
        e = ols.enumerate_all(prob.gram, cap=args.cap, table=bool(args.full_table))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dt = time.perf_counter() - t0
    if args.full_table:
        ols.write_table(args.full_table, e.table, prob.data.n)
    body = {
        "subset": list(e.subset),
        "selected": prob.names(e.subset),
        "k": len(e.subset),
        "rss": e.rss,
        "objective": e.objective.value,
        "full_aic": ols.full_aic(e.objective, prob.data.n),
        "subsets_evaluated": 2 ** prob.data.p,
        "wall_time": dt,
    }
    body.update(prob.meta())
    _emit(args, body, "enumerate")
    print(report.HEADER)
    print(report.row(prob.name, "enumerate", body["full_aic"], body["k"], dt, 0.0, 2 ** prob.data.p))
    return EXIT_OK


def _bench_cell(item, rule, time_limit, node_limit, raw) -> dict:
    cell = {"name": item["name"], "rule": rule}
    try:
        prob = Problem(item["path"], item.get("response"), raw)
        cfg = SolverConfig(branching=rule, time_limit=time_limit, node_limit=node_limit)
        rep = solve(prob.gram, prob.deps, cfg)
        cell.update(
            status=rep.status, full_aic=rep.full_aic, k=rep.k, wall_time=rep.wall_time,
            nodes=rep.nodes, gap_percent=rep.gap, dependent=bool(prob.deps),
        )
    except Exception as exc:  # one bad dataset must not stop the batch
        cell.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return cell


def _read_manifest(path) -> list[dict]:
    path = Path(path)
    doc = json.loads(path.read_text())
    items = doc["datasets"] if isinstance(doc, dict) else doc
    out = []
    for it in items:
        if isinstance(it, str):
            it = {"path": it}
        p = Path(it["path"])
        if not p.is_absolute():
            p = path.parent / p
        out.append({"path": str(p), "response": it.get("response"), "name": it.get("name", p.stem)})
    return out


def cmd_bench(args) -> int:
    try:
        items = _read_manifest(args.manifest)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad manifest: {exc}") from None
    rules = [r.strip() for r in args.rules.split(",") if r.strip()]
    for r in rules:
        if r not in ("auto", "std", "mfb", "sb"):
            raise UsageError(f"unknown rule {r!r}")
    jobs = [(it, r) for it in items for r in rules]
    call = [(it, r, args.time_limit, args.node_limit, args.raw) for it, r in jobs]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            cells = list(ex.map(_bench_cell, *zip(*call)))
    else:
        cells = [_bench_cell(*c) for c in call]
    summary = {}
    for r in rules:
        ok = [c for c in cells if c["rule"] == r and c["status"] != "error"]
        summary[r] = {
            "mean_nodes": mean(c["nodes"] for c in ok) if ok else None,
            "mean_time": mean(c["wall_time"] for c in ok) if ok else None,
            "solved": sum(c["status"] == "optimal" for c in ok),
        }
    body = {"cells": cells, "summary": summary, "rules": rules}
    _emit(args, body, "bench")
    print(report.HEADER)
    for c in cells:
        if c["status"] == "error":
            print(f"{c['name']:<16} {c['rule']:<10} error: {c['error']}")
        else:
            print(report.row(c["name"], c["rule"], c["full_aic"], c["k"], c["wall_time"], c["gap_percent"], c["nodes"]))
    for r, s in summary.items():
        mn = "--" if s["mean_nodes"] is None else f"{s['mean_nodes']:.1f}"
        print(f"mean nodes [{r}]: {mn}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "stepwise": cmd_stepwise,
    "cardinality": cmd_cardinality,
    "enumerate": cmd_enumerate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"aicbnb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DataError) as exc:
        print(f"aicbnb: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"aicbnb: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
