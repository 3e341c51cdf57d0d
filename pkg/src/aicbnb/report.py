"""JSON report assembly and the one-line human summary."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

SCHEMA = "aicbnb.report/1"


def jsonable(obj: Any) -> Any:
    """Recursively replace non-finite floats with None and tuples with lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return jsonable(obj.item())
    return obj


def envelope(kind: str, body: dict) -> dict:
    return {"schema": SCHEMA, "kind": kind, **body}


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, allow_nan=False)


def write(report: dict, path) -> None:
    text = dumps(report)
    if str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def read(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != SCHEMA:
        raise ValueError(f"{path}: unsupported report schema {data.get('schema')!r}")
    return data


HEADER = f"{'Name':<16} {'Method':<10} {'AIC':>10} {'k':>4} {'time(s)':>9} {'gap(%)':>8} {'nodes':>9}"


def row(name: str, method: str, aic: float, k: int, seconds: float, gap, nodes) -> str:
    gap_s = "--" if gap is None else f"{gap:.2f}"
    nodes_s = "--" if nodes is None else str(nodes)
    return f"{name:<16} {method:<10} {aic:>10.2f} {k:>4d} {seconds:>9.2f} {gap_s:>8} {nodes_s:>9}"
