"""Causal graphs over (variable, lag) pairs, with export/import helpers.

Edges are directed ``cause -> effect`` at a lag tau >= 0. Lag-0 edges come
only from contemporaneous discovery and may be unoriented, in which case the
stored (cause, effect) order is canonical (lower column index first) and the
edge is treated as adjacent in both directions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class CausalEdge:
    cause: str
    effect: str
    lag: int
    statistic: float
    p_raw: float
    p_corrected: float
    oriented: bool = True

    def __post_init__(self):
        if self.lag < 0:
            raise ValueError("lag must be >= 0")
        if self.lag == 0 and self.cause == self.effect:
            raise ValueError("self-edge at lag 0 is not allowed")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.cause, self.effect, self.lag)


@dataclass(frozen=True)
class CausalGraph:
    """Discovered edges plus the significance setup that produced them."""

    variables: tuple[str, ...]
    edges: tuple[CausalEdge, ...]
    alpha: float
    correction: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        edges = tuple(sorted(self.edges, key=lambda e: (e.cause, e.effect, e.lag)))
        keys = [e.key for e in edges]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (cause, effect, lag) edge")
        known = set(self.variables)
        for e in edges:
            if e.cause not in known or e.effect not in known:
                raise ValueError(f"edge {e.key} references unknown variable")
            if e.p_corrected > self.alpha:
                raise ValueError(f"edge {e.key} retained with corrected p {e.p_corrected} > alpha {self.alpha}")
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edges_into(self, target: str) -> list[CausalEdge]:
        """Edges pointing at ``target``; unoriented lag-0 edges count from either end."""
        out = []
        for e in self.edges:
            if e.effect == target:
                out.append(e)
            elif not e.oriented and e.cause == target:
                out.append(e)
        return out


def feature_select(graph: CausalGraph, target: str) -> list[str]:
    """Variables with at least one edge into ``target``, plus the target itself.

    Order follows the graph's variable (frame column) order.
    """
    if target not in graph.variables:
        raise DataError(f"unknown target {target!r}; graph has {', '.join(graph.variables)}")
    causes = set()
    for e in graph.edges_into(target):
        causes.add(e.cause if e.effect == target else e.effect)
    causes.discard(target)
    return [v for v in graph.variables if v in causes or v == target]


def benjamini_hochberg(p_values: np.ndarray) -> np.ndarray:
    """Benjamini-Hochberg corrected p-values (monotone, each >= raw, capped at 1)."""
    p = np.asarray(p_values, dtype=np.float64)
    n = p.size
    if n == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ranked = p[order] * n / np.arange(1, n + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty_like(p)
    out[order] = np.minimum(adjusted, 1.0)
    return out


def correct_pvalues(p_values: np.ndarray, method: str) -> np.ndarray:
    if method == "none":
        return np.asarray(p_values, dtype=np.float64).copy()
    if method == "benjamini-hochberg":
        return benjamini_hochberg(p_values)
    raise DataError(f"unknown correction method {method!r}")


# -- serialization -----------------------------------------------------------


def write_edge_list(graph: CausalGraph, path, include_oriented: bool = False) -> None:
    """Write the deterministic edge-list text format.

    First line is a ``#`` header carrying alpha and the correction tag; the
    second is a CSV header; rows are sorted by (cause, effect, lag).
    """
    cols = ["cause", "effect", "lag", "statistic", "p_raw", "p_corrected"]
    if include_oriented:
        cols.append("oriented")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# alpha={graph.alpha!r} correction={graph.correction}\n")
        fh.write(f"# variables={';'.join(graph.variables)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for e in graph.edges:
            row = [e.cause, e.effect, str(e.lag), repr(e.statistic), repr(e.p_raw), repr(e.p_corrected)]
            if include_oriented:
                row.append(str(e.oriented).lower())
            writer.writerow(row)


def read_edge_list(path) -> CausalGraph:
    with open(path, encoding="utf-8") as fh:
        raw = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if len(raw) < 3 or not raw[0].startswith("# alpha=") or not raw[1].startswith("# variables="):
        raise DataError(f"{path}: not an edge-list file")
    alpha_part, correction_part = raw[0][2:].split(" correction=")
    alpha = float(alpha_part.split("=", 1)[1])
    var_part = raw[1][len("# variables="):]
    variables = tuple(var_part.split(";")) if var_part else ()
    rows = list(csv.reader(raw[2:]))
    header = rows[0]
    edges = []
    for cells in rows[1:]:
        rec = dict(zip(header, cells))
        edges.append(CausalEdge(
            cause=rec["cause"],
            effect=rec["effect"],
            lag=int(rec["lag"]),
            statistic=float(rec["statistic"]),
            p_raw=float(rec["p_raw"]),
            p_corrected=float(rec["p_corrected"]),
            oriented=rec.get("oriented", "true") == "true",
        ))
    return CausalGraph(variables, tuple(edges), alpha, correction_part)


def adjacency_summary(graph: CausalGraph) -> dict:
    """JSON-ready summary keyed by effect variable."""
    by_effect: dict[str, list] = {v: [] for v in graph.variables}
    for e in graph.edges:
        by_effect[e.effect].append({
            "cause": e.cause,
            "lag": e.lag,
            "statistic": float(e.statistic),
            "p_raw": float(e.p_raw),
            "p_corrected": float(e.p_corrected),
            "oriented": e.oriented,
        })
    return {
        "alpha": graph.alpha,
        "correction": graph.correction,
        "variables": list(graph.variables),
        "by_effect": by_effect,
    }
