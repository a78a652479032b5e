"""Synthetic time series from known lagged structural causal models.

Every discovery and forecasting claim in the test suite is checked against
data generated here, where the true causal graph is known by construction.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .frame import DAILY, TimeSeriesFrame, VariableMeta
from .graph import CausalEdge, CausalGraph


@dataclass(frozen=True)
class Term:
    """One additive dependency: ``coeff * cause(t - lag)``."""

    cause: str
    lag: int
    coeff: float


@dataclass(frozen=True)
class Mechanism:
    """Structural equation for one variable.

    linear:  x_j(t) = sum(terms) + noise
    tanh:    x_j(t) = tanh(sum(terms)) + noise
    """

    effect: str
    terms: tuple[Term, ...]
    noise_std: float = 1.0
    nonlinearity: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(
            t if isinstance(t, Term) else Term(*t) for t in self.terms
        ))
        if self.nonlinearity not in ("linear", "tanh"):
            raise DataError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.noise_std < 0:
            raise DataError("noise_std must be >= 0")


@dataclass(frozen=True)
class ScmSpec:
    """A stationary lagged SCM: variables, mechanisms, seed, burn-in.

    Variables without a mechanism are driven by unit-variance noise. Lag-0
    dependencies must form a DAG; for fully linear specs the implied VAR
    companion matrix must have spectral radius < 1.
    """

    variables: tuple[str, ...]
    mechanisms: tuple[Mechanism, ...] = ()
    seed: int = 0
    burn_in: int = 200
    initial: np.ndarray | None = None  # explicit start rows; requires burn_in == 0

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        names = set(self.variables)
        if len(names) != len(self.variables):
            raise DataError("duplicate variable names")
        seen_effects = set()
        for m in self.mechanisms:
            if m.effect not in names:
                raise DataError(f"mechanism effect {m.effect!r} is not a variable")
            if m.effect in seen_effects:
                raise DataError(f"variable {m.effect!r} has more than one mechanism")
            seen_effects.add(m.effect)
            for t in m.terms:
                if t.cause not in names:
                    raise DataError(f"term cause {t.cause!r} is not a variable")
                if t.lag < 0:
                    raise DataError("term lag must be >= 0")
                if t.lag == 0 and t.cause == m.effect:
                    raise DataError(f"{m.effect!r} depends on itself at lag 0")
        if self.initial is not None and self.burn_in != 0:
            raise DataError("explicit initial rows require burn_in == 0")
        self._topo_order()  # raises on a lag-0 cycle
        if all(m.nonlinearity == "linear" for m in self.mechanisms):
            rho = self._companion_radius()
            if rho >= 1.0:
                raise DataError(f"unstable spec: companion spectral radius {rho:.4f} >= 1")

    @property
    def max_lag(self) -> int:
        return max((t.lag for m in self.mechanisms for t in m.terms), default=0)

    def _topo_order(self) -> list[int]:
        """Topological order of the lag-0 dependency graph."""
        index = {n: i for i, n in enumerate(self.variables)}
        deps = {i: set() for i in range(len(self.variables))}
        for m in self.mechanisms:
            j = index[m.effect]
            for t in m.terms:
                if t.lag == 0:
                    deps[j].add(index[t.cause])
        order, done = [], set()
        remaining = set(deps)
        while remaining:
            ready = sorted(i for i in remaining if deps[i] <= done)
            if not ready:
                raise DataError("contemporaneous (lag-0) dependencies form a cycle")
            order.extend(ready)
            done.update(ready)
            remaining -= set(ready)
        return order

    def _companion_radius(self) -> float:
        v = len(self.variables)
        p = self.max_lag
        if p == 0:
            return 0.0
        index = {n: i for i, n in enumerate(self.variables)}
        b0 = np.zeros((v, v))
        lagged = np.zeros((p, v, v))
        for m in self.mechanisms:
            j = index[m.effect]
            for t in m.terms:
                if t.lag == 0:
                    b0[j, index[t.cause]] = t.coeff
                else:
                    lagged[t.lag - 1, j, index[t.cause]] = t.coeff
        # Reduce contemporaneous structure: x_t = B0 x_t + sum B_l x_{t-l} + e
        inv = np.linalg.inv(np.eye(v) - b0)
        companion = np.zeros((v * p, v * p))
        for l in range(p):
            companion[:v, l * v:(l + 1) * v] = inv @ lagged[l]
        if p > 1:
            companion[v:, :-v] = np.eye(v * (p - 1))
        return float(np.max(np.abs(np.linalg.eigvals(companion))))

    def truth_graph(self) -> CausalGraph:
        edges = tuple(
            CausalEdge(t.cause, m.effect, t.lag, statistic=t.coeff, p_raw=0.0, p_corrected=0.0)
            for m in self.mechanisms for t in m.terms
        )
        return CausalGraph(self.variables, edges, alpha=0.0, correction="exact")


def generate(spec: ScmSpec, n: int, cadence: str = DAILY,
             start: dt.date = dt.date(2000, 1, 1)) -> tuple[TimeSeriesFrame, CausalGraph]:
    """Simulate ``n`` post-burn-in rows and return (frame, ground-truth graph)."""
    if spec.initial is None and n <= 0:
        raise DataError("n must be positive")
    v = len(spec.variables)
    index = {name: i for i, name in enumerate(spec.variables)}
    noise_std = np.ones(v)
    for m in spec.mechanisms:
        noise_std[index[m.effect]] = m.noise_std
    order = spec._topo_order()
    mech_by_var: dict[int, Mechanism] = {index[m.effect]: m for m in spec.mechanisms}

    total = spec.burn_in + n
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal((total, v)) * noise_std
    t0 = 0
    if spec.initial is not None:
        init = np.atleast_2d(np.asarray(spec.initial, dtype=np.float64))
        if init.shape[1] != v:
            raise DataError("initial rows must have one column per variable")
        t0 = init.shape[0]
        x[:t0] = init
    for t in range(t0, total):
        for j in order:
            mech = mech_by_var.get(j)
            if mech is None:
                continue
            acc = 0.0
            for term in mech.terms:
                if t - term.lag >= 0:
                    acc += term.coeff * x[t - term.lag, index[term.cause]]
            if mech.nonlinearity == "tanh":
                acc = np.tanh(acc)
            x[t, j] += acc

    x = x[spec.burn_in:]
    if cadence == DAILY:
        timestamps = tuple(start + dt.timedelta(days=i) for i in range(x.shape[0]))
    else:
        timestamps = []
        y, mo = start.year, start.month
        for _ in range(x.shape[0]):
            timestamps.append(dt.date(y, mo, 1))
            y, mo = (y + 1, 1) if mo == 12 else (y, mo + 1)
        timestamps = tuple(timestamps)
    variables = tuple(VariableMeta(name) for name in spec.variables)
    frame = TimeSeriesFrame(timestamps, cadence, variables, x)
    return frame, spec.truth_graph()


def _edge_set(graph: CausalGraph, match: str) -> set:
    out = set()
    for e in graph.edges:
        pairs = [(e.cause, e.effect)]
        if not e.oriented:
            pairs.append((e.effect, e.cause))
        for a, b in pairs:
            out.add((a, b) if match == "adjacency" else (a, b, e.lag))
    return out


def score_graph(found: CausalGraph, truth: CausalGraph,
                match: str = "adjacency") -> tuple[float, float, float]:
    """Precision/recall/F1 of ``found`` against ``truth``.

    ``adjacency`` compares directed (cause, effect) pairs ignoring lags;
    ``lag-exact`` requires the lag to match too. Unoriented lag-0 edges are
    expanded to both directions. Empty-set conventions: precision of an
    empty found set is 1, recall of an empty truth set is 1.
    """
    if match not in ("adjacency", "lag-exact"):
        raise DataError(f"unknown match mode {match!r}")
    if set(found.variables) != set(truth.variables):
        raise DataError("graphs cover different variable sets")
    f = _edge_set(found, match)
    t = _edge_set(truth, match)
    hits = len(f & t)
    precision = hits / len(f) if f else 1.0
    recall = hits / len(t) if t else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1
