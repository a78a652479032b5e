"""Constraint-based causal discovery for autocorrelated time series.

Three phases, mirroring the structure of PC-style discovery adapted to
lagged data:

1. pc1_lagged_parents: per effect variable, iteratively prune the lagged
   candidate space (tau in [1, tau_max]) with partial-correlation tests,
   conditioning on the strongest surviving candidates.
2. mci_prune: retest every surviving link conditioning on both the effect's
   parents and the (time-shifted) cause's parents, which removes indirect
   paths that the first phase lets through.
3. contemporaneous_phase: test lag-0 pairs given both sides' lagged
   parents; orient only where a collider check against lagged parents is
   unambiguous, otherwise leave the link bidirected.

The conditional-independence primitive is linear partial correlation with a
Fisher-z p-value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import special

from .errors import DataError
from .frame import TimeSeriesFrame
from .graph import CausalEdge, CausalGraph

_DEGENERATE_RESID = 1e-12


@dataclass(frozen=True)
class CiTestResult:
    """Partial correlation, its Fisher-z p-value, and the test's bookkeeping."""

    r: float
    n_eff: int
    n_conds: int
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class LaggedVariable:
    var: int
    lag: int


@dataclass(frozen=True)
class ParentCandidate:
    var: int
    lag: int
    statistic: float  # signed r of the weakest test the link survived


@dataclass(frozen=True)
class ParentSet:
    """Surviving lagged parent candidates per effect variable.

    Lists are ordered strongest-first (|statistic| descending, then variable
    index and lag ascending); this order drives condition-set construction.
    """

    tau_max: int
    parents: dict[int, tuple[ParentCandidate, ...]]

    def for_var(self, j: int) -> tuple[ParentCandidate, ...]:
        return self.parents.get(j, ())


def _residualize(x: np.ndarray, z: np.ndarray | None) -> np.ndarray:
    design = np.ones((x.shape[0], 1)) if z is None or z.shape[1] == 0 \
        else np.column_stack([np.ones(x.shape[0]), z])
    coef, _, _, _ = scipy.linalg.lstsq(design, x, lapack_driver="gelsy")
    return x - design @ coef


def _parcorr(x: np.ndarray, y: np.ndarray, z: np.ndarray | None) -> tuple[float, bool]:
    n = x.shape[0]
    k = 0 if z is None else z.shape[1]
    if y.shape[0] != n or (z is not None and z.shape[0] != n):
        raise ValueError("x, y, and conditioning columns must have equal length")
    if n <= k + 3:
        raise DataError(f"need n > |Z| + 3, got n={n}, |Z|={k}")
    rx = _residualize(x, z)
    ry = _residualize(y, z)
    nx = float(np.linalg.norm(rx))
    ny = float(np.linalg.norm(ry))
    scale_x = max(float(np.linalg.norm(x)), 1.0)
    scale_y = max(float(np.linalg.norm(y)), 1.0)
    if nx <= _DEGENERATE_RESID * scale_x or ny <= _DEGENERATE_RESID * scale_y:
        return 0.0, True
    r = float(np.dot(rx, ry) / (nx * ny))
    return min(1.0, max(-1.0, r)), False


def parcorr(x: np.ndarray, y: np.ndarray, z: np.ndarray | None = None) -> float:
    """Partial correlation of x and y given the columns of z.

    Both series are residualized on [1, z] by least squares; the result is
    the Pearson correlation of the residuals. A numerically zero residual on
    either side is degenerate and reported as 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = None if z is None else np.atleast_2d(np.asarray(z, dtype=np.float64).T).T
    r, _ = _parcorr(x, y, z)
    return r


def ci_pvalue(r: float, n: int, k: int) -> float:
    """Two-sided Fisher-z p-value for a partial correlation.

    z = sqrt(n - k - 3) * artanh(r), compared to the standard normal.
    """
    if n - k - 3 <= 0:
        raise DataError(f"insufficient effective sample: n={n}, k={k}")
    if abs(r) >= 1.0:
        return 0.0
    z = np.sqrt(n - k - 3) * np.arctanh(r)
    return float(special.erfc(abs(z) / np.sqrt(2.0)))


def ci_test(x: np.ndarray, y: np.ndarray, z: np.ndarray | None = None) -> CiTestResult:
    """Run the full ParCorr + Fisher-z conditional independence test."""
    n = x.shape[0]
    k = 0 if z is None else z.shape[1]
    r, degenerate = _parcorr(x, y, z)
    if degenerate:
        return CiTestResult(0.0, n, k, 1.0, degenerate=True)
    return CiTestResult(r, n, k, ci_pvalue(r, n, k))


# -- lagged data access ------------------------------------------------------


def _lagged(values: np.ndarray, var: int, lag: int, t0: int) -> np.ndarray:
    """Column ``var`` at time t - lag, for t in [t0, N). Requires lag <= t0."""
    n = values.shape[0]
    return values[t0 - lag: n - lag, var]


def _cond_matrix(values: np.ndarray, nodes: list[tuple[int, int]], t0: int) -> np.ndarray | None:
    if not nodes:
        return None
    return np.column_stack([_lagged(values, i, lag, t0) for i, lag in nodes])


def _check_frame(frame: TimeSeriesFrame, tau_max: int) -> None:
    if frame.mask.any():
        raise DataError("discovery requires an imputed frame")
    if tau_max < 0:
        raise DataError("tau_max must be >= 0")
    if tau_max >= 1 and frame.n_rows <= frame.n_vars * tau_max:
        raise DataError(
            f"N={frame.n_rows} too short for V={frame.n_vars}, tau_max={tau_max}"
        )


# -- phase 1: lagged condition selection --------------------------------------


def pc1_lagged_parents(frame: TimeSeriesFrame, tau_max: int, alpha_pc: float = 0.2,
                       max_conds: int | None = None) -> ParentSet:
    """Iterative lagged-parent screening (PC1) for every variable.

    For each effect j the candidate space is every (variable, lag) with lag
    in [1, tau_max]. Pass q tests each candidate conditioned on the q
    strongest other survivors; candidates with p > alpha_pc are dropped after
    the pass (removals are applied between passes, so results do not depend
    on within-pass order). Iteration stops when the surviving set is too
    small to supply q conditions.
    """
    _check_frame(frame, tau_max)
    values = frame.values
    v = frame.n_vars
    t0 = tau_max
    n_eff = frame.n_rows - t0
    all_parents: dict[int, tuple[ParentCandidate, ...]] = {}

    for j in range(v):
        candidates = [(i, tau) for tau in range(1, tau_max + 1) for i in range(v)]
        # min |r| across passes, with its signed value; drives the ordering
        strength: dict[tuple[int, int], tuple[float, float]] = {}
        y = _lagged(values, j, 0, t0)

        q = 0
        while candidates:
            if q > 0 and len(candidates) - 1 < q:
                break
            if max_conds is not None and q > max_conds:
                break
            if n_eff - q - 3 <= 0:
                break
            removed = set()
            for cand in candidates:
                conds = [c for c in candidates if c != cand][:q]
                res = ci_test(
                    _lagged(values, cand[0], cand[1], t0), y,
                    _cond_matrix(values, conds, t0),
                )
                prev = strength.get(cand)
                if prev is None or abs(res.r) < prev[0]:
                    strength[cand] = (abs(res.r), res.r)
                if res.p_value > alpha_pc:
                    removed.add(cand)
            candidates = [c for c in candidates if c not in removed]
            candidates.sort(key=lambda c: (-strength[c][0], c[0], c[1]))
            q += 1

        all_parents[j] = tuple(
            ParentCandidate(i, tau, strength[(i, tau)][1]) for i, tau in candidates
        )
    return ParentSet(tau_max, all_parents)


# -- phase 2: momentary conditional independence ------------------------------


def mci_prune(frame: TimeSeriesFrame, parents: ParentSet, tau_max: int,
              alpha: float = 0.01) -> CausalGraph:
    """MCI retest of each surviving lagged link.

    The test for (i, tau) -> j conditions on parents(j) minus the link plus
    parents(i) shifted back by tau; links with p <= alpha are kept as edges.
    """
    _check_frame(frame, tau_max)
    values = frame.values
    t0 = 2 * tau_max  # shifted cause-side conditions can reach back this far
    if frame.n_rows - t0 < 8:
        raise DataError(f"N={frame.n_rows} too short for MCI at tau_max={tau_max}")
    edges = []
    for j in range(frame.n_vars):
        y = _lagged(values, j, 0, t0)
        for cand in parents.for_var(j):
            conds = [(p.var, p.lag) for p in parents.for_var(j)
                     if (p.var, p.lag) != (cand.var, cand.lag)]
            for p in parents.for_var(cand.var):
                node = (p.var, p.lag + cand.lag)
                if node not in conds:
                    conds.append(node)
            res = ci_test(
                _lagged(values, cand.var, cand.lag, t0), y,
                _cond_matrix(values, conds, t0),
            )
            if not res.degenerate and res.p_value <= alpha:
                edges.append(CausalEdge(
                    cause=frame.names[cand.var],
                    effect=frame.names[j],
                    lag=cand.lag,
                    statistic=res.r,
                    p_raw=res.p_value,
                    p_corrected=res.p_value,
                ))
    return CausalGraph(frame.names, tuple(edges), alpha, correction="none")


# -- phase 3: contemporaneous links -------------------------------------------


def _lagged_parents_from(graph: CausalGraph, names: tuple[str, ...]) -> dict[int, list[tuple[int, int]]]:
    index = {n: i for i, n in enumerate(names)}
    out: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(names))}
    for e in graph.edges:
        if e.lag >= 1:
            out[index[e.effect]].append((index[e.cause], e.lag))
    for lst in out.values():
        lst.sort()
    return out


def contemporaneous_phase(frame: TimeSeriesFrame, graph: CausalGraph,
                          alpha: float = 0.01) -> CausalGraph:
    """Add lag-0 links between variables still dependent given lagged parents.

    Each unordered pair is tested conditioning on the union of both sides'
    discovered lagged parents. A significant pair is oriented only when every
    applicable collider check against a lagged parent agrees; otherwise the
    edge is stored unoriented in canonical (column-order) direction.
    """
    if frame.mask.any():
        raise DataError("discovery requires an imputed frame")
    values = frame.values
    names = frame.names
    v = frame.n_vars
    par = _lagged_parents_from(graph, names)
    max_lag = max((lag for lst in par.values() for _, lag in lst), default=0)
    t0 = max_lag
    n_eff = frame.n_rows - t0

    def test(a_node: tuple[int, int], b_node: tuple[int, int],
             conds: list[tuple[int, int]]) -> CiTestResult:
        conds = [c for c in dict.fromkeys(conds) if c != a_node and c != b_node]
        if n_eff - len(conds) - 3 <= 0:
            raise DataError("insufficient sample for contemporaneous test")
        return ci_test(
            _lagged(values, a_node[0], a_node[1], t0),
            _lagged(values, b_node[0], b_node[1], t0),
            _cond_matrix(values, conds, t0),
        )

    new_edges = list(graph.edges)
    lagged_adjacent = {(e.cause, e.effect) for e in graph.edges}
    for a in range(v):
        for b in range(a + 1, v):
            res = test((a, 0), (b, 0), par[a] + par[b])
            if res.degenerate or res.p_value > alpha:
                continue
            direction = _orient(values, t0, n_eff, a, b, par, names, lagged_adjacent, alpha)
            if direction is None:
                cause, effect, oriented = names[a], names[b], False
            else:
                cause, effect = direction
                oriented = True
            new_edges.append(CausalEdge(
                cause=cause, effect=effect, lag=0,
                statistic=res.r, p_raw=res.p_value, p_corrected=res.p_value,
                oriented=oriented,
            ))
    return CausalGraph(names, tuple(new_edges), max(graph.alpha, alpha), graph.correction)


def _orient(values, t0, n_eff, a, b, par, names, lagged_adjacent, alpha):
    """Collider check for the lag-0 pair (a, b); returns (cause, effect) names or None.

    For a lagged parent (i, tau) of a that is not also a lagged cause of b,
    the unshielded triple i -> a o-o b is a collider at a exactly when i and
    b separate without conditioning on a, which orients b -> a. If they
    separate only once a joins the conditioning set, a is a non-collider and
    the edge points a -> b. Conflicting or inconclusive votes leave the edge
    unoriented.
    """

    def votes_for(side: int, other: int) -> set[str]:
        found = set()
        for i, tau in par[side]:
            if i == other or (names[i], names[other]) in lagged_adjacent:
                continue
            conds = [c for c in par[other] if c != (i, tau)]
            if n_eff - (len(conds) + 1) - 3 <= 0:
                continue
            base = ci_test(
                _lagged(values, i, tau, t0), _lagged(values, other, 0, t0),
                _cond_matrix(values, conds, t0),
            )
            if base.degenerate:
                continue
            if base.p_value > alpha:
                found.add("into_side")  # collider at `side`: other -> side
                continue
            with_mid = ci_test(
                _lagged(values, i, tau, t0), _lagged(values, other, 0, t0),
                _cond_matrix(values, conds + [(side, 0)], t0),
            )
            if not with_mid.degenerate and with_mid.p_value > alpha:
                found.add("out_of_side")  # non-collider: side -> other
        return found

    votes = set()
    for v_ in votes_for(a, b):
        votes.add((names[b], names[a]) if v_ == "into_side" else (names[a], names[b]))
    for v_ in votes_for(b, a):
        votes.add((names[a], names[b]) if v_ == "into_side" else (names[b], names[a]))
    if len(votes) == 1:
        return votes.pop()
    return None


def pcmciplus_run(frame: TimeSeriesFrame, tau_max: int, alpha_pc: float = 0.2,
                  alpha_mci: float = 0.01, contemporaneous: bool = True,
                  max_conds: int | None = None) -> CausalGraph:
    """Full pipeline: lagged screening, MCI pruning, contemporaneous phase.

    Deterministic given the frame and parameters.
    """
    parents = pc1_lagged_parents(frame, tau_max, alpha_pc, max_conds)
    graph = mci_prune(frame, parents, tau_max, alpha_mci)
    if contemporaneous and frame.n_vars > 1:
        graph = contemporaneous_phase(frame, graph, alpha_mci)
    return graph
