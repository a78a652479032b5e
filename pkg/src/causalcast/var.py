"""Vector autoregression fitting and multivariate (conditional) Granger causality.

The Granger test compares, for one effect equation of a joint VAR, the full
regression on p lags of every variable against a restricted regression that
omits all p lags of the candidate cause, conditioning on everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import DataError, NumericalError
from .frame import TimeSeriesFrame
from .graph import CausalEdge, CausalGraph, correct_pvalues


def _lstsq(design: np.ndarray, response: np.ndarray) -> np.ndarray:
    """QR-based least squares; rejects rank-deficient designs."""
    coef, _, rank, _ = scipy.linalg.lstsq(design, response, lapack_driver="gelsy")
    if rank < design.shape[1]:
        raise NumericalError(
            f"rank-deficient design matrix (rank {rank} < {design.shape[1]} columns)"
        )
    return coef


def _lag_design(data: np.ndarray, order: int, t0: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked design [1, x(t-1), ..., x(t-p)] and response x(t) for t in [t0, N)."""
    n, v = data.shape
    rows = n - t0
    design = np.empty((rows, 1 + v * order))
    design[:, 0] = 1.0
    for lag in range(1, order + 1):
        design[:, 1 + (lag - 1) * v: 1 + lag * v] = data[t0 - lag: n - lag]
    return design, data[t0:]


def _check_data(data: np.ndarray, order: int) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DataError("data must be an N x V matrix")
    if not np.all(np.isfinite(data)):
        raise DataError("data contains missing or non-finite values")
    n, v = data.shape
    if order < 1:
        raise DataError("order must be >= 1")
    if n <= v * order + 1:
        raise DataError(
            f"insufficient samples: N={n} must exceed V*p+1={v * order + 1} for V={v}, p={order}"
        )
    return data


@dataclass(frozen=True)
class VarModel:
    """Fitted VAR(p): x(t) = c + sum_l A_l x(t-l) + e(t).

    ``coeffs[l-1][j, i]`` is the effect of variable i at lag l on variable j.
    ``sigma`` is the residual covariance E'E / (N - p).
    """

    order: int
    coeffs: np.ndarray       # (p, V, V)
    intercept: np.ndarray    # (V,)
    sigma: np.ndarray        # (V, V)
    n_obs: int               # regression rows used (N - p)

    def __post_init__(self):
        sigma = np.asarray(self.sigma)
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("residual covariance must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
        if eigs.min() < -1e-8 * max(1.0, eigs.max()):
            raise ValueError("residual covariance must be positive semi-definite")

    @property
    def n_vars(self) -> int:
        return self.intercept.shape[0]


def fit_var(data: np.ndarray, order: int) -> VarModel:
    """Per-equation OLS fit of a VAR(order) on an N x V matrix."""
    data = _check_data(data, order)
    design, response = _lag_design(data, order, t0=order)
    coef = _lstsq(design, response)  # (1 + V p, V); column j = equation j
    resid = response - design @ coef
    n_eff = design.shape[0]
    sigma = (resid.T @ resid) / n_eff
    v = data.shape[1]
    coeffs = np.empty((order, v, v))
    for lag in range(order):
        coeffs[lag] = coef[1 + lag * v: 1 + (lag + 1) * v].T
    return VarModel(order=order, coeffs=coeffs, intercept=coef[0].copy(),
                    sigma=0.5 * (sigma + sigma.T), n_obs=n_eff)


def select_order(data: np.ndarray, p_max: int, criterion: str = "bic") -> int:
    """Information-criterion lag selection over p in [1, p_max].

    All candidates are scored on the common effective sample (rows p_max..N),
    with the ML residual covariance. Ties break toward the smallest p.
    """
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise DataError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    data = _check_data(data, p_max)
    n, v = data.shape
    t = n - p_max
    scores = []
    for p in range(1, p_max + 1):
        design, response = _lag_design(data, p, t0=p_max)
        coef = _lstsq(design, response)
        resid = response - design @ coef
        sign, logdet = np.linalg.slogdet((resid.T @ resid) / t)
        if sign <= 0:
            raise NumericalError(f"degenerate residual covariance at order {p}")
        k = v * (v * p + 1)
        penalty = 2.0 / t if criterion == "aic" else np.log(t) / t
        scores.append(logdet + penalty * k)
    return int(np.argmin(scores)) + 1


@dataclass(frozen=True)
class GcResult:
    """Granger test for cause -> effect within the joint VAR.

    Both statistic forms are computed; the p-value always comes from the F
    distribution with (p, N_eff - k_full) degrees of freedom. ``statistic``
    holds the form named by ``kind``.
    """

    cause: int
    effect: int
    kind: str
    statistic: float
    lr_statistic: float
    f_statistic: float
    df_num: int
    df_den: int
    p_value: float
    degenerate: bool = False


def gc_test(data: np.ndarray, cause: int, effect: int, order: int,
            kind: str = "F") -> GcResult:
    """Conditional Granger causality test of ``cause`` on ``effect``.

    The restricted model drops all ``order`` lags of the cause from the
    effect equation while keeping every other variable's lags; both models
    are fit on the identical effective sample.
    """
    if kind not in ("F", "likelihood-ratio"):
        raise DataError(f"statistic kind must be 'F' or 'likelihood-ratio', got {kind!r}")
    data = _check_data(data, order)
    n, v = data.shape
    if cause == effect:
        raise ValueError("cause and effect must differ")
    if not (0 <= cause < v and 0 <= effect < v):
        raise ValueError(f"variable index out of range for V={v}")

    design, response = _lag_design(data, order, t0=order)
    y = response[:, effect]
    n_eff = design.shape[0]
    k_full = design.shape[1]
    df_den = n_eff - k_full
    if df_den < 1:
        raise DataError(f"insufficient samples: {n_eff} rows for {k_full} regressors")

    drop = [1 + lag * v + cause for lag in range(order)]
    keep = [c for c in range(k_full) if c not in drop]

    coef_f = _lstsq(design, y)
    rss_full = float(np.sum((y - design @ coef_f) ** 2))
    coef_r = _lstsq(design[:, keep], y)
    rss_restricted = float(np.sum((y - design[:, keep] @ coef_r) ** 2))

    if rss_full <= 0.0:
        return GcResult(cause, effect, kind, float("inf"), float("inf"), float("inf"),
                        order, df_den, 0.0, degenerate=True)

    ratio = max(rss_restricted / rss_full, 1.0)  # nested models; clamp fp noise
    lr = n_eff * np.log(ratio)
    f_stat = ((ratio - 1.0) * rss_full / order) / (rss_full / df_den)
    p_value = float(stats.f.sf(f_stat, order, df_den))
    statistic = f_stat if kind == "F" else lr
    return GcResult(cause, effect, kind, float(statistic), float(lr), float(f_stat),
                    order, df_den, p_value)


def mvgc_graph(frame: TimeSeriesFrame, order: int, alpha: float = 0.05,
               correction: str = "benjamini-hochberg") -> CausalGraph:
    """Granger-causal graph over every ordered variable pair.

    P-values are corrected jointly across the V*(V-1) tests; retained edges
    carry lag = order, standing for the tested lag block [1, order].
    """
    if frame.mask.any():
        raise DataError("mvgc_graph requires an imputed frame")
    v = frame.n_vars
    pairs = [(i, j) for i in range(v) for j in range(v) if i != j]
    if not pairs:
        return CausalGraph(frame.names, (), alpha, correction)
    results = [gc_test(frame.values, i, j, order) for i, j in pairs]
    raw = np.array([r.p_value for r in results])
    corrected = correct_pvalues(raw, correction)
    edges = []
    for res, p_corr in zip(results, corrected):
        if p_corr <= alpha:
            edges.append(CausalEdge(
                cause=frame.names[res.cause],
                effect=frame.names[res.effect],
                lag=order,
                statistic=res.f_statistic,
                p_raw=res.p_value,
                p_corrected=float(p_corr),
            ))
    return CausalGraph(frame.names, tuple(edges), alpha, correction)
