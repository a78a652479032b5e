"""Forecast error metrics and multi-variant, multi-horizon experiments.

Metrics are computed on denormalized (physical-unit) values. Percent
variants divide by the mean absolute actual on the evaluated split and are
always emitted alongside the absolute numbers.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .frame import TimeSeriesFrame, make_windows, normalize, split_by_date
from .nn.network import predict
from .nn.params import ForecastModel, init_forecast_model
from .nn.train import TrainConfig, fit


def _check_pair(actual: np.ndarray, predicted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.ndim != 1 or p.ndim != 1:
        raise DataError("metric inputs must be 1-D vectors")
    if a.shape != p.shape:
        raise DataError(f"length mismatch: {a.shape[0]} actuals vs {p.shape[0]} predictions")
    if a.size == 0:
        raise DataError("empty metric input")
    return a, p


def rmse(actual: np.ndarray, predicted: np.ndarray) -> float:
    a, p = _check_pair(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


def mae(actual: np.ndarray, predicted: np.ndarray) -> float:
    a, p = _check_pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def r_squared(actual: np.ndarray, predicted: np.ndarray) -> float:
    """1 - SS_res / SS_tot, with SS_tot about the actual mean."""
    a, p = _check_pair(actual, predicted)
    if a.size < 2:
        raise DataError("r_squared needs at least two points")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("r_squared undefined for constant actuals")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


def forecast_metrics(actual: np.ndarray, predicted: np.ndarray) -> dict[str, float]:
    """All reported metrics for one (variant, horizon) cell."""
    a, _ = _check_pair(actual, predicted)
    scale = float(np.mean(np.abs(a)))
    if scale == 0.0:
        raise DataError("percent metrics undefined when actuals average to zero")
    return {
        "rmse": rmse(actual, predicted),
        "rmse_pct": 100.0 * rmse(actual, predicted) / scale,
        "mae": mae(actual, predicted),
        "mae_pct": 100.0 * mae(actual, predicted) / scale,
        "r2": r_squared(actual, predicted),
    }


@dataclass(frozen=True)
class MetricsCell:
    variant: str
    horizon: int
    rmse: float
    rmse_pct: float
    mae: float
    mae_pct: float
    r2: float
    n_samples: int
    n_features: int
    parameter_count: int


@dataclass(frozen=True)
class MetricsReport:
    """Per (variant, horizon) metrics plus run metadata, sorted for export."""

    cells: tuple[MetricsCell, ...]
    metadata: dict

    def __post_init__(self):
        ordered = tuple(sorted(self.cells, key=lambda c: (c.variant, c.horizon)))
        object.__setattr__(self, "cells", ordered)

    def to_dict(self) -> dict:
        results: dict = {}
        for c in self.cells:
            results.setdefault(c.variant, {})[str(c.horizon)] = {
                "rmse": c.rmse, "rmse_pct": c.rmse_pct,
                "mae": c.mae, "mae_pct": c.mae_pct, "r2": c.r2,
                "n_samples": c.n_samples, "n_features": c.n_features,
                "parameter_count": c.parameter_count,
            }
        return {"metadata": self.metadata, "results": results}


def write_report_json(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_report_csv(report: MetricsReport, path) -> None:
    lines = ["variant,horizon,rmse,rmse_pct,mae,mae_pct,r2,n_samples,n_features,parameter_count"]
    for c in report.cells:
        lines.append(
            f"{c.variant},{c.horizon},{c.rmse!r},{c.rmse_pct!r},{c.mae!r},"
            f"{c.mae_pct!r},{c.r2!r},{c.n_samples},{c.n_features},{c.parameter_count}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_r2_svg(report: MetricsReport, path, title: str = "R2 by lead time") -> None:
    """Minimal deterministic line plot of R2 against horizon, one line per variant."""
    variants = sorted({c.variant for c in report.cells})
    horizons = sorted({c.horizon for c in report.cells})
    by_variant = {
        v: {c.horizon: c.r2 for c in report.cells if c.variant == v} for v in variants
    }
    width, height, ml, mr, mt, mb = 640, 400, 60, 160, 40, 50
    plot_w, plot_h = width - ml - mr, height - mt - mb
    all_r2 = [c.r2 for c in report.cells]
    y_lo = min(0.0, min(all_r2)) - 0.05
    y_hi = 1.0

    def sx(h: float) -> float:
        if len(horizons) == 1:
            return ml + plot_w / 2
        return ml + plot_w * (h - horizons[0]) / (horizons[-1] - horizons[0])

    def sy(r2: float) -> float:
        return mt + plot_h * (y_hi - r2) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml}" y="24" font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + plot_h}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt + plot_h}" x2="{ml + plot_w}" y2="{mt + plot_h}" stroke="black"/>',
    ]
    for h in horizons:
        parts.append(
            f'<text x="{sx(h):.1f}" y="{mt + plot_h + 20}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{h}</text>'
        )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        if tick < y_lo:
            continue
        parts.append(
            f'<text x="{ml - 8}" y="{sy(tick):.1f}" font-family="sans-serif" font-size="12" '
            f'text-anchor="end">{tick:g}</text>'
        )
    for k, v in enumerate(variants):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(h):.1f},{sy(by_variant[v][h]):.1f}" for h in horizons if h in by_variant[v])
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for h in horizons:
            if h in by_variant[v]:
                parts.append(
                    f'<circle cx="{sx(h):.1f}" cy="{sy(by_variant[v][h]):.1f}" r="3" fill="{color}"/>'
                )
        ly = mt + 16 * k
        parts.append(f'<rect x="{ml + plot_w + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{ml + plot_w + 28}" y="{ly + 1}" font-family="sans-serif" font-size="12">{v}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


# -- experiment orchestration -------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Split, architecture, and training settings shared by all cells."""

    target: str
    train_end: dt.date
    val_fraction: float = 0.1
    lookback: int = 21
    gru_units: int = 64
    lstm_units: int = 128
    dense_units: int = 64
    dropout: float = 0.2
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-5
    learning_rate: float = 1e-3
    seed: int = 0


def cell_seed(base: int, variant: str, horizon: int) -> int:
    """Stable per-cell seed derived from the run seed and the cell identity."""
    digest = np.frombuffer(variant.encode("utf-8"), dtype=np.uint8)
    ss = np.random.SeedSequence([base, horizon, *digest.tolist()])
    return int(ss.generate_state(1)[0])


def train_cell(frame: TimeSeriesFrame, features: list[str], horizon: int,
               config: ExperimentConfig, seed: int) -> tuple[ForecastModel, dict, dict]:
    """Split, normalize, window, and train one model; returns (model, history, context).

    The context dict carries the fitted normalization parameters and test
    windows so callers can evaluate without repeating the preprocessing.
    """
    if config.target not in features:
        raise DataError(f"feature set must include the target {config.target!r}")
    train_f, val_f, test_f = split_by_date(frame, config.train_end, config.val_fraction)
    train_n, params = normalize(train_f)
    val_n = normalize(val_f, params)[0] if val_f is not None else None
    test_n = normalize(test_f, params)[0]

    def windows(f):
        return make_windows(f, features, config.target, config.lookback, horizon)

    w_train = windows(train_n)
    w_val = windows(val_n) if val_n is not None and \
        val_n.n_rows >= config.lookback + horizon else None
    w_test = windows(test_n)

    model = init_forecast_model(
        n_features=len(features), gru_units=config.gru_units,
        lstm_units=config.lstm_units, dense_units=config.dense_units,
        dropout=config.dropout, lookback=config.lookback, seed=seed,
    )
    tc = TrainConfig(batch_size=config.batch_size, max_epochs=config.max_epochs,
                     patience=config.patience, min_delta=config.min_delta,
                     learning_rate=config.learning_rate, seed=seed)
    model, history = fit(model, w_train, w_val, tc)
    t_idx = params.names.index(config.target)
    context = {
        "norm_params": params,
        "test_windows": w_test,
        "target_mean": float(params.mean[t_idx]),
        "target_std": float(params.std[t_idx]),
    }
    return model, history, context


def evaluate_cell(model: ForecastModel, context: dict) -> tuple[dict[str, float], int]:
    """Physical-unit test metrics for a trained cell."""
    w = context["test_windows"]
    pred = predict(model, w.inputs) * context["target_std"] + context["target_mean"]
    actual = w.targets * context["target_std"] + context["target_mean"]
    return forecast_metrics(actual, pred), w.n_samples


def run_experiment(frame: TimeSeriesFrame, variants: list[tuple[str, list[str]]],
                   horizons: list[int], config: ExperimentConfig) -> MetricsReport:
    """Train and evaluate every variant at every horizon, deterministically."""
    for name, feats in variants:
        unknown = [f for f in feats if f not in frame.names]
        if unknown:
            raise DataError(f"variant {name!r} uses unknown features {unknown}")
    cells = []
    for name, feats in variants:
        for horizon in horizons:
            seed = cell_seed(config.seed, name, horizon)
            model, _, context = train_cell(frame, feats, horizon, config, seed)
            metrics, n_samples = evaluate_cell(model, context)
            cells.append(MetricsCell(
                variant=name, horizon=horizon,
                rmse=metrics["rmse"], rmse_pct=metrics["rmse_pct"],
                mae=metrics["mae"], mae_pct=metrics["mae_pct"], r2=metrics["r2"],
                n_samples=n_samples, n_features=len(feats),
                parameter_count=model.parameter_count(),
            ))
    metadata = {
        "target": config.target,
        "cadence": frame.cadence,
        "seed": config.seed,
        "train_end": config.train_end.isoformat(),
        "val_fraction": config.val_fraction,
        "lookback": config.lookback,
        "feature_sets": {name: list(feats) for name, feats in variants},
    }
    return MetricsReport(tuple(cells), metadata)
