"""Forward and reverse passes through the full GRU-LSTM forecaster.

The per-timestep recurrence runs in the selected kernels backend; this
module owns layer composition, inverted dropout, the dense head, and the
cache plumbing that makes backward() an exact reverse-mode differentiation
of forward().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from . import kernels
from .params import ForecastModel, zero_like_params


@dataclass
class ForwardCache:
    """Everything backward() needs from one train-mode forward pass."""

    x: np.ndarray                 # (L, B, V)
    gru: tuple                    # h_seq, z, r, c
    gru_mask: np.ndarray | None   # (L, B, Hg) inverted-dropout mask, or None in eval
    lstm_in: np.ndarray           # (L, B, Hg) after dropout
    lstm: tuple                   # h_seq, c_seq, f, i, o, g
    h_mask: np.ndarray | None     # (B, Hl)
    h_final: np.ndarray           # (B, Hl) after dropout
    dense_pre: np.ndarray         # (B, Hd) pre-activation
    dense_out: np.ndarray         # (B, Hd) after ReLU


def _dropout_mask(rng: np.random.Generator, shape: tuple[int, ...], rate: float) -> np.ndarray:
    """Inverted dropout: zeros with probability ``rate``, else 1/(1-rate)."""
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def _first_nonfinite(name: str, seq: np.ndarray) -> str | None:
    bad = ~np.isfinite(seq)
    if bad.any():
        t = int(np.nonzero(bad.reshape(seq.shape[0], -1).any(axis=1))[0][0])
        return f"{name} at timestep {t}"
    return None


def forward_batch(model: ForecastModel, windows: np.ndarray, train: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Predict a batch of lookback windows.

    ``windows`` is (B, L, V). Train mode applies dropout to the GRU output
    sequence and to the final LSTM state, drawing masks from ``rng``.
    Returns (predictions (B,), cache).
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ValueError("windows must be (batch, lookback, features)")
    b, steps, feat = windows.shape
    if steps != model.lookback or feat != model.n_features:
        raise ValueError(
            f"window shape {(steps, feat)} does not match model "
            f"(lookback={model.lookback}, features={model.n_features})"
        )
    if train and model.dropout > 0.0 and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")

    x = np.ascontiguousarray(windows.transpose(1, 0, 2))  # (L, B, V)
    g = model.gru
    gru_out = kernels.gru_forward(x, g.wz, g.wr, g.wh, g.uz, g.ur, g.uh, g.bz, g.br, g.bh)
    gru_h = gru_out[0][1:]  # (L, B, Hg)

    gru_mask = None
    lstm_in = gru_h
    if train and model.dropout > 0.0:
        gru_mask = _dropout_mask(rng, gru_h.shape, model.dropout)
        lstm_in = np.ascontiguousarray(gru_h * gru_mask)

    m = model.lstm
    lstm_out = kernels.lstm_forward(lstm_in, m.wf, m.wi, m.wo, m.wg,
                                    m.uf, m.ui, m.uo, m.ug, m.bf, m.bi, m.bo, m.bg)
    h_last = lstm_out[0][-1]  # (B, Hl)

    h_mask = None
    h_final = h_last
    if train and model.dropout > 0.0:
        h_mask = _dropout_mask(rng, h_last.shape, model.dropout)
        h_final = h_last * h_mask

    dense_pre = h_final @ model.dense_w + model.dense_b
    dense_out = np.maximum(dense_pre, 0.0)
    pred = dense_out @ model.out_w + model.out_b[0]

    if not np.all(np.isfinite(pred)):
        for name, seq in (("gru", gru_out[0]), ("lstm", lstm_out[0])):
            where = _first_nonfinite(name, seq)
            if where:
                raise NumericalError(f"non-finite activation in {where}")
        raise NumericalError("non-finite activation in output head")

    cache = ForwardCache(x=x, gru=gru_out, gru_mask=gru_mask, lstm_in=lstm_in,
                         lstm=lstm_out, h_mask=h_mask, h_final=h_final,
                         dense_pre=dense_pre, dense_out=dense_out)
    return pred, cache


def backward_batch(model: ForecastModel, cache: ForwardCache,
                   d_pred: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of sum(d_pred * prediction) w.r.t. every parameter."""
    d_pred = np.asarray(d_pred, dtype=np.float64)
    b = cache.x.shape[1]
    if d_pred.shape != (b,):
        raise ValueError(f"d_pred must have shape ({b},)")
    grads = zero_like_params(model.param_dict())

    grads["out_w"] = cache.dense_out.T @ d_pred
    grads["out_b"] = np.asarray([d_pred.sum()])
    d_dense_out = np.outer(d_pred, model.out_w)
    d_dense_pre = d_dense_out * (cache.dense_pre > 0.0)
    grads["dense_w"] = cache.h_final.T @ d_dense_pre
    grads["dense_b"] = d_dense_pre.sum(axis=0)
    dh_final = d_dense_pre @ model.dense_w.T
    if cache.h_mask is not None:
        dh_final = dh_final * cache.h_mask

    steps = cache.x.shape[0]
    hl = model.lstm.units
    dh_out = np.zeros((steps, b, hl))
    dh_out[-1] = dh_final
    m = model.lstm
    (dx_lstm, dwf, dwi, dwo, dwg, duf, dui, duo, dug,
     dbf, dbi, dbo, dbg) = kernels.lstm_backward(
        dh_out, cache.lstm_in, *cache.lstm, m.wf, m.wi, m.wo, m.wg,
        m.uf, m.ui, m.uo, m.ug)
    for name, val in zip(("wf", "wi", "wo", "wg", "uf", "ui", "uo", "ug",
                          "bf", "bi", "bo", "bg"),
                         (dwf, dwi, dwo, dwg, duf, dui, duo, dug, dbf, dbi, dbo, dbg)):
        grads[f"lstm.{name}"] = val

    d_gru_h = dx_lstm
    if cache.gru_mask is not None:
        d_gru_h = np.ascontiguousarray(d_gru_h * cache.gru_mask)
    g = model.gru
    (_, dwz, dwr, dwh, duz, dur, duh, dbz, dbr, dbh) = kernels.gru_backward(
        d_gru_h, cache.x, *cache.gru, g.wz, g.wr, g.wh, g.uz, g.ur, g.uh)
    for name, val in zip(("wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"),
                         (dwz, dwr, dwh, duz, dur, duh, dbz, dbr, dbh)):
        grads[f"gru.{name}"] = val
    return grads


def forward(model: ForecastModel, window: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None) -> tuple[float, ForwardCache]:
    """Single-window forward pass; returns (scalar prediction, cache)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ValueError("window must be (lookback, features)")
    pred, cache = forward_batch(model, window[None, :, :], train=train, rng=rng)
    return float(pred[0]), cache


def backward(model: ForecastModel, cache: ForwardCache,
             d_prediction: float) -> dict[str, np.ndarray]:
    """Gradients of d_prediction * prediction for a single-window cache."""
    return backward_batch(model, cache, np.asarray([d_prediction], dtype=np.float64))


def predict(model: ForecastModel, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Deterministic eval-mode predictions for (S, L, V) inputs."""
    inputs = np.asarray(inputs, dtype=np.float64)
    out = np.empty(inputs.shape[0])
    for start in range(0, inputs.shape[0], batch_size):
        chunk = inputs[start:start + batch_size]
        out[start:start + chunk.shape[0]] = forward_batch(model, chunk, train=False)[0]
    return out
