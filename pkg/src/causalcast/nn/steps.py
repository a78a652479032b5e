"""Single-timestep recurrent cell updates on plain vectors.

These are the reference semantics for the batched sequence kernels in
causalcast.nn.kernels; tests pin both to the same hand-checked values.
"""

from __future__ import annotations

import numpy as np

from .params import GruParams, LstmParams


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_step(params: GruParams, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One GRU update: h' = (1 - z) * h + z * tanh-candidate."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.shape != (params.in_dim,) or h.shape != (params.units,):
        raise ValueError(
            f"shape mismatch: x{x.shape} h{h.shape} for in_dim={params.in_dim}, units={params.units}"
        )
    z = sigmoid(x @ params.wz + h @ params.uz + params.bz)
    r = sigmoid(x @ params.wr + h @ params.ur + params.br)
    cand = np.tanh(x @ params.wh + (r * h) @ params.uh + params.bh)
    return (1.0 - z) * h + z * cand


def lstm_step(params: LstmParams, x: np.ndarray, h: np.ndarray,
              c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM update: returns (h', c')."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != (params.in_dim,) or h.shape != (params.units,) or c.shape != (params.units,):
        raise ValueError(
            f"shape mismatch: x{x.shape} h{h.shape} c{c.shape} "
            f"for in_dim={params.in_dim}, units={params.units}"
        )
    f = sigmoid(x @ params.wf + h @ params.uf + params.bf)
    i = sigmoid(x @ params.wi + h @ params.ui + params.bi)
    o = sigmoid(x @ params.wo + h @ params.uo + params.bo)
    g = np.tanh(x @ params.wg + h @ params.ug + params.bg)
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new
