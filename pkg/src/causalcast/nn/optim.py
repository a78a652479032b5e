"""Adam optimizer over named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update; returns new parameter arrays and the advanced state.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected
    moment estimates.
    """
    t = state.t + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_params: dict[str, np.ndarray] = {}
    for key, p in params.items():
        g = grads[key]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {key!r}")
        state.m[key] = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        state.v[key] = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
        m_hat = state.m[key] / c1
        v_hat = state.v[key] / c2
        new_params[key] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    state.t = t
    return new_params, state
