"""Parameter containers for the GRU-LSTM forecaster, plus checkpoint I/O.

Weight layout: input-to-hidden matrices are stored (in_dim, units) and
hidden-to-hidden matrices (units, units), so a batch row-stack X of shape
(batch, in_dim) advances as X @ W + H @ U + b.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

CHECKPOINT_FORMAT = "causalcast-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class GruParams:
    """Update (z), reset (r), and candidate (h) gate parameters."""

    wz: np.ndarray
    wr: np.ndarray
    wh: np.ndarray
    uz: np.ndarray
    ur: np.ndarray
    uh: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bh: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.wz.shape[0]

    @property
    def units(self) -> int:
        return self.wz.shape[1]


@dataclass
class LstmParams:
    """Forget (f), input (i), output (o), and cell-candidate (g) gates."""

    wf: np.ndarray
    wi: np.ndarray
    wo: np.ndarray
    wg: np.ndarray
    uf: np.ndarray
    ui: np.ndarray
    uo: np.ndarray
    ug: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bo: np.ndarray
    bg: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.wf.shape[0]

    @property
    def units(self) -> int:
        return self.wf.shape[1]


_GRU_FIELDS = ("wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh")
_LSTM_FIELDS = ("wf", "wi", "wo", "wg", "uf", "ui", "uo", "ug", "bf", "bi", "bo", "bg")


@dataclass
class ForecastModel:
    """GRU -> LSTM -> dense(ReLU) -> linear scalar head.

    Layer widths chain n_features -> gru.units -> lstm.units -> dense -> 1.
    """

    gru: GruParams
    lstm: LstmParams
    dense_w: np.ndarray   # (lstm.units, dense_units)
    dense_b: np.ndarray   # (dense_units,)
    out_w: np.ndarray     # (dense_units,)
    out_b: np.ndarray     # (1,)
    dropout: float = 0.2
    lookback: int = 21

    def __post_init__(self):
        self.out_b = np.atleast_1d(np.asarray(self.out_b, dtype=np.float64))
        if self.lstm.in_dim != self.gru.units:
            raise ValueError("LSTM input width must equal GRU units")
        if self.dense_w.shape != (self.lstm.units, self.dense_b.shape[0]):
            raise ValueError("dense layer shapes inconsistent")
        if self.out_w.shape != (self.dense_b.shape[0],):
            raise ValueError("output layer shape inconsistent")
        if self.out_b.shape != (1,):
            raise ValueError("output bias must be a single value")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout rate must be in [0, 1)")

    @property
    def n_features(self) -> int:
        return self.gru.in_dim

    def param_dict(self) -> dict[str, np.ndarray]:
        """Live name -> array view of every trainable parameter."""
        out = {f"gru.{f}": getattr(self.gru, f) for f in _GRU_FIELDS}
        out.update({f"lstm.{f}": getattr(self.lstm, f) for f in _LSTM_FIELDS})
        out["dense_w"] = self.dense_w
        out["dense_b"] = self.dense_b
        out["out_w"] = self.out_w
        out["out_b"] = self.out_b
        return out

    def apply_params(self, params: dict[str, np.ndarray]) -> None:
        for f in _GRU_FIELDS:
            setattr(self.gru, f, params[f"gru.{f}"])
        for f in _LSTM_FIELDS:
            setattr(self.lstm, f, params[f"lstm.{f}"])
        self.dense_w = params["dense_w"]
        self.dense_b = params["dense_b"]
        self.out_w = params["out_w"]
        self.out_b = np.atleast_1d(np.asarray(params["out_b"], dtype=np.float64))

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.param_dict().items()}

    def parameter_count(self) -> int:
        return int(sum(v.size for v in self.param_dict().values()))


def parameter_count_formula(n_features: int, gru_units: int = 64,
                            lstm_units: int = 128, dense_units: int = 64) -> int:
    """Closed-form trainable parameter count for the architecture."""
    gru = 3 * (gru_units * n_features + gru_units * gru_units + gru_units)
    lstm = 4 * (lstm_units * gru_units + lstm_units * lstm_units + lstm_units)
    dense = dense_units * lstm_units + dense_units
    head = dense_units + 1
    return gru + lstm + dense + head


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int,
            shape: tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_forecast_model(n_features: int, gru_units: int = 64, lstm_units: int = 128,
                        dense_units: int = 64, dropout: float = 0.2, lookback: int = 21,
                        seed: int = 0) -> ForecastModel:
    """Glorot-uniform weights, zero biases except the LSTM forget bias at 1.

    Parameter draw order is fixed so a seed fully determines the model.
    """
    if n_features < 1:
        raise DataError("model needs at least one input feature")
    rng = np.random.default_rng(seed)
    d, hg, hl, hd = n_features, gru_units, lstm_units, dense_units
    gru = GruParams(
        wz=_glorot(rng, d, hg, (d, hg)), wr=_glorot(rng, d, hg, (d, hg)),
        wh=_glorot(rng, d, hg, (d, hg)),
        uz=_glorot(rng, hg, hg, (hg, hg)), ur=_glorot(rng, hg, hg, (hg, hg)),
        uh=_glorot(rng, hg, hg, (hg, hg)),
        bz=np.zeros(hg), br=np.zeros(hg), bh=np.zeros(hg),
    )
    lstm = LstmParams(
        wf=_glorot(rng, hg, hl, (hg, hl)), wi=_glorot(rng, hg, hl, (hg, hl)),
        wo=_glorot(rng, hg, hl, (hg, hl)), wg=_glorot(rng, hg, hl, (hg, hl)),
        uf=_glorot(rng, hl, hl, (hl, hl)), ui=_glorot(rng, hl, hl, (hl, hl)),
        uo=_glorot(rng, hl, hl, (hl, hl)), ug=_glorot(rng, hl, hl, (hl, hl)),
        bf=np.ones(hl), bi=np.zeros(hl), bo=np.zeros(hl), bg=np.zeros(hl),
    )
    return ForecastModel(
        gru=gru, lstm=lstm,
        dense_w=_glorot(rng, hl, hd, (hl, hd)), dense_b=np.zeros(hd),
        out_w=_glorot(rng, hd, 1, (hd,)), out_b=np.zeros(1),
        dropout=dropout, lookback=lookback,
    )


def zero_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(model: ForecastModel, path, metadata: dict | None = None) -> None:
    """Write a JSON checkpoint that reloads to a bit-identical model.

    ``metadata`` carries pipeline context (normalization params, feature
    names, horizon, ...) and is stored verbatim under "metadata".
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": {
            "n_features": model.n_features,
            "gru_units": model.gru.units,
            "lstm_units": model.lstm.units,
            "dense_units": int(model.dense_b.shape[0]),
            "dropout": model.dropout,
            "lookback": model.lookback,
        },
        "params": {
            name: {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
            for name, arr in model.param_dict().items()
        },
        "metadata": metadata or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ForecastModel, dict]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a causalcast checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {payload.get('version')}")
    arch = payload["architecture"]
    model = init_forecast_model(
        n_features=arch["n_features"], gru_units=arch["gru_units"],
        lstm_units=arch["lstm_units"], dense_units=arch["dense_units"],
        dropout=arch["dropout"], lookback=arch["lookback"], seed=0,
    )
    params = {}
    for name, rec in payload["params"].items():
        params[name] = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
    model.apply_params(params)
    return model, payload.get("metadata", {})
