"""GRU-LSTM forecaster: parameters, kernels, training, and checkpoints."""

from .kernels import BACKEND
from .network import backward, backward_batch, forward, forward_batch, predict
from .optim import AdamState, adam_step, init_adam
from .params import (
    ForecastModel,
    GruParams,
    LstmParams,
    init_forecast_model,
    load_checkpoint,
    parameter_count_formula,
    save_checkpoint,
)
from .steps import gru_step, lstm_step
from .train import TrainConfig, fit

__all__ = [
    "BACKEND",
    "AdamState",
    "ForecastModel",
    "GruParams",
    "LstmParams",
    "TrainConfig",
    "adam_step",
    "backward",
    "backward_batch",
    "fit",
    "forward",
    "forward_batch",
    "gru_step",
    "init_adam",
    "init_forecast_model",
    "load_checkpoint",
    "lstm_step",
    "parameter_count_formula",
    "predict",
    "save_checkpoint",
]
