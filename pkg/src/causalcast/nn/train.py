"""Minibatch MSE training with early stopping and best-weight restore."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, NumericalError
from ..frame import SupervisedWindows
from .network import backward_batch, forward_batch, predict
from .optim import adam_step, init_adam
from .params import ForecastModel


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    min_delta: float = 1e-5
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise DataError("batch_size and max_epochs must be >= 1")
        if self.patience < 0:
            raise DataError("patience must be >= 0")


def _mse(pred: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((pred - target) ** 2))


def fit(model: ForecastModel, train: SupervisedWindows,
        val: SupervisedWindows | None, config: TrainConfig) -> tuple[ForecastModel, dict]:
    """Train in place and return (model, history).

    Each epoch shuffles with the seeded generator and walks minibatches
    (the final short batch is trained, not dropped). With a validation set,
    training stops once the best validation MSE has not improved by more
    than ``min_delta`` for ``patience`` consecutive epochs, and the
    best-epoch weights are restored. Identical seed and config reproduce
    the run bit for bit.
    """
    if train.n_samples == 0:
        raise DataError("empty training windows")
    if val is not None and val.n_samples == 0:
        val = None
    rng = np.random.default_rng(config.seed)
    state = init_adam(model.param_dict(), lr=config.learning_rate)

    history: dict = {"train_loss": [], "val_loss": [], "best_epoch": None, "stopped_epoch": None}
    best_val = np.inf
    best_params = model.copy_params()
    best_epoch = 0
    since_improved = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(train.n_samples)
        total_se = 0.0
        for start in range(0, train.n_samples, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = train.inputs[idx]
            yb = train.targets[idx]
            pred, cache = forward_batch(model, xb, train=True, rng=rng)
            err = pred - yb
            batch_loss = float(np.mean(err ** 2))
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, batch starting {start}"
                )
            total_se += batch_loss * idx.size
            grads = backward_batch(model, cache, 2.0 * err / idx.size)
            new_params, state = adam_step(state, model.param_dict(), grads)
            model.apply_params(new_params)

        train_loss = total_se / train.n_samples
        history["train_loss"].append(train_loss)

        if val is not None:
            val_loss = _mse(predict(model, val.inputs), val.targets)
            if not np.isfinite(val_loss):
                raise NumericalError(f"non-finite validation loss at epoch {epoch}")
            history["val_loss"].append(val_loss)
            if val_loss < best_val - config.min_delta:
                best_val = val_loss
                best_params = model.copy_params()
                best_epoch = epoch
                since_improved = 0
            else:
                since_improved += 1
                if since_improved > config.patience:
                    history["stopped_epoch"] = epoch
                    break
        else:
            best_params = model.copy_params()
            best_epoch = epoch

    model.apply_params(best_params)
    history["best_epoch"] = best_epoch
    if history["stopped_epoch"] is None:
        history["stopped_epoch"] = len(history["train_loss"])
    return model, history
