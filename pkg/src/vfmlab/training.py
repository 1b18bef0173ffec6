"""MAP training: mini-batch Adam with early stopping.

The objective is scaled least squares plus Gaussian prior penalties,

    sum_batch (y_i - yhat_i)^2 / sigma_eps^2
        + (|batch| / N_train) * sum_j ((phi_j - mu_j) / sigma_j)^2,

with the prior term weighted by the batch fraction so that summing the
batch losses over one epoch reproduces the full objective exactly once.

Parameter scales span orders of magnitude (areas near 5e-4 next to
rangeabilities near 30), so the two group learning rates act on
prior-standardized units: each physics coordinate steps at
learning_rate_phys times its prior sigma, network coordinates at
learning_rate_net. This is a per-coordinate rate vector inside a single
Adam state. Early stopping watches the validation mean squared
prediction error (no prior term) and returns the best-epoch snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .models import Model, ParamVector
from .seeding import stream_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# RNG stream coordinates under a training seed.
STREAM_SHUFFLE = (3, 0)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and early-stopping settings."""

    learning_rate_net: float = 1e-3
    learning_rate_phys: float = 1e-2
    batch_size: int = 64
    max_epochs: int = 5000
    patience: int | None = 100
    sigma_eps_assumed: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate_net <= 0 or self.learning_rate_phys <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be at least 1 or None, got {self.patience}")
        if self.sigma_eps_assumed <= 0:
            raise ValueError("sigma_eps_assumed must be positive")


@dataclass
class TrainReport:
    """What happened during one training run."""

    epochs_run: int
    best_epoch: int
    train_curve: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)
    params: ParamVector | None = None
    diverged: bool = False


class TrainingDiverged(RuntimeError):
    """Non-finite loss encountered; carries the report up to failure."""

    def __init__(self, message: str, report: TrainReport):
        super().__init__(message)
        self.report = report


@dataclass
class AdamState:
    """First/second moment accumulators and step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @staticmethod
    def fresh(n: int) -> "AdamState":
        return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, values: np.ndarray, grads: np.ndarray, lr,
              lower=None, upper=None) -> tuple[AdamState, np.ndarray]:
    """One Adam update with bias correction and box projection.

    ``lr`` may be a scalar or a per-coordinate vector. Bounds, when
    given, are enforced by clipping after the step.
    """
    state.t += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grads ** 2
    m_hat = state.m / (1.0 - ADAM_BETA1 ** state.t)
    v_hat = state.v / (1.0 - ADAM_BETA2 ** state.t)
    out = values - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    if lower is not None or upper is not None:
        out = np.clip(out, lower, upper)
    return state, out


def prior_penalty(params: ParamVector, values: np.ndarray | None = None) -> float:
    """sum_j ((phi_j - mu_j) / sigma_j)^2 at the given (or stored) values."""
    v = params.values if values is None else values
    return float(np.sum(((v - params.prior_mean) / params.prior_sigma) ** 2))


def map_loss(model: Model, x: np.ndarray, y: np.ndarray,
             sigma_eps_assumed: float, n_train: int | None = None) -> float:
    """Batch MAP objective; n_train scales the prior by the batch fraction.

    With n_train omitted the batch is treated as the full training set
    and the value is the complete objective.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if len(x) == 0:
        raise ValueError("batch must be nonempty")
    if n_train is None:
        n_train = len(x)
    yhat = model.predict(x)
    fit = float(np.sum((y - yhat) ** 2)) / sigma_eps_assumed ** 2
    return fit + (len(x) / n_train) * prior_penalty(model.params)


def _learning_rates(model: Model, config: TrainConfig) -> np.ndarray:
    lr = np.empty(len(model.params))
    phys = model.phys_slice
    lr[phys] = config.learning_rate_phys * model.params.prior_sigma[phys]
    lr[model.net_slice] = config.learning_rate_net
    return lr


def train(model: Model, dataset: Dataset, config: TrainConfig
          ) -> tuple[Model, TrainReport]:
    """Fit by mini-batch Adam; return the best-validation snapshot.

    Normalization statistics are computed from the training split and
    installed on the model before any prediction. Batches reshuffle
    every epoch with a seeded stream. With an empty validation split
    (allowed only when patience is None) the run lasts max_epochs and
    the final epoch is the snapshot.
    """
    x_train, y_train = dataset.split_xy("train")
    x_val, y_val = dataset.split_xy("val")
    n_train = len(x_train)
    if n_train == 0:
        raise ValueError("dataset has an empty train split")
    if len(x_val) == 0 and config.patience is not None:
        raise ValueError("empty validation split requires patience=None")

    from .models import Normalization
    model = model.with_norm(Normalization.from_training(x_train, y_train))
    prep_train = model.prepare(x_train)
    prep_val = model.prepare(x_val) if len(x_val) else None

    params = model.params
    theta = params.values.copy()
    lr = _learning_rates(model, config)
    state = AdamState.fresh(len(theta))
    rng = stream_rng(config.seed, *STREAM_SHUFFLE)
    sig2 = config.sigma_eps_assumed ** 2
    prior_scale = 1.0 / n_train

    report = TrainReport(epochs_run=0, best_epoch=0)
    best_val = np.inf
    best_theta = theta.copy()
    bad_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        for start in range(0, n_train, config.batch_size):
            idx = order[start:start + config.batch_size]
            prep_b = prep_train.take(idx)
            y_b = y_train[idx]
            yhat, cache = model.predict_prepared(theta, prep_b)
            resid = yhat - y_b
            frac = len(idx) * prior_scale
            epoch_loss += (float(np.sum(resid ** 2)) / sig2
                           + frac * prior_penalty(params, theta))
            grad = model.weighted_gradient(theta, prep_b, cache,
                                           2.0 * resid / sig2)
            grad += frac * 2.0 * (theta - params.prior_mean) / params.prior_sigma ** 2
            state, theta = adam_step(state, theta, grad, lr,
                                     params.lower, params.upper)
        report.epochs_run = epoch
        report.train_curve.append(epoch_loss)
        if prep_val is not None:
            val_pred, _ = model.predict_prepared(theta, prep_val)
            val_mse = float(np.mean((y_val - val_pred) ** 2))
        else:
            val_mse = np.nan
        report.val_curve.append(val_mse)
        if not np.isfinite(epoch_loss) or (prep_val is not None
                                           and not np.isfinite(val_mse)):
            report.diverged = True
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}", report)
        if prep_val is None:
            best_theta = theta.copy()
            report.best_epoch = epoch
            continue
        if val_mse < best_val:
            best_val = val_mse
            best_theta = theta.copy()
            report.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if config.patience is not None and bad_epochs >= config.patience:
                break

    fitted = model.with_values(best_theta)
    report.params = fitted.params
    return fitted, report
