"""Shared training machinery: epochs, evaluation, early stopping.

One "session" is a continuous optimisation of one model on one dataset: the
Adam state persists across its epochs and is never carried over from a
different session.  Early stopping tracks the best validation metric seen,
including the metric of the starting parameters (epoch 0), and restores the
best snapshot bitwise, so a session can never end worse than it began.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..nn import AdamState, ForecastModel, adam_step, compute_gradients, forward_batch
from ..nn.lstm import flatten, unflatten
from .config import ScenarioConfig

EVAL_BATCH = 1024


@dataclass
class EarlyStopper:
    """Patience-based stopping with a bitwise best-parameter snapshot."""

    patience: int
    best_metric: float = float("inf")
    best_params: np.ndarray | None = None
    best_step: int = -1
    stale: int = 0
    _step: int = field(default=-1, repr=False)

    def update(self, metric: float, params: np.ndarray) -> bool:
        """Record one evaluation point; returns True on improvement."""
        if not np.isfinite(metric):
            raise ValidationError("early-stopping metric must be finite")
        self._step += 1
        if metric < self.best_metric:
            self.best_metric = float(metric)
            self.best_params = np.array(params, dtype=np.float64, copy=True)
            self.best_step = self._step
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def predict(model: ForecastModel, windows: np.ndarray) -> np.ndarray:
    """Deterministic batched predictions over any number of windows."""
    if len(windows) == 0:
        raise ValidationError("no windows to predict")
    parts = [forward_batch(windows[i:i + EVAL_BATCH], model)
             for i in range(0, len(windows), EVAL_BATCH)]
    return np.concatenate(parts)


def evaluate_rmse(model: ForecastModel, seq_set) -> float:
    """Root mean squared error of the model on one sequence set."""
    preds = predict(model, seq_set.windows)
    diff = preds - seq_set.labels
    return float(np.sqrt(np.mean(diff * diff)))


def fit_epochs(model: ForecastModel, windows: np.ndarray, labels: np.ndarray,
               epochs: int, gen: np.random.Generator, batch_size: int,
               learning_rate: float, adam: AdamState | None = None):
    """Run whole epochs of shuffled minibatch Adam.

    Returns (model, adam, mean_losses, samples): one mean pre-update batch
    loss per epoch, and the number of optimizer-visited sequences (every
    sequence counts once per epoch).  epochs=0 is a no-op that returns the
    model unchanged.
    """
    n = len(labels)
    if n == 0:
        raise ValidationError("cannot train on an empty sequence set")
    if adam is None:
        adam = AdamState.fresh(len(flatten(model)), learning_rate)
    mean_losses = []
    for _ in range(epochs):
        perm = gen.permutation(n)
        losses = []
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            grad, loss = compute_gradients(windows[idx], labels[idx], model)
            model, adam = adam_step(model, grad, adam)
            losses.append(loss)
        mean_losses.append(float(np.mean(losses)))
    return model, adam, mean_losses, n * epochs


@dataclass(frozen=True)
class SessionResult:
    model: ForecastModel
    best_metric: float
    best_epoch: int       # 0 means the starting parameters were never beaten
    initial_metric: float
    epochs_run: int
    records: list         # one dict per epoch: loss, metric, samples
    samples: int


def train_session(model: ForecastModel, windows: np.ndarray, labels: np.ndarray,
                  evaluate, max_epochs: int, cfg: ScenarioConfig,
                  gen: np.random.Generator) -> SessionResult:
    """Epoch loop with early stopping on `evaluate(model) -> metric`.

    The starting parameters are evaluated first, so the session result can
    never be worse than its starting point.
    """
    stopper = EarlyStopper(cfg.patience)
    initial_metric = evaluate(model)
    stopper.update(initial_metric, flatten(model))
    adam = None
    records = []
    total = 0
    epochs_run = 0
    for epoch in range(1, max_epochs + 1):
        model, adam, losses, samples = fit_epochs(
            model, windows, labels, 1, gen, cfg.batch_size, cfg.learning_rate, adam)
        metric = evaluate(model)
        total += samples
        epochs_run = epoch
        stopper.update(metric, flatten(model))
        records.append({"epoch": epoch, "train_loss": losses[0],
                        "val_rmse": metric, "samples": samples})
        if stopper.should_stop:
            break
    best = unflatten(stopper.best_params, model.feature_dim, model.hidden)
    return SessionResult(best, stopper.best_metric, stopper.best_step,
                         initial_metric, epochs_run, records, total)
