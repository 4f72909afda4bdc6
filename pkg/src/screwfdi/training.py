"""Mini-batch training loop shared by every experiment.

One call to `train_model` consumes a fixed budget of epochs with the Adam
optimizer and the weighted cross-entropy loss; all shuffling and dropout
randomness derives from a single seed so reruns are bit-identical. A
divergent model (non-finite loss or gradients) raises `TrainingDiverged`
rather than poisoning later arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, NumericError, TrainingDiverged
from .evaluation import confusion, metrics
from .optim import Adam
from .seeding import TAG_SHUFFLE, derive_rng


@dataclass(frozen=True)
class TrainingConfig:
    """Fixed training budget; deliberately not part of the search space."""

    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 1e-3

    def validate(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )
        if not self.learning_rate > 0:
            raise ConfigurationError(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        return self


@dataclass(frozen=True)
class TrainingLog:
    """Mean per-epoch training loss, oldest first."""

    epoch_losses: tuple

    @property
    def final_loss(self):
        return self.epoch_losses[-1]


def _check_training_arrays(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 3:
        raise ConfigurationError(
            f"training inputs must be [batch, channels, steps], got {x.shape}"
        )
    if y.shape != (x.shape[0],):
        raise ConfigurationError(
            f"labels must have shape ({x.shape[0]},), got {y.shape}"
        )
    if x.shape[0] == 0:
        raise ConfigurationError("cannot train on an empty dataset")
    return x, y.astype(np.intp)


def train_model(model, x, y, config=None, class_weights=None, seed=0):
    """Train `model` in place on arrays x [N, C, T], y [N]; returns a log.

    `class_weights` defaults to all-ones (plain cross-entropy). The L2
    coefficient comes from the model's own hyperparameters and touches only
    dense kernels, matching the search space.
    """
    config = (config or TrainingConfig()).validate()
    x, y = _check_training_arrays(x, y)
    weights = (
        np.ones(3) if class_weights is None else np.asarray(class_weights, float)
    )
    l2 = model.hyperparams.l2_fc or 0.0
    optimizer = Adam(
        model.parameters(),
        lr=config.learning_rate,
        l2=l2,
        decay_names=model.decay_parameter_names(),
    )
    rng = derive_rng(seed, TAG_SHUFFLE)
    n = x.shape[0]
    step = min(config.batch_size, n)

    epoch_losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, step):
            batch = order[start : start + step]
            try:
                logits = model.forward(x[batch], training=True, rng=rng)
                loss = ad.weighted_cross_entropy(logits, y[batch], weights)
                if not np.isfinite(loss.data):
                    raise NumericError(f"loss became {loss.data!r}")
                model.zero_grad()
                loss.backward()
                optimizer.step()
            except NumericError as exc:
                raise TrainingDiverged(
                    f"training diverged at epoch {epoch}: {exc}"
                ) from exc
            batch_losses.append(float(loss.data))
        epoch_losses.append(float(np.mean(batch_losses)))
    return TrainingLog(epoch_losses=tuple(epoch_losses))


def evaluate_model(model, x, y):
    """Predict on arrays x [N, C, T], y [N] and summarize as a MetricReport."""
    x, y = _check_training_arrays(x, y)
    predicted = model.predict(x)
    return metrics(confusion(y, predicted))
