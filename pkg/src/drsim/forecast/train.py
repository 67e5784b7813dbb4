from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLossError
from .data import NormParams, WindowDataset
from .lstm import ForecastModel, init_model, loss_and_gradients


@dataclass
class TrainConfig:
    hidden_sizes: tuple = (128, 128)
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # or "sgd"
    seed: int = 0
    shuffle: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    model: ForecastModel
    losses: list = field(default_factory=list)


class Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1 - b1 ** self.t
        corr2 = 1 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(train_set: WindowDataset, config: TrainConfig = TrainConfig(),
          norm: NormParams = NormParams(0.0, 1.0), init: ForecastModel | None = None) -> TrainResult:
    """Fit a stacked LSTM to normalized windows by mini-batch gradient descent on MSE.

    The whole run is a function of (train_set, config, init); the only
    randomness is the seeded initialization and per-epoch batch order.
    ``losses`` holds the sample-weighted mean training loss of each epoch.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if init is None:
        model = init_model(config.hidden_sizes, norm, train_set.lookback,
                           train_set.horizon, seed=config.seed)
    else:
        model = init.copy()
    model.meta.update(seed=config.seed, epochs=config.epochs)

    params = model.arrays()
    if config.optimizer == "adam":
        opt = Adam([p.shape for p in params], config.learning_rate,
                   config.beta1, config.beta2, config.eps)
    elif config.optimizer == "sgd":
        opt = SGD(config.learning_rate)
    else:
        raise ValueError(f"unknown optimizer {config.optimizer!r}")

    # separate stream from init so epochs=0 leaves the init untouched
    rng = np.random.default_rng([config.seed, 1])
    n = len(train_set)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = loss_and_gradients(model, train_set.X[idx], train_set.Y[idx])
            if not math.isfinite(loss):
                raise NonFiniteLossError(epoch)
            total += loss * len(idx)
            opt.step(params, grads.arrays())
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise NonFiniteLossError(epoch)
        losses.append(epoch_loss)
    return TrainResult(model, losses)
