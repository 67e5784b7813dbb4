"""Stacked LSTM regressor with a dense head, written directly on numpy.

Gate order everywhere is (input, forget, cell, output). Weight layout per
layer: ``W`` is (4, in, hidden), ``U`` is (4, hidden, hidden), ``b`` is
(4, hidden), so a gate pre-activation is ``x @ W[k] + h @ U[k] + b[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatchError
from .data import NormParams

GATES = ("i", "f", "g", "o")


@dataclass(eq=False)
class LstmLayerParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    def arrays(self):
        return [self.W, self.U, self.b]

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(self.W.copy(), self.U.copy(), self.b.copy())


@dataclass(eq=False)
class ForecastModel:
    layers: list
    head_w: np.ndarray  # (hidden_last, horizon)
    head_b: np.ndarray  # (horizon,)
    norm: NormParams
    lookback: int = 3
    horizon: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def hidden_sizes(self) -> tuple:
        return tuple(layer.hidden_size for layer in self.layers)

    def arrays(self) -> list:
        """All parameter arrays in checkpoint order."""
        out = []
        for layer in self.layers:
            out += layer.arrays()
        return out + [self.head_w, self.head_b]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "ForecastModel":
        arrays = list(arrays)
        layers = []
        for k in range(len(self.layers)):
            W, U, b = arrays[3 * k: 3 * k + 3]
            layers.append(LstmLayerParams(W, U, b))
        return ForecastModel(layers, arrays[-2], arrays[-1], self.norm,
                             self.lookback, self.horizon, dict(self.meta))

    def copy(self) -> "ForecastModel":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "ForecastModel":
        arrays, pos = [], 0
        for a in self.arrays():
            arrays.append(np.array(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        return self.with_arrays(arrays)

    def same_params(self, other: "ForecastModel") -> bool:
        mine, theirs = self.arrays(), other.arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs))


@dataclass(eq=False)
class Gradients:
    """Gradient arrays shaped like the model's parameters."""
    layers: list
    head_w: np.ndarray
    head_b: np.ndarray

    def arrays(self) -> list:
        out = []
        for layer in self.layers:
            out += layer.arrays()
        return out + [self.head_w, self.head_b]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


def param_count(hidden_sizes: Sequence[int], input_size: int = 1, horizon: int = 1) -> int:
    """Trainable parameters of a stacked LSTM plus dense head (one bias per gate)."""
    if not hidden_sizes:
        raise ValueError("at least one layer is required")
    total, width = 0, input_size
    for h in hidden_sizes:
        total += 4 * (width * h + h * h + h)
        width = h
    return total + width * horizon + horizon


def init_model(hidden_sizes: Sequence[int], norm: NormParams, lookback: int = 3,
               horizon: int = 1, seed: int = 0, forget_bias: float = 1.0) -> ForecastModel:
    rng = np.random.default_rng(seed)
    layers, width = [], 1
    for h in hidden_sizes:
        bound = 1.0 / np.sqrt(h)
        W = rng.uniform(-bound, bound, size=(4, width, h))
        U = rng.uniform(-bound, bound, size=(4, h, h))
        b = np.zeros((4, h))
        b[1] = forget_bias
        layers.append(LstmLayerParams(W, U, b))
        width = h
    bound = 1.0 / np.sqrt(width)
    head_w = rng.uniform(-bound, bound, size=(width, horizon))
    head_b = np.zeros(horizon)
    return ForecastModel(layers, head_w, head_b, norm, lookback, horizon)


def zero_model(hidden_sizes: Sequence[int], norm: NormParams = NormParams(0.0, 1.0),
               lookback: int = 3, horizon: int = 1) -> ForecastModel:
    layers, width = [], 1
    for h in hidden_sizes:
        layers.append(LstmLayerParams(np.zeros((4, width, h)), np.zeros((4, h, h)), np.zeros((4, h))))
        width = h
    return ForecastModel(layers, np.zeros((width, horizon)), np.zeros(horizon), norm, lookback, horizon)


def _sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _stack(layer: LstmLayerParams):
    # (in, 4h), (h, 4h), (4h,) with gate blocks side by side
    h = layer.hidden_size
    Wc = layer.W.transpose(1, 0, 2).reshape(layer.input_size, 4 * h)
    Uc = layer.U.transpose(1, 0, 2).reshape(h, 4 * h)
    return Wc, Uc, layer.b.reshape(4 * h)


def _forward_cached(model: ForecastModel, X: np.ndarray):
    B, T = X.shape
    seq = X[:, :, None]  # (B, T, 1)
    caches = []
    for layer in model.layers:
        Wc, Uc, bc = _stack(layer)
        H = layer.hidden_size
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs, steps = [], []
        for t in range(T):
            x = seq[:, t, :]
            a = x @ Wc + h @ Uc + bc
            i = _sigmoid(a[:, :H])
            f = _sigmoid(a[:, H:2 * H])
            g = np.tanh(a[:, 2 * H:3 * H])
            o = _sigmoid(a[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            steps.append((x, h_prev, c_prev, i, f, g, o, tc))
            hs.append(h)
        caches.append((Wc, Uc, steps))
        seq = np.stack(hs, axis=1)
    h_last = seq[:, -1, :]
    y = h_last @ model.head_w + model.head_b
    return y, h_last, caches


def forward_batch(model: ForecastModel, X) -> np.ndarray:
    """Predictions (n, horizon) for normalized windows X of shape (n, lookback)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.lookback:
        raise ShapeMismatchError(f"expected windows of shape (n, {model.lookback}), got {X.shape}")
    return _forward_cached(model, X)[0]


def forward(model: ForecastModel, window) -> float:
    """Normalized next-slot prediction for one normalized window of length lookback."""
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != model.lookback:
        raise ShapeMismatchError(f"window length {w.shape} != lookback {model.lookback}")
    return float(forward_batch(model, w[None, :])[0, 0])


def predict(model: ForecastModel, window) -> float:
    """Next-slot prediction in original units for a raw (unnormalized) window."""
    scaled = model.norm.normalize(window)
    return float(model.norm.denormalize(forward(model, scaled)))


def loss_and_gradients(model: ForecastModel, X, Y):
    """Mean squared error over a batch and its exact gradient (BPTT)."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    y, h_last, caches = _forward_cached(model, X)
    diff = y - Y
    loss = float(np.mean(diff ** 2))

    dy = 2.0 * diff / diff.size
    g_head_w = h_last.T @ dy
    g_head_b = dy.sum(axis=0)

    B, T = X.shape
    # gradient flowing into each layer's outputs, per time step
    dh_from_above = [None] * T
    dh_from_above[-1] = dy @ model.head_w.T

    layer_grads = []
    for layer, (Wc, Uc, steps) in zip(reversed(model.layers), reversed(caches)):
        H = layer.hidden_size
        dWc = np.zeros_like(Wc)
        dUc = np.zeros_like(Uc)
        dbc = np.zeros(4 * H)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dx_seq = [None] * T
        for t in range(T - 1, -1, -1):
            x, h_prev, c_prev, i, f, g, o, tc = steps[t]
            dh = dh_next if dh_from_above[t] is None else dh_from_above[t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc ** 2)
            da = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g ** 2),
                do * o * (1.0 - o),
            ], axis=1)
            dWc += x.T @ da
            dUc += h_prev.T @ da
            dbc += da.sum(axis=0)
            dx_seq[t] = da @ Wc.T
            dh_next = da @ Uc.T
            dc_next = dc * f
        layer_grads.append(LstmLayerParams(
            dWc.reshape(layer.input_size, 4, H).transpose(1, 0, 2).copy(),
            dUc.reshape(H, 4, H).transpose(1, 0, 2).copy(),
            dbc.reshape(4, H),
        ))
        dh_from_above = dx_seq
    layer_grads.reverse()
    return loss, Gradients(layer_grads, g_head_w, g_head_b)


def gradients(model: ForecastModel, X, Y) -> Gradients:
    if len(X) == 0:
        raise ValueError("batch must be non-empty")
    return loss_and_gradients(model, X, Y)[1]


def batch_loss(model: ForecastModel, X, Y) -> float:
    y = forward_batch(model, X)
    return float(np.mean((y - np.asarray(Y, dtype=np.float64).reshape(y.shape)) ** 2))
