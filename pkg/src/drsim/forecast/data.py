"""Min-max scaling, sliding windows and chronological splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRangeError, EmptySplitError, InsufficientDataError


@dataclass(frozen=True)
class NormParams:
    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateRangeError(f"max ({self.max}) must exceed min ({self.min})")

    @property
    def span(self) -> float:
        return self.max - self.min

    def normalize(self, values):
        return (np.asarray(values, dtype=np.float64) - self.min) / self.span

    def denormalize(self, values):
        return np.asarray(values, dtype=np.float64) * self.span + self.min


def fit_norm(values) -> NormParams:
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 values to fit min-max scaling")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise DegenerateRangeError(f"constant series (value {lo})")
    return NormParams(lo, hi)


def minmax_normalize(values, norm: NormParams | None = None):
    """Scale values to [0, 1]; returns (scaled array, NormParams).

    Pass ``norm`` to reuse constants fitted elsewhere (e.g. on the training
    prefix only); values outside that range then fall outside [0, 1].
    """
    if norm is None:
        norm = fit_norm(values)
    return norm.normalize(values), norm


def denormalize(values, norm: NormParams):
    return norm.denormalize(values)


@dataclass(eq=False)
class WindowDataset:
    X: np.ndarray  # (n, lookback)
    Y: np.ndarray  # (n, horizon)
    lookback: int
    horizon: int

    def __len__(self):
        return self.X.shape[0]

    def subset(self, sl: slice) -> "WindowDataset":
        return WindowDataset(self.X[sl], self.Y[sl], self.lookback, self.horizon)


def make_windows(values, lookback: int = 3, horizon: int = 1) -> WindowDataset:
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be positive")
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[0]
    if n < lookback + horizon:
        raise InsufficientDataError(
            f"series of length {n} is shorter than lookback+horizon={lookback + horizon}")
    count = n - lookback - horizon + 1
    idx = np.arange(count)[:, None]
    X = x[idx + np.arange(lookback)]
    Y = x[idx + lookback + np.arange(horizon)]
    return WindowDataset(X, Y, lookback, horizon)


def chrono_split(dataset: WindowDataset, test_ratio: float = 0.2):
    """Split into (train, test) keeping time order; test is the final floor(n*ratio) samples."""
    if not 0 < test_ratio < 1:
        raise ValueError("test_ratio must lie in (0, 1)")
    n = len(dataset)
    n_test = math.floor(n * test_ratio)
    if n_test == 0 or n_test == n:
        raise EmptySplitError(f"{n} samples at ratio {test_ratio} leaves an empty side")
    cut = n - n_test
    return dataset.subset(slice(0, cut)), dataset.subset(slice(cut, n))
