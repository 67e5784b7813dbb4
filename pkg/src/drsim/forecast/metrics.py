from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AllTargetsNearZeroError
from .data import WindowDataset
from .lstm import ForecastModel, forward_batch

MAPE_EPS = 1e-8


@dataclass(frozen=True)
class EvalMetrics:
    mae: float
    mape: float  # percent
    r2: float

    def as_dict(self) -> dict:
        return {"mae": self.mae, "mape": self.mape, "r2": self.r2}


def score(y_true, y_pred) -> EvalMetrics:
    y = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("cannot score an empty set")
    err = y - p
    mae = float(np.mean(np.abs(err)))
    valid = np.abs(y) > MAPE_EPS
    if not valid.any():
        raise AllTargetsNearZeroError("every target is within eps of zero; MAPE undefined")
    mape = float(100.0 * np.mean(np.abs(err[valid]) / np.abs(y[valid])))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(err ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else float("-inf")
    else:
        r2 = 1.0 - ss_res / ss_tot
    return EvalMetrics(mae, mape, r2)


def evaluate(model: ForecastModel, test_set: WindowDataset, denormalized: bool = True) -> EvalMetrics:
    """MAE / MAPE(%) / R^2 of the model on normalized test windows.

    With ``denormalized`` both predictions and targets are mapped back to
    original units before scoring.
    """
    pred = forward_batch(model, test_set.X)
    y = test_set.Y
    if denormalized:
        pred = model.norm.denormalize(pred)
        y = model.norm.denormalize(y)
    return score(y, pred)


def persistence_metrics(test_set: WindowDataset, norm=None) -> EvalMetrics:
    """Scores of the predict-last-observed-value baseline."""
    pred = np.repeat(test_set.X[:, -1:], test_set.horizon, axis=1)
    y = test_set.Y
    if norm is not None:
        pred, y = norm.denormalize(pred), norm.denormalize(y)
    return score(y, pred)
