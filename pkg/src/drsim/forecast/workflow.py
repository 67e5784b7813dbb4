"""End-to-end fit on a slot series: scale, window, split, train, score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import WindowDataset, chrono_split, fit_norm, make_windows, minmax_normalize
from .metrics import EvalMetrics, evaluate, persistence_metrics
from .train import TrainConfig, TrainResult, train


@dataclass
class FitOutcome:
    result: TrainResult
    train_set: WindowDataset
    test_set: WindowDataset
    metrics: EvalMetrics
    baseline: EvalMetrics


def fit_series(values, lookback: int = 3, horizon: int = 1, test_ratio: float = 0.2,
               config: TrainConfig = TrainConfig(), train_only_norm: bool = False,
               denormalized: bool = True) -> FitOutcome:
    """Train on the chronological prefix of ``values`` and score on the suffix.

    By default the scaling constants come from the whole series before the
    split. ``train_only_norm`` fits them on the training prefix instead.
    """
    x = np.asarray(values, dtype=np.float64)
    if train_only_norm:
        n_windows = len(x) - lookback - horizon + 1
        n_train = n_windows - int(np.floor(n_windows * test_ratio))
        norm = fit_norm(x[: n_train + lookback + horizon - 1])
        scaled, _ = minmax_normalize(x, norm)
    else:
        scaled, norm = minmax_normalize(x)
    train_set, test_set = chrono_split(make_windows(scaled, lookback, horizon), test_ratio)
    result = train(train_set, config, norm)
    return FitOutcome(
        result, train_set, test_set,
        evaluate(result.model, test_set, denormalized),
        persistence_metrics(test_set, norm if denormalized else None),
    )


def train_desk_model(length: int = 4000, seed: int = 7, hidden_sizes=(32, 32),
                     epochs: int = 50, profile: str = "sinusoid-mix") -> FitOutcome:
    """Small model trained on a synthetic utilization series; stands in for the full-trace model."""
    from ..trace import synth_trace

    series = synth_trace(length, seed=seed, profile=profile)
    return fit_series(series.values, config=TrainConfig(hidden_sizes=tuple(hidden_sizes),
                                                         epochs=epochs, seed=seed))
