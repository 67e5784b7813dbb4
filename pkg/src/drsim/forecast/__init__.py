from .data import (NormParams, WindowDataset, chrono_split, denormalize, fit_norm,
                   make_windows, minmax_normalize)
from .lstm import (ForecastModel, Gradients, LstmLayerParams, forward, forward_batch,
                   gradients, init_model, param_count, predict, zero_model)
from .metrics import EvalMetrics, evaluate, persistence_metrics, score
from .train import TrainConfig, TrainResult, train
from .workflow import FitOutcome, fit_series, train_desk_model

__all__ = [
    "NormParams", "WindowDataset", "chrono_split", "denormalize", "fit_norm",
    "make_windows", "minmax_normalize", "ForecastModel", "Gradients",
    "LstmLayerParams", "forward", "forward_batch", "gradients", "init_model",
    "param_count", "predict", "zero_model", "EvalMetrics", "evaluate",
    "persistence_metrics", "score", "TrainConfig", "TrainResult", "train",
    "FitOutcome", "fit_series", "train_desk_model",
]
