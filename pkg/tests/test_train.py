import numpy as np
import pytest

from drsim.errors import AllTargetsNearZeroError, ModelLoadError, NonFiniteLossError
from drsim.forecast import (NormParams, TrainConfig, evaluate, init_model, make_windows,
                            chrono_split, minmax_normalize, persistence_metrics, score, train)
from drsim.forecast import checkpoint
from drsim.forecast.workflow import fit_series
from drsim.forecast.metrics import EvalMetrics


def _line_split(n=200):
    scaled, norm = minmax_normalize(np.arange(n, dtype=float))
    train_set, test_set = chrono_split(make_windows(scaled, 3, 1), 0.2)
    return train_set, test_set, norm


def test_zero_epochs_returns_initialization():
    train_set, _, norm = _line_split()
    cfg = TrainConfig(hidden_sizes=(4,), epochs=0, seed=11)
    res = train(train_set, cfg, norm)
    assert res.losses == []
    assert res.model.same_params(init_model((4,), norm, seed=11))


def test_training_is_deterministic():
    train_set, _, norm = _line_split()
    cfg = TrainConfig(hidden_sizes=(6, 4), epochs=3, seed=3)
    a, b = train(train_set, cfg, norm), train(train_set, cfg, norm)
    assert a.losses == b.losses
    assert checkpoint.dumps(a.model) == checkpoint.dumps(b.model)


@pytest.mark.parametrize("seed", [0, 1])
def test_line_beats_persistence(seed):
    # noiseless ramp y=t: persistence is always exactly one step behind.
    # The test windows lie above the training range, so the ramp is kept short.
    cfg = TrainConfig(hidden_sizes=(8,), epochs=300, learning_rate=1e-2, batch_size=4, seed=seed)
    out = fit_series(np.arange(25, dtype=float), config=cfg)
    assert out.baseline.mae == pytest.approx(1.0)
    assert out.result.losses[-1] < out.result.losses[0]
    assert out.metrics.mae < out.baseline.mae


def test_sgd_reduces_loss():
    train_set, _, norm = _line_split()
    res = train(train_set, TrainConfig(hidden_sizes=(4,), epochs=5, optimizer="sgd",
                                       learning_rate=0.1, seed=1), norm)
    assert res.losses[-1] < res.losses[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_aborts():
    train_set, _, norm = _line_split()
    bad = train_set.subset(slice(None))
    bad.Y = bad.Y.copy()
    bad.Y[3] = np.inf
    with pytest.raises(NonFiniteLossError) as exc:
        train(bad, TrainConfig(hidden_sizes=(2,), epochs=2, seed=0), norm)
    assert exc.value.epoch == 0


def test_metrics_perfect_fit():
    y = np.array([1.0, 2.0, 4.0])
    assert score(y, y) == EvalMetrics(0.0, 0.0, 1.0)


def test_metrics_mean_predictor_r2_zero():
    y = np.array([1.0, 2.0, 4.0, 9.0])
    assert score(y, np.full(4, y.mean())).r2 == pytest.approx(0.0, abs=1e-15)


def test_metrics_values():
    y = np.array([1.0, 2.0, 0.0])
    p = np.array([1.5, 1.0, 0.5])
    m = score(y, p)
    assert m.mae == pytest.approx((0.5 + 1.0 + 0.5) / 3)
    # the zero target is excluded from MAPE
    assert m.mape == pytest.approx(100 * (0.5 / 1 + 1.0 / 2) / 2)
    assert m.r2 == pytest.approx(1 - 1.5 / 2.0)


def test_mape_needs_nonzero_targets():
    with pytest.raises(AllTargetsNearZeroError):
        score([0.0, 1e-12], [0.1, 0.2])


def test_evaluate_normalized_vs_denormalized():
    m = init_model((3,), NormParams(10.0, 20.0), seed=0)
    ds = make_windows(np.linspace(0, 1, 30), 3, 1)
    a = evaluate(m, ds, denormalized=True)
    b = evaluate(m, ds, denormalized=False)
    assert a.mae == pytest.approx(10.0 * b.mae)
    assert a.r2 == pytest.approx(b.r2)


def test_checkpoint_roundtrip(tmp_path):
    m = init_model((5, 3), NormParams(0.1, 0.9), lookback=4, horizon=2, seed=8)
    path = tmp_path / "m.bin"
    checkpoint.save(m, path)
    back = checkpoint.load(path)
    assert back.same_params(m)
    assert (back.lookback, back.horizon, back.norm) == (4, 2, NormParams(0.1, 0.9))


def test_checkpoint_layout():
    m = init_model((2,), NormParams(0.0, 1.0), seed=1)
    blob = checkpoint.dumps(m)
    assert blob[:8] == b"DRSIMLST"
    header = 8 + 8 + 8 + 8 + 16
    payload = np.frombuffer(blob[header:], dtype="<f8")
    # first array is W_i of layer 0 (1 x 2), row-major
    assert payload[:2].tolist() == m.layers[0].W[0].ravel().tolist()
    assert payload[-1] == m.head_b[0]
    assert payload.size == m.n_params()


@pytest.mark.parametrize("mutate", [
    lambda b: b"NOTMAGIC" + b[8:],
    lambda b: b[:-8],
    lambda b: b[:20],
])
def test_checkpoint_rejects_corrupt(mutate):
    blob = checkpoint.dumps(init_model((2,), NormParams(0, 1)))
    with pytest.raises(ModelLoadError):
        checkpoint.loads(mutate(blob))


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(ModelLoadError):
        checkpoint.load(tmp_path / "absent.bin")
