import numpy as np
import pytest

from abmgc.abm import Mode
from abmgc.core import LengthError, SeriesKind
from abmgc.experiment import DEFAULT_TRAIN, simulate_trial
from abmgc.training import (BOID_GRID, KURAMOTO_GRID, Objective, TrainConfig, default_sigma,
                            loss_prediction, loss_smooth, loss_sparsity, loss_tg, setup, tg_weights,
                            train)

from conftest import straight_movers


def test_prediction_loss_examples(rng):
    x = rng.normal(size=(6, 3))
    assert loss_prediction(x, x) == 0.0
    assert loss_prediction([1.0], [3.0]) == 4.0
    y = rng.normal(size=(6, 3))
    ref = sum((x[a, b] - y[a, b]) ** 2 for a in range(6) for b in range(3)) / 18
    assert loss_prediction(x, y) == pytest.approx(ref)
    with pytest.raises(ValueError):
        loss_prediction(np.zeros(2), np.zeros(3))


def test_sparsity_examples():
    assert loss_sparsity(np.zeros((4, 2, 3))) == 0.0
    assert loss_sparsity(np.array([[2.0]]), alpha=0.5) == 3.0
    base = np.random.default_rng(0).normal(size=(5, 2, 2))
    values = [loss_sparsity(c * base) for c in (0.5, 1.0, 2.0, 4.0)]
    assert values == sorted(values)


def test_smoothing_examples(rng):
    psi = np.ones((5, 2, 2))
    assert loss_smooth(psi[1:], psi[:-1]) == 0.0
    assert loss_smooth(np.array([[3.0]]), np.array([[1.0]])) == 4.0
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert loss_smooth(a + 7.0, b + 7.0) == pytest.approx(loss_smooth(a, b))


def test_tg_examples(rng):
    x = rng.normal(size=(6, 4))
    assert loss_tg(np.zeros((6, 2, 3)), x, x + 1.0, sigma=1.0) == 0.0
    other = rng.normal(size=(6, 2, 3))
    assert loss_tg(other, x, x, sigma=0.5) == pytest.approx(np.mean((other ** 2).sum(axis=(1, 2))))
    ramp = np.linspace(0.0, 5.0, 6)
    w = tg_weights(ramp ** 2, sigma=1.0)
    assert w[0] == 1.0 and np.all(np.diff(w) < 0)
    assert tg_weights(np.array([1e6]), sigma=1.0)[0] == 0.0
    assert loss_tg(other, x, x + 1e4, sigma=1.0) == 0.0
    with pytest.raises(ValueError):
        loss_tg(other, x, x, sigma=0.0)


def test_verbatim_kernel_grows_with_residual():
    w = tg_weights(np.array([0.0, 1.0, 2.0]), 1.0, kernel="verbatim")
    np.testing.assert_allclose(w, np.exp([0.0, 1.0, 2.0]))


def test_default_sigma_is_the_median():
    assert default_sigma(np.array([np.nan, 1.0, 4.0, 9.0])) == 4.0
    assert default_sigma(np.zeros(4)) == 1.0


def test_objective_terms_match_standalone_losses(rng):
    n, B, d, dh = 2, 7, 2, 5
    psi = rng.normal(size=(n, B, d, dh))
    pred, y = rng.normal(size=(1, B, d)), rng.normal(size=(1, B, d))
    mask = np.array([False, False, True, True, True])
    w = rng.uniform(size=B)
    loss, _, _ = Objective(0.1, 0.2, 0.3, 0.4, mask, w)(psi, pred, y)
    per_time = psi.transpose(1, 0, 2, 3)
    assert loss.prediction == pytest.approx(loss_prediction(pred, y))
    assert loss.sparsity == pytest.approx(loss_sparsity(per_time, 0.4))
    assert loss.smoothing == pytest.approx(loss_smooth(per_time[1:], per_time[:-1]))
    ref_tg = np.mean(w * (per_time[..., mask] ** 2).sum(axis=(1, 2, 3)))
    assert loss.theory_guided == pytest.approx(ref_tg)
    total = loss.prediction + 0.1 * loss.sparsity + 0.3 * loss.theory_guided + 0.2 * loss.smoothing
    assert loss.total == pytest.approx(total)


def test_search_ranges():
    assert BOID_GRID == {"lam": (0.01, 1000.0), "beta": (0.0, 0.025), "gamma": (1.0, 10000.0)}
    assert KURAMOTO_GRID == {"lam": (0.0, 0.1), "beta": (0.0, 0.025), "gamma": (0.1, 10000.0)}


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lam=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(alpha=1.5)
    with pytest.raises(ValueError):
        TrainConfig(sigma=0.0)
    with pytest.raises(ValueError):
        TrainConfig(tg_scope="pair")
    with pytest.raises(ValueError):
        TrainConfig(mode="nonsense")
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"K": 3, "learning_rate": 0.1})
    cfg = TrainConfig.from_dict({"K": 4, "lam": 0.5})
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_short_series_is_rejected():
    with pytest.raises(LengthError):
        train(straight_movers(T=4), TrainConfig(K=3, epochs=1))


def test_agent_scope_weights_follow_bank_order():
    series, _ = simulate_trial("boid", 2, T=30)
    _, batch, obj, _ = setup(series, TrainConfig(K=2, tg_scope="agent", gamma=1.0))
    assert obj.weights.shape == (10, len(batch.steps))
    np.testing.assert_array_equal(obj.weights[0], obj.weights[1])


def test_training_is_deterministic_and_returns_every_window():
    series, _ = simulate_trial("boid", 1, T=40)
    cfg = TrainConfig(K=3, epochs=5, hidden=8, seed=4, gamma=1.0, lam=0.1)
    a, b = train(series, cfg), train(series, cfg)
    np.testing.assert_array_equal(a.tensor.psi, b.tensor.psi)
    assert a.tensor.psi.shape == (37, 5, 3, 2, 10)
    assert len(a.history) == 6


def test_minibatches_cover_the_sequence():
    series, _ = simulate_trial("boid", 1, T=40)
    res = train(series, TrainConfig(K=2, epochs=3, hidden=4, batch_size=10, gamma=1.0))
    assert np.all(np.isfinite(res.tensor.psi))
    assert len(res.history) == 4


@pytest.mark.parametrize("mode", [m.value for m in Mode])
def test_every_mode_trains(mode):
    series, _ = simulate_trial("kuramoto", 3, T=30)
    res = train(series, TrainConfig(K=2, epochs=3, hidden=4, mode=mode))
    assert series.kind is SeriesKind.PHASE
    assert np.all(np.isfinite(res.tensor.psi))


@pytest.mark.slow
@pytest.mark.parametrize("system", ["boid", "kuramoto"])
def test_tuned_training_lowers_the_loss(system):
    for seed in range(10):
        series, _ = simulate_trial(system, 500 + seed)
        res = train(series, TrainConfig.from_dict({**DEFAULT_TRAIN[system], "seed": seed}))
        assert res.history[-1].total <= res.history[0].total
