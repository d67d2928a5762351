import math

import numpy as np
import pytest
from conftest import TINY_TRAIN

from fleetrec.energymodel import TrainConfig, TrainingDiverged, train, train_val_split
from fleetrec.synthgen import SynthConfig, generate_dataset


@pytest.fixture(scope="module")
def trips200():
    cfg = SynthConfig(seed=21, n_links=30, trip_count=200, calibration_trips=50, length_median=5.0, length_sigma=0.6)
    return generate_dataset(cfg).trips


def _cfg(**kw):
    base = dict(TINY_TRAIN, learning_rate=3e-3, optimizer="adam", batch_size=16, seed=4)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_epochs_returns_initial_parameters(trips200):
    res = train(trips200, _cfg(epochs=0))
    assert res.history == [] and res.epochs_done == 0
    for k in res.params.tensors:
        np.testing.assert_array_equal(res.params[k], res.last_params[k])


def test_loss_decreases(trips200):
    res = train(trips200, _cfg(epochs=50))
    losses = [h["train_loss"] for h in res.history]
    assert len(losses) == 50
    assert losses[-1] < 0.5 * losses[0]
    assert all(math.isfinite(h["val_loss"]) for h in res.history)
    best = min(h["val_loss"] for h in res.history)
    assert best <= res.history[-1]["val_loss"]


def test_training_is_deterministic(trips200):
    a = train(trips200, _cfg(epochs=3))
    b = train(trips200, _cfg(epochs=3))
    assert [h["train_loss"] for h in a.history] == [h["train_loss"] for h in b.history]
    for k in a.params.tensors:
        np.testing.assert_array_equal(a.params[k], b.params[k])


def test_frozen_components_stay_fixed(trips200):
    init = train(trips200, _cfg(epochs=0)).params
    res = train(trips200, _cfg(epochs=2, train_components=("deep",)))
    for k in init.tensors:
        if k.startswith("deep."):
            assert not np.array_equal(init[k], res.last_params[k]), k
        else:
            np.testing.assert_array_equal(init[k], res.last_params[k])


def test_resume_continues_the_same_trajectory(trips200):
    full = train(trips200, _cfg(epochs=4, optimizer="momentum", learning_rate=1e-3))
    half = train(trips200, _cfg(epochs=2, optimizer="momentum", learning_rate=1e-3))
    rest = train(trips200, _cfg(epochs=4, optimizer="momentum", learning_rate=1e-3),
                 params=half.last_params, optimizer_state=half.optimizer_state, start_epoch=2)
    assert [h["train_loss"] for h in rest.history] == [h["train_loss"] for h in full.history[2:]]


def test_parallel_workers_agree_with_serial(trips200):
    serial = train(trips200, _cfg(epochs=2))
    para = train(trips200, _cfg(epochs=2, n_workers=2))
    np.testing.assert_allclose([h["train_loss"] for h in para.history],
                               [h["train_loss"] for h in serial.history], rtol=1e-9)


def test_divergence_is_reported(trips200):
    with pytest.raises(TrainingDiverged), np.errstate(all="ignore"):
        train(trips200, _cfg(epochs=3, optimizer="momentum", learning_rate=1e200, clip_norm=None))


def test_split_is_disjoint_and_seeded():
    tr, va = train_val_split(100, 0.2, 3)
    assert len(va) == 20 and not set(tr) & set(va)
    assert train_val_split(100, 0.2, 3)[1].tolist() == va.tolist()


def test_schedules_and_config_checks():
    assert _cfg(epochs=10, lr_schedule="cosine").lr_at(10) == pytest.approx(0.0, abs=1e-18)
    assert _cfg(lr_schedule="step", lr_step_every=2, lr_step_gamma=0.5).lr_at(5) == pytest.approx(3e-3 / 4)
    cfg = _cfg()
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        _cfg(learning_rate=0)
    with pytest.raises(ValueError):
        _cfg(train_components=("attention",))
    with pytest.raises(ValueError):
        train([], _cfg())
