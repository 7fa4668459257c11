import numpy as np
import pytest
import torch

from beamsim.errors import DataError
from beamsim.learner.nets import ModelConfig, build_model, predict
from beamsim.learner.train import (
    TrainSchedule,
    load_checkpoint,
    save_checkpoint,
    save_history_csv,
    train,
)
from conftest import make_separable_dataset

CFG = ModelConfig(input_shape=(8, 8), feature_dim=16, fine_beam_count=4, fusion="auto")
FAST = dict(batch_size=32, warmup_epochs=2)


class TestTrainBasics:
    def test_zero_epochs_returns_initialized_model(self, separable_dataset):
        model, history = train(separable_dataset, CFG, TrainSchedule(epochs=0), seed=1)
        assert history == []
        fresh = build_model(CFG, seed=1)
        for a, b in zip(model.parameters(), fresh.parameters()):
            assert torch.equal(a, b)

    def test_requires_train_and_val_splits(self, separable_dataset):
        separable_dataset.split["val"] = []
        with pytest.raises(DataError):
            train(separable_dataset, CFG, TrainSchedule(epochs=1, **FAST), seed=1)

    def test_linear_warmup_rate(self, separable_dataset):
        schedule = TrainSchedule(epochs=2, batch_size=32, warmup_epochs=10, peak_lr=5e-4)
        _, history = train(separable_dataset, CFG, schedule, seed=1)
        # at the end of epoch e the lr is peak * (e+1) / warmup_epochs
        assert history[0]["lr"] == pytest.approx(5e-4 * 1 / 10)
        assert history[1]["lr"] == pytest.approx(5e-4 * 2 / 10)

    def test_history_columns(self, separable_dataset, tmp_path):
        _, history = train(separable_dataset, CFG, TrainSchedule(epochs=2, **FAST), seed=1)
        assert {"epoch", "lr", "j_pos", "j_bm", "j_adv", "j_auto", "val_top1"} <= set(history[0])
        save_history_csv(history, tmp_path / "h.csv")
        header = (tmp_path / "h.csv").read_text().splitlines()[0]
        assert header == "epoch,lr,j_pos,j_bm,j_adv,j_auto,val_top1"


class TestLearnability:
    def test_separable_dataset_reaches_high_top1(self):
        dataset = make_separable_dataset(n_samples=200, seed=3)
        schedule = TrainSchedule(epochs=30, batch_size=16, warmup_epochs=2, peak_lr=3e-3)
        model, history = train(dataset, CFG, schedule, seed=3)
        assert history[-1]["val_top1"] >= 0.9
        # task loss strictly decreases over the first five epochs
        task = [h["j_pos"] * CFG.lambda_pos + h["j_bm"] * CFG.lambda_bm for h in history[:5]]
        assert all(a > b for a, b in zip(task, task[1:]))
        # trained model beats the majority class on the held-out split
        feats = np.stack([s.features for s in dataset.samples])
        labels = np.array([s.label_fine_beam for s in dataset.samples])
        sectors = np.array([s.sector_id for s in dataset.samples])
        test_idx = dataset.split["test"]
        beams, _ = predict(model, feats[test_idx], sectors[test_idx])
        top1 = float(np.mean(beams == labels[test_idx]))
        majority = max(np.bincount(labels[test_idx])) / len(test_idx)
        assert top1 > majority

    def test_gan_variant_trains_without_nan(self):
        dataset = make_separable_dataset(n_samples=120, seed=5)
        cfg = ModelConfig(
            input_shape=(8, 8), feature_dim=16, fine_beam_count=4, fusion="gan", disc_norm="batch"
        )
        model, history = train(dataset, cfg, TrainSchedule(epochs=5, **FAST), seed=5)
        assert len(history) == 5
        assert all(np.isfinite(h["j_adv"]) for h in history)
        assert not any(h["diverged"] for h in history)


class TestDeterminism:
    def test_same_seed_identical_checkpoints(self, tmp_path):
        for name in ("a", "b"):
            dataset = make_separable_dataset(n_samples=80, seed=7)
            model, _ = train(dataset, CFG, TrainSchedule(epochs=3, **FAST), seed=9)
            save_checkpoint(model, tmp_path / name, seed=9)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_different_seed_changes_parameters(self, tmp_path):
        dataset = make_separable_dataset(n_samples=80, seed=7)
        m1, _ = train(dataset, CFG, TrainSchedule(epochs=1, **FAST), seed=1)
        m2, _ = train(dataset, CFG, TrainSchedule(epochs=1, **FAST), seed=2)
        same = all(torch.equal(a, b) for a, b in zip(m1.parameters(), m2.parameters()))
        assert not same


class TestDivergenceHandling:
    def test_nan_aborts_with_last_good_state(self):
        dataset = make_separable_dataset(n_samples=80, seed=11)
        dataset.samples[dataset.split["train"][0]].features[0, 0] = np.inf
        model, history = train(dataset, CFG, TrainSchedule(epochs=4, **FAST), seed=11)
        assert history[-1]["diverged"]
        assert len(history) < 4
        for p in model.parameters():
            assert torch.all(torch.isfinite(p))


class TestCheckpointIo:
    def test_roundtrip_preserves_parameters_and_config(self, tmp_path):
        dataset = make_separable_dataset(n_samples=80, seed=13)
        model, history = train(dataset, CFG, TrainSchedule(epochs=2, **FAST), seed=13)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path, seed=13, epoch=2, metrics={"val_top1": history[-1]["val_top1"]})
        loaded, header = load_checkpoint(path)
        assert header["config"]["fusion"] == "auto"
        assert header["epoch"] == 2
        for a, b in zip(model.parameters(), loaded.parameters()):
            assert torch.equal(a, b)
        np.testing.assert_array_equal(loaded.pos_scaler.mean, model.pos_scaler.mean)

    def test_predictions_survive_roundtrip(self, tmp_path):
        dataset = make_separable_dataset(n_samples=80, seed=13)
        model, _ = train(dataset, CFG, TrainSchedule(epochs=2, **FAST), seed=13)
        save_checkpoint(model, tmp_path / "m.ckpt")
        loaded, _ = load_checkpoint(tmp_path / "m.ckpt")
        feats = np.stack([s.features for s in dataset.samples[:10]])
        sectors = np.array([s.sector_id for s in dataset.samples[:10]])
        a, pos_a = predict(model, feats, sectors)
        b, pos_b = predict(loaded, feats, sectors)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(pos_a, pos_b)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(DataError):
            load_checkpoint(path)
