import numpy as np
import pytest
import torch

from unet_post.config import TrainConfig, UNetConfig
from unet_post.data import VolumePair, load_dataset
from unet_post.model import build_unet
from unet_post.train import (TrainResult, load_weights, save_weights, train,
                             train_on_pairs)

from dshelpers import smooth_volume


def noisy_pair(shape=(2, 16, 16), seed=0, noise=0.2):
    normal = smooth_volume(shape, seed, lo=-0.5, hi=0.5)
    rng = np.random.default_rng(seed + 1)
    low = normal + noise * rng.normal(size=shape).astype(np.float32)
    return VolumePair(f"p{seed}", "train", low.astype(np.float32), normal)


def small_model(dims=2, base=4, seed=0):
    torch.manual_seed(seed)
    model, _ = build_unet(UNetConfig(dims=dims, base_filters=base))
    return model


class TestConfigResolution:
    def test_epoch_defaults(self):
        assert TrainConfig(axis="axial").resolved_epochs == 50
        assert TrainConfig(axis="3d", patch_size=16).resolved_epochs == 100
        assert TrainConfig(axis="axial", epochs=7).resolved_epochs == 7

    def test_lr_defaults(self):
        assert TrainConfig(axis="axial").resolved_lr == 1e-3
        assert TrainConfig(axis="coronal").resolved_lr == 1e-3
        assert TrainConfig(axis="sagittal").resolved_lr == 1e-2
        assert TrainConfig(axis="3d", patch_size=16).resolved_lr == 1e-3
        assert TrainConfig(axis="axial", learning_rate=5e-4).resolved_lr == 5e-4

    def test_batch_defaults(self):
        assert TrainConfig(axis="axial").resolved_batch_size == 10
        assert TrainConfig(axis="3d", patch_size=16).resolved_batch_size == 1

    def test_validation(self):
        with pytest.raises(ValueError, match="axis"):
            TrainConfig(axis="diagonal")
        with pytest.raises(ValueError, match="patch_size"):
            TrainConfig(axis="3d")
        with pytest.raises(ValueError):
            TrainConfig(axis="axial", epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(axis="axial", batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(axis="3d", patch_size=8)


class TestTrainSlices:
    def test_loss_decreases(self):
        pair = noisy_pair()
        model = small_model(base=8)
        cfg = TrainConfig(axis="axial", epochs=40, batch_size=1)
        res = train_on_pairs(model, [pair], [], cfg, seed=0)
        assert isinstance(res, TrainResult)
        assert res.epochs == 40
        assert res.steps == 40 * 2
        assert res.train_loss[-1] < 0.7 * res.train_loss[0]

    def test_validation_history_recorded(self):
        tr = noisy_pair(seed=1)
        va = noisy_pair(seed=2)
        model = small_model()
        cfg = TrainConfig(axis="axial", epochs=3)
        res = train_on_pairs(model, [tr], [va], cfg, seed=0)
        assert len(res.val_loss) == 3
        assert all(np.isfinite(v) for v in res.val_loss)

    def test_deterministic_given_seed(self):
        cfg = TrainConfig(axis="axial", epochs=4)
        histories = []
        for _ in range(2):
            pair = noisy_pair(seed=3)
            model = small_model(seed=11)
            res = train_on_pairs(model, [pair], [], cfg, seed=5)
            histories.append(res.train_loss)
        assert histories[0] == histories[1]

    def test_coronal_axis_trains(self):
        pair = noisy_pair(shape=(16, 4, 16), seed=4)
        model = small_model()
        cfg = TrainConfig(axis="coronal", epochs=2)
        res = train_on_pairs(model, [pair], [], cfg, seed=0)
        assert res.epochs == 2

    def test_rejects_empty_training_set(self):
        with pytest.raises(ValueError, match="no training pairs"):
            train_on_pairs(small_model(), [], [],
                           TrainConfig(axis="axial", epochs=1), 0)

    def test_rejects_axis_model_mismatch(self):
        pair = noisy_pair()
        with pytest.raises(ValueError, match="does not match"):
            train_on_pairs(small_model(dims=3, base=2), [pair],
                           [], TrainConfig(axis="axial", epochs=1), 0)
        with pytest.raises(ValueError, match="does not match"):
            train_on_pairs(small_model(), [pair], [],
                           TrainConfig(axis="3d", epochs=1, patch_size=16), 0)


class TestTrainPatches:
    def test_patch_training_runs_and_improves(self):
        pair = noisy_pair(shape=(16, 16, 16), seed=6)
        model = small_model(dims=3, base=2)
        cfg = TrainConfig(axis="3d", epochs=25, patch_size=16)
        res = train_on_pairs(model, [pair], [], cfg, seed=0)
        assert res.steps == 25
        assert res.train_loss[-1] < res.train_loss[0]

    def test_patch_val_loss_recorded(self):
        tr = noisy_pair(shape=(16, 16, 16), seed=7)
        va = noisy_pair(shape=(16, 16, 16), seed=8)
        model = small_model(dims=3, base=2)
        cfg = TrainConfig(axis="3d", epochs=2, patch_size=16)
        res = train_on_pairs(model, [tr], [va], cfg, seed=0)
        assert len(res.val_loss) == 2

    def test_rejects_indivisible_patch(self):
        pair = noisy_pair(shape=(16, 16, 16), seed=9)
        model = small_model(dims=3, base=2)
        cfg = TrainConfig(axis="3d", epochs=1, patch_size=24)
        with pytest.raises(ValueError, match="multiple"):
            train_on_pairs(model, [pair], [], cfg, 0)


class TestManifestTraining:
    def test_train_uses_manifest_splits(self, tiny_manifest):
        model = small_model()
        cfg = TrainConfig(axis="axial", epochs=2)
        res = train(model, tiny_manifest, cfg, seed=0)
        assert res.epochs == 2
        assert len(res.val_loss) == 2  # the val pair is monitored


class TestWeightsIo:
    def test_save_load_round_trip(self, tmp_path):
        pair = noisy_pair(seed=10)
        model = small_model(base=4, seed=2)
        cfg = TrainConfig(axis="axial", epochs=2)
        train_on_pairs(model, [pair], [], cfg, seed=0)
        path = tmp_path / "w.pt"
        save_weights(path, model, (0.0, 0.04), "axial",
                     extra={"seed": 0})
        back, sidecar = load_weights(path)
        assert sidecar["model"]["base_filters"] == 4
        assert sidecar["axis"] == "axial"
        assert sidecar["normalization"] == {"lo": 0.0, "hi": 0.04}
        assert sidecar["seed"] == 0
        for a, b in zip(model.state_dict().values(),
                        back.state_dict().values()):
            assert torch.equal(a, b)
        x = torch.randn(1, 1, 16, 16)
        with torch.no_grad():
            assert torch.equal(model.eval()(x), back(x))

    def test_load_without_sidecar_fails(self, tmp_path):
        model = small_model()
        torch.save(model.state_dict(), tmp_path / "bare.pt")
        with pytest.raises(FileNotFoundError, match="sidecar"):
            load_weights(tmp_path / "bare.pt")
