"""Training loop: Adam on mean absolute error over slice or patch pairs."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .config import TrainConfig, UNetConfig
from .data import (load_dataset, pad_to_multiple, sample_patch, slice_pairs)
from .model import ResidualUNet, build_unet


@dataclass
class TrainResult:
    """Per-epoch loss history; the model itself is trained in place."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    steps: int = 0

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


def _batches(n: int, batch: int, order: np.ndarray):
    for i in range(0, n, batch):
        yield order[i:i + batch]


def _slice_tensor(stack: np.ndarray, idx, mult: int) -> torch.Tensor:
    block = stack[idx]
    block, _ = pad_to_multiple(block, mult, axes=(1, 2))
    return torch.from_numpy(block).unsqueeze(1)


def _eval_slices(model, xs, ys, batch, mult) -> float:
    """Mean absolute error over a slice stack, batched, no gradients."""
    total = 0.0
    model.eval()
    with torch.no_grad():
        for i in range(0, xs.shape[0], batch):
            idx = np.arange(i, min(i + batch, xs.shape[0]))
            x = _slice_tensor(xs, idx, mult)
            y = _slice_tensor(ys, idx, mult)
            diff = (model(x) - y).abs()
            total += float(diff.mean().item()) * len(idx)
    return total / xs.shape[0]


def _train_slices(model, train_pairs, val_pairs, cfg, seed) -> TrainResult:
    xs, ys = slice_pairs(train_pairs, cfg.axis)
    vxs = vys = None
    if val_pairs:
        vxs, vys = slice_pairs(val_pairs, cfg.axis)
    batch = cfg.resolved_batch_size
    mult = model.spatial_multiple
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.resolved_lr)
    loss_fn = torch.nn.L1Loss()
    result = TrainResult()
    for _ in range(cfg.resolved_epochs):
        model.train()
        order = rng.permutation(xs.shape[0])
        epoch_total = 0.0
        for idx in _batches(xs.shape[0], batch, order):
            x = _slice_tensor(xs, idx, mult)
            y = _slice_tensor(ys, idx, mult)
            opt.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            opt.step()
            epoch_total += float(loss.item()) * len(idx)
            result.steps += 1
        result.train_loss.append(epoch_total / xs.shape[0])
        if vxs is not None:
            result.val_loss.append(_eval_slices(model, vxs, vys, batch, mult))
    return result


def _centered_patch(data: np.ndarray, size: int) -> np.ndarray:
    data = np.asarray(data, dtype=np.float32)
    pad = [(0, max(0, size - s)) for s in data.shape]
    if any(p[1] for p in pad):
        data = np.pad(data, pad, mode="edge")
    corner = [(s - size) // 2 for s in data.shape]
    sl = tuple(slice(c, c + size) for c in corner)
    return data[sl]


def _train_patches(model, train_pairs, val_pairs, cfg, seed) -> TrainResult:
    size = cfg.patch_size
    if size % model.spatial_multiple != 0:
        raise ValueError(
            f"patch_size must be a multiple of {model.spatial_multiple}")
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.resolved_lr)
    loss_fn = torch.nn.L1Loss()
    result = TrainResult()
    # one epoch visits each volume with enough patches to roughly cover it
    per_volume = [int(np.prod([math.ceil(s / size) for s in p.low.shape]))
                  for p in train_pairs]
    val_patches = [(torch.from_numpy(_centered_patch(p.low, size))[None, None],
                    torch.from_numpy(_centered_patch(p.normal, size))[None, None])
                   for p in val_pairs]
    for _ in range(cfg.resolved_epochs):
        model.train()
        epoch_total = 0.0
        n_steps = 0
        order = rng.permutation(len(train_pairs))
        for vi in order:
            p = train_pairs[vi]
            for _ in range(per_volume[vi]):
                lo_p, no_p = sample_patch(p.low, p.normal, size, rng)
                x = torch.from_numpy(np.ascontiguousarray(lo_p))[None, None]
                y = torch.from_numpy(np.ascontiguousarray(no_p))[None, None]
                opt.zero_grad()
                loss = loss_fn(model(x), y)
                loss.backward()
                opt.step()
                epoch_total += float(loss.item())
                n_steps += 1
                result.steps += 1
        result.train_loss.append(epoch_total / max(n_steps, 1))
        if val_patches:
            model.eval()
            with torch.no_grad():
                v = sum(float((model(x) - y).abs().mean().item())
                        for x, y in val_patches)
            result.val_loss.append(v / len(val_patches))
    return result


def train_on_pairs(model: ResidualUNet, train_pairs, val_pairs,
                   cfg: TrainConfig, seed: int = 0) -> TrainResult:
    """Fit the model on already-normalized volume pairs.

    Deterministic for a fixed seed and thread count; the caller seeds
    torch before building the model if initialization must also repeat.
    """
    if not train_pairs:
        raise ValueError("no training pairs")
    if (cfg.axis == "3d") != (model.config.dims == 3):
        raise ValueError(
            f"axis {cfg.axis!r} does not match a {model.config.dims}D model")
    torch.manual_seed(seed)
    if cfg.axis == "3d":
        return _train_patches(model, train_pairs, val_pairs, cfg, seed)
    return _train_slices(model, train_pairs, val_pairs, cfg, seed)


def train(model: ResidualUNet, manifest_path, cfg: TrainConfig,
          seed: int = 0) -> TrainResult:
    """Fit on a dataset manifest: train split fits, val split is monitored."""
    ds = load_dataset(manifest_path, normalized=True)
    return train_on_pairs(model, ds.split("train"), ds.split("val"), cfg, seed)


def save_weights(path, model: ResidualUNet, bounds: tuple[float, float],
                 axis: str, patch_size: int | None = None,
                 extra: dict | None = None) -> None:
    """Write weights plus a JSON sidecar describing how to reuse them.

    The sidecar records the architecture, the slicing axis, and the
    dataset-global normalization bounds the model was trained under.
    """
    torch.save(model.state_dict(), path)
    sidecar = {
        "model": model.config.to_dict(),
        "axis": axis,
        "normalization": {"lo": float(bounds[0]), "hi": float(bounds[1])},
        "patch_size": patch_size,
    }
    if extra:
        sidecar.update(extra)
    with open(f"{path}.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_weights(path) -> tuple[ResidualUNet, dict]:
    """Rebuild a model from weights + sidecar; returns (model, sidecar)."""
    sidecar_path = f"{path}.json"
    if not os.path.exists(sidecar_path):
        raise FileNotFoundError(f"missing sidecar {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    model, _ = build_unet(UNetConfig.from_dict(sidecar["model"]))
    state = torch.load(path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model, sidecar
