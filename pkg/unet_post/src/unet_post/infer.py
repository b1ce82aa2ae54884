"""Whole-volume inference and multi-plane fusion.

2D models run independently on every plane along the chosen axis and
the outputs are restacked.  3D models run on overlapping patches (25%
overlap) whose predictions are averaged uniformly where they meet.
"""

from __future__ import annotations

import numpy as np
import torch

from .config import MpWeights
from .data import SLICE_AXES, extract_slices, pad_to_multiple, restack_slices
from .model import ResidualUNet
from .volio import VolumeFile


def _as_array(vol) -> np.ndarray:
    if isinstance(vol, VolumeFile):
        return vol.data
    return np.asarray(vol, dtype=np.float32)


def _like(vol, data: np.ndarray):
    if isinstance(vol, VolumeFile):
        return vol.with_data(data)
    return data


def _infer_slices(model, data: np.ndarray, axis: str, batch: int) -> np.ndarray:
    slices = extract_slices(data, axis).astype(np.float32)
    padded, crops = pad_to_multiple(slices, model.spatial_multiple, axes=(1, 2))
    out = np.empty_like(padded)
    model.eval()
    with torch.no_grad():
        for i in range(0, padded.shape[0], batch):
            x = torch.from_numpy(padded[i:i + batch]).unsqueeze(1)
            out[i:i + batch] = model(x).squeeze(1).numpy()
    return restack_slices(out[:, crops[1], crops[2]], axis)


def _tile_positions(dim: int, patch: int, stride: int) -> list:
    if dim <= patch:
        return [0]
    pos = list(range(0, dim - patch + 1, stride))
    if pos[-1] != dim - patch:
        pos.append(dim - patch)
    return pos


def _infer_tiled(model, data: np.ndarray, patch: int) -> np.ndarray:
    if patch % model.spatial_multiple != 0:
        raise ValueError(
            f"patch_size must be a multiple of {model.spatial_multiple}")
    orig_shape = data.shape
    # a volume smaller than the patch gets centered inside one padded patch
    pads = []
    for s in orig_shape:
        extra = max(0, patch - s)
        pads.append((extra // 2, extra - extra // 2))
    if any(p != (0, 0) for p in pads):
        data = np.pad(data, pads, mode="edge")
    stride = patch - patch // 4
    positions = [_tile_positions(s, patch, stride) for s in data.shape]
    acc = np.zeros(data.shape, dtype=np.float64)
    cnt = np.zeros(data.shape, dtype=np.float64)
    model.eval()
    with torch.no_grad():
        for z in positions[0]:
            for y in positions[1]:
                for x in positions[2]:
                    sl = (slice(z, z + patch), slice(y, y + patch),
                          slice(x, x + patch))
                    tile = torch.from_numpy(
                        np.ascontiguousarray(data[sl], dtype=np.float32))
                    pred = model(tile[None, None])[0, 0].numpy()
                    acc[sl] += pred
                    cnt[sl] += 1.0
    out = (acc / cnt).astype(np.float32)
    crop = tuple(slice(p[0], p[0] + s) for p, s in zip(pads, orig_shape))
    return out[crop]


def infer_volume(model: ResidualUNet, vol, axis: str,
                 patch_size: int | None = None, batch: int = 8):
    """Apply the model to a whole volume; output shape equals input shape.

    ``vol`` may be a raw [z, y, x] array or a VolumeFile; the return type
    matches.  Intensities must already be normalized to the model's
    training bounds.  3D models need ``patch_size``.
    """
    data = _as_array(vol)
    if data.ndim != 3:
        raise ValueError("expected a 3D volume")
    if model.config.dims == 2:
        if axis not in SLICE_AXES:
            raise ValueError(f"axis {axis!r} invalid for a 2D model")
        out = _infer_slices(model, data.astype(np.float32), axis, batch)
    else:
        if axis != "3d":
            raise ValueError(f"axis {axis!r} invalid for a 3D model")
        if patch_size is None:
            raise ValueError("3D inference needs patch_size")
        out = _infer_tiled(model, data.astype(np.float32), patch_size)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("inference produced non-finite values")
    return _like(vol, out)


def combine_mp(f_a, f_c, f_s, w: MpWeights = MpWeights()):
    """Voxel-wise weighted average of axial, coronal, sagittal outputs.

    Array inputs return float64 (the combination is exact in double);
    VolumeFile inputs come back as a VolumeFile, whose payload format is
    float32.
    """
    arrs = [_as_array(v) for v in (f_a, f_c, f_s)]
    if not (arrs[0].shape == arrs[1].shape == arrs[2].shape):
        raise ValueError("inputs must share one grid")
    if isinstance(f_a, VolumeFile):
        for other in (f_c, f_s):
            if isinstance(other, VolumeFile) and other.grid != f_a.grid:
                raise ValueError("inputs must share one grid")
    out = (w.w_axial * arrs[0].astype(np.float64)
           + w.w_coronal * arrs[1].astype(np.float64)
           + w.w_sagittal * arrs[2].astype(np.float64))
    if isinstance(f_a, VolumeFile):
        return f_a.with_data(out.astype(np.float32))
    return out
