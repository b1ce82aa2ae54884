"""Dataset manifest access, intensity normalization, and slicing.

Volumes are arrays ordered [z, y, x].  Slicing axes:

    axial    -> planes of constant z, shape (ny, nx)
    coronal  -> planes of constant y, shape (nz, nx)
    sagittal -> planes of constant x, shape (nz, ny)
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .volio import VolumeFile, read_volume

SLICE_AXES = {"axial": 0, "coronal": 1, "sagittal": 2}


def normalize(data: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affine map [lo, hi] -> [-1, 1] with clamping, float32 output."""
    if not hi > lo:
        raise ValueError("require hi > lo")
    y = (np.asarray(data, dtype=np.float64) - lo) * (2.0 / (hi - lo)) - 1.0
    return np.clip(y, -1.0, 1.0).astype(np.float32)


def denormalize(data: np.ndarray, lo: float, hi: float) -> np.ndarray:
    y = (np.asarray(data, dtype=np.float64) + 1.0) * (0.5 * (hi - lo)) + lo
    return y.astype(np.float32)


def extract_slices(data: np.ndarray, axis: str) -> np.ndarray:
    """Stack of 2D planes along the named axis, shape (n, h, w)."""
    return np.ascontiguousarray(np.moveaxis(data, SLICE_AXES[axis], 0))


def restack_slices(slices: np.ndarray, axis: str) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(slices, 0, SLICE_AXES[axis]))


@dataclass
class VolumePair:
    """A training example: degraded input and its clean target."""

    id: str
    split: str
    low: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        if self.low.shape != self.normal.shape:
            raise ValueError(
                f"{self.id}: pair members disagree, "
                f"{self.low.shape} vs {self.normal.shape}")


@dataclass
class Dataset:
    """Manifest contents with volumes loaded and normalized to [-1, 1]."""

    pairs: list
    lo: float
    hi: float
    manifest: dict
    base_dir: str

    def split(self, name: str) -> list:
        return [p for p in self.pairs if p.split == name]


def load_manifest(path: str | os.PathLike) -> tuple[dict, str]:
    """Read a manifest file; returns (manifest dict, directory of the file)."""
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != "cbct-dataset":
        raise ValueError(f"{path}: not a dataset manifest")
    return manifest, os.path.dirname(os.path.abspath(path))


def load_dataset(manifest_path: str | os.PathLike,
                 normalized: bool = True) -> Dataset:
    """Load every pair listed in a manifest.

    File names in the manifest are relative to the manifest's directory.
    With normalized=True intensities are mapped to [-1, 1] using the
    manifest's dataset-global bounds.
    """
    manifest, base = load_manifest(manifest_path)
    rec = manifest.get("normalization") or {}
    lo, hi = float(rec.get("lo", 0.0)), float(rec.get("hi", 1.0))
    pairs = []
    for entry in manifest["volumes"]:
        low = read_volume(os.path.join(base, entry["low"])).data
        normal = read_volume(os.path.join(base, entry["normal"])).data
        if normalized:
            low = normalize(low, lo, hi)
            normal = normalize(normal, lo, hi)
        pairs.append(VolumePair(entry["id"], entry["split"], low, normal))
    return Dataset(pairs, lo, hi, manifest, base)


def slice_pairs(pairs, axis: str) -> tuple[np.ndarray, np.ndarray]:
    """All 2D planes from all pairs, as (inputs, targets) stacks."""
    xs, ys = [], []
    for p in pairs:
        xs.append(extract_slices(p.low, axis))
        ys.append(extract_slices(p.normal, axis))
    return (np.concatenate(xs, axis=0).astype(np.float32, copy=False),
            np.concatenate(ys, axis=0).astype(np.float32, copy=False))


def pad_to_multiple(data: np.ndarray, mult: int,
                    axes: tuple | None = None) -> tuple[np.ndarray, tuple]:
    """Edge-pad ``axes`` (default: all) up to multiples of ``mult``.

    Padding is centered.  Returns the padded array and the slice tuple
    that crops back to the original extent.
    """
    if axes is None:
        axes = tuple(range(data.ndim))
    pads, crops = [], []
    for ax, s in enumerate(data.shape):
        if ax in axes:
            target = ((s + mult - 1) // mult) * mult
            before = (target - s) // 2
            after = target - s - before
        else:
            before = after = 0
        pads.append((before, after))
        crops.append(slice(before, before + s))
    if any(p != (0, 0) for p in pads):
        data = np.pad(data, pads, mode="edge")
    return data, tuple(crops)


def sample_patch(low: np.ndarray, normal: np.ndarray, size: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One random cube of edge ``size`` from a pair, same location in both.

    Volumes smaller than the patch along an axis are edge-padded to fit.
    """
    low = np.asarray(low, dtype=np.float32)
    normal = np.asarray(normal, dtype=np.float32)
    pad = [(0, max(0, size - s)) for s in low.shape]
    if any(p[1] for p in pad):
        low = np.pad(low, pad, mode="edge")
        normal = np.pad(normal, pad, mode="edge")
    corner = [int(rng.integers(0, s - size + 1)) for s in low.shape]
    sl = tuple(slice(c, c + size) for c in corner)
    return low[sl], normal[sl]
