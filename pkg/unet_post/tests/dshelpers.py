"""Shared builders for the test suite: tiny volumes and dataset trees."""

import json
import os

import numpy as np
from scipy.ndimage import gaussian_filter

from unet_post.volio import VolumeFile, write_volume


def grid_dict(nz, ny, nx, voxel=0.5):
    return {"nx": nx, "ny": ny, "nz": nz, "voxel_size": voxel,
            "origin": [0.0, 0.0, 0.0]}


def smooth_volume(shape, seed, lo=0.0, hi=0.04):
    """Blobby nonnegative field, loosely like an attenuation map."""
    rng = np.random.default_rng(seed)
    v = gaussian_filter(rng.normal(size=shape), 2.0)
    v = (v - v.min()) / (v.max() - v.min())
    return (lo + (hi - lo) * v).astype(np.float32)


def build_tiny_dataset(out_dir, n=3, shape=(16, 16, 16), seed=40):
    """Paired files + manifest in the dataset layout, no toolkit needed.

    Splits are train, train, val, test, ... so n=3 gives two train pairs
    and one val pair.
    """
    os.makedirs(out_dir, exist_ok=True)
    splits = ["train", "train", "val", "test"] * ((n + 3) // 4)
    entries = []
    lo, hi = np.inf, -np.inf
    rng = np.random.default_rng(seed)
    for v in range(n):
        vid = f"vol{v:03d}"
        normal = smooth_volume(shape, seed + 7 * v)
        low = normal + 0.004 * rng.normal(size=shape).astype(np.float32)
        g = grid_dict(*shape)
        write_volume(os.path.join(out_dir, f"{vid}_normal.vol"),
                     VolumeFile(normal, g, None, {"volume_id": vid}))
        write_volume(os.path.join(out_dir, f"{vid}_low.vol"),
                     VolumeFile(low.astype(np.float32), g, None,
                                {"volume_id": vid}))
        if splits[v] == "train":
            lo = min(lo, float(normal.min()), float(low.min()))
            hi = max(hi, float(normal.max()), float(low.max()))
        entries.append({"id": vid, "split": splits[v],
                        "normal": f"{vid}_normal.vol",
                        "low": f"{vid}_low.vol"})
    manifest = {
        "format": "cbct-dataset",
        "version": 1,
        "normalization": {"kind": "global_minmax",
                          "lo": float(lo), "hi": float(hi)},
        "volumes": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path
