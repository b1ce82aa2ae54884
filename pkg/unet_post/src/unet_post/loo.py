"""Leave-one-out cross-validation over a paired dataset.

Each fold trains a fresh model on every volume but one and scores the
held-out prediction against its clean target with the reconstruction
toolkit's metrics command, so the numbers match what that tool reports.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import tempfile
import zlib

import numpy as np
import torch

from .config import TrainConfig, UNetConfig
from .data import denormalize, load_dataset, normalize
from .infer import infer_volume
from .model import build_unet
from .train import train_on_pairs
from .volio import read_volume, write_volume

METRIC_NAMES = ("nrmse", "psnr", "ssim")


def _metrics_cli() -> str:
    exe = shutil.which("cbct")
    if exe is None:
        raise RuntimeError(
            "the 'cbct' command is not on PATH; install the reconstruction "
            "toolkit to score folds")
    return exe


def run_metrics(test_path, ref_path, exe: str | None = None) -> dict:
    """Score one volume against a reference via the metrics command."""
    exe = exe or _metrics_cli()
    proc = subprocess.run(
        [exe, "metrics", "--test", str(test_path), "--ref", str(ref_path),
         "--json"],
        capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"metrics command failed: {proc.stderr.strip()}")
    report = json.loads(proc.stdout)
    return {k: float(report[k]) for k in METRIC_NAMES}


def _fold_seed(base_seed: int, volume_id: str) -> int:
    # tied to the volume id, not the fold index, so reordering the
    # manifest cannot change any fold's result
    return (int(base_seed) * 1_000_003 + zlib.crc32(volume_id.encode())) % 2 ** 31


def _summary(rows: list) -> dict:
    out = {}
    for k in METRIC_NAMES:
        vals = np.array([r[k] for r in rows], dtype=np.float64)
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out[k] = {"mean": float(vals.mean()), "std": std}
    return out


def loo_harness(manifest_path, cfg: TrainConfig, seed: int = 0,
                model_config: UNetConfig | None = None,
                workdir=None, verbose: bool = False) -> dict:
    """Train one model per held-out volume and aggregate its metrics.

    Folds ignore the manifest's split labels: every other volume trains,
    the held-out one tests.  Returns per-fold rows plus mean/std for the
    model outputs and for the untouched degraded inputs.
    """
    exe = _metrics_cli()
    ds = load_dataset(manifest_path, normalized=True)
    if len(ds.pairs) < 3:
        raise ValueError("leave-one-out needs at least 3 volumes")
    if model_config is None:
        dims = 3 if cfg.axis == "3d" else 2
        model_config = UNetConfig(dims=dims,
                                  base_filters=32 if dims == 3 else 64)

    own_tmp = None
    if workdir is None:
        own_tmp = tempfile.TemporaryDirectory(prefix="loo_")
        workdir = own_tmp.name
    os.makedirs(workdir, exist_ok=True)

    entries = {e["id"]: e for e in ds.manifest["volumes"]}
    folds = []
    try:
        for held in ds.pairs:
            fold_seed = _fold_seed(seed, held.id)
            torch.manual_seed(fold_seed)
            model, _ = build_unet(model_config)
            rest = [p for p in ds.pairs if p.id != held.id]
            result = train_on_pairs(model, rest, [], cfg, fold_seed)

            entry = entries[held.id]
            low_file = read_volume(os.path.join(ds.base_dir, entry["low"]))
            ref_path = os.path.join(ds.base_dir, entry["normal"])
            x = normalize(low_file.data, ds.lo, ds.hi)
            pred = infer_volume(model, x, cfg.axis,
                                patch_size=cfg.patch_size)
            pred = denormalize(pred, ds.lo, ds.hi)
            pred_path = os.path.join(workdir, f"pred_{held.id}.vol")
            write_volume(pred_path, low_file.with_data(pred))

            row = {
                "id": held.id,
                "seed": fold_seed,
                "final_train_loss": result.train_loss[-1],
                "input": run_metrics(os.path.join(ds.base_dir, entry["low"]),
                                     ref_path, exe),
                "output": run_metrics(pred_path, ref_path, exe),
            }
            folds.append(row)
            if verbose:
                print(f"fold {held.id}: nrmse {row['input']['nrmse']:.4f} "
                      f"-> {row['output']['nrmse']:.4f}")
    finally:
        if own_tmp is not None:
            own_tmp.cleanup()

    return {
        "n_folds": len(folds),
        "axis": cfg.axis,
        "folds": folds,
        "summary": {
            "input": _summary([r["input"] for r in folds]),
            "output": _summary([r["output"] for r in folds]),
        },
    }


def format_table(report: dict) -> str:
    """Render the aggregate as a two-row mean +/- std table."""
    lines = [f"{'method':<10}" + "".join(f"{k:>22}" for k in METRIC_NAMES)]
    for name, key in (("input", "input"), ("model", "output")):
        row = report["summary"][key]
        cells = "".join(
            f"{row[k]['mean']:.4f} +/- {row[k]['std']:.4f}".rjust(22)
            for k in METRIC_NAMES)
        lines.append(f"{name:<10}" + cells)
    return "\n".join(lines)
