"""End-to-end acceptance checks for the post-processing package.

Each test prints one [PASS]/[FAIL] line so the run reads as a scorecard.
The last test trains real models against paired reconstructions produced
by the reconstruction CLI, so it needs `cbct` on PATH and a few minutes.
"""

import subprocess
import time

import numpy as np
import pytest
import torch
from scipy.ndimage import gaussian_filter

from unet_post.config import MpWeights, TrainConfig, UNetConfig
from unet_post.data import VolumePair
from unet_post.infer import combine_mp, infer_volume
from unet_post.loo import format_table, loo_harness
from unet_post.model import build_unet
from unet_post.train import train_on_pairs


def _verdict(capsys, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def paired_dataset(tmp_path_factory):
    """Four paired 64-cube volumes from the reconstruction CLI."""
    out = tmp_path_factory.mktemp("pairs64")
    cmd = ["cbct", "make-dataset", "--n-volumes", "4",
           "--grid", "64", "--voxel-size", "0.3",
           "--views", "60", "--det-rows", "96", "--det-cols", "96",
           "--pitch", "0.4", "--noise", "--i0", "1e5",
           "--keep-every", "5", "--seed", "21", "--out-dir", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return str(out / "manifest.json")


def test_parameter_counts(capsys):
    targets = (
        (2, 64, 28_000_000, 34_000_000),
        (3, 32, 19_000_000, 23_000_000),
        (3, 64, 78_000_000, 90_000_000),
    )
    counts = []
    ok = True
    for dims, base, lo, hi in targets:
        model, n = build_unet(UNetConfig(dims=dims, base_filters=base))
        del model
        counts.append(n)
        ok = ok and lo <= n <= hi
    _verdict(capsys, "parameter counts", ok,
             f"2D/64 {counts[0]:,} in [28M,34M]; 3D/32 {counts[1]:,} in "
             f"[19M,23M]; 3D/64 {counts[2]:,} in [78M,90M]")


def test_residual_identity(capsys):
    torch.manual_seed(0)
    model, _ = build_unet(UNetConfig(dims=2, base_filters=64))
    vol = np.random.default_rng(1).normal(size=(4, 32, 32)).astype(np.float32)
    out = infer_volume(model, vol, "axial")
    exact2 = np.array_equal(out, vol)
    model3, _ = build_unet(UNetConfig(dims=3, base_filters=4))
    out3 = infer_volume(model3, vol, "3d", patch_size=32)
    exact3 = np.array_equal(out3, vol)
    _verdict(capsys, "residual identity", exact2 and exact3,
             f"zero-initialized head reproduces the input exactly: "
             f"2D {exact2}, 3D tiled {exact3}")


def test_overfit_smoke(capsys):
    # one 32x32 slice pair; 200 optimizer steps must cut the loss >= 10x
    torch.set_num_threads(1)
    rng = np.random.default_rng(7)
    normal = gaussian_filter(rng.normal(size=(1, 32, 32)), (0, 3.0, 3.0))
    normal = (normal - normal.min()) / (normal.max() - normal.min()) * 1.2 - 0.6
    low = normal + 0.15 * rng.normal(size=normal.shape)
    pair = VolumePair("p0", "train", low.astype(np.float32),
                      normal.astype(np.float32))
    torch.manual_seed(1)
    model, _ = build_unet(UNetConfig(dims=2, base_filters=16))
    cfg = TrainConfig(axis="axial", epochs=200, batch_size=1)
    t0 = time.time()
    res = train_on_pairs(model, [pair], [], cfg, seed=1)
    ratio = res.train_loss[0] / min(res.train_loss)
    ok = res.steps == 200 and ratio >= 10.0
    _verdict(capsys, "overfit smoke", ok,
             f"MAE {res.train_loss[0]:.4f} -> {min(res.train_loss):.4f} "
             f"({ratio:.1f}x >= 10x) in {res.steps} steps, "
             f"{time.time() - t0:.1f}s")


def test_combine_mp_oracle(capsys):
    rng = np.random.default_rng(3)
    shape = (24, 24, 24)
    a, c, s = (rng.normal(size=shape).astype(np.float32) for _ in range(3))
    out = combine_mp(a, c, s, MpWeights())
    expect = np.empty(shape, dtype=np.float64)
    for i in range(shape[0]):
        for j in range(shape[1]):
            for k in range(shape[2]):
                expect[i, j, k] = (0.5 * float(a[i, j, k])
                                   + 0.3 * float(c[i, j, k])
                                   + 0.2 * float(s[i, j, k]))
    err = float(np.max(np.abs(out.astype(np.float64) - expect)))
    ok = err < 1e-7
    _verdict(capsys, "multi-plane fusion oracle", ok,
             f"max |fused - scalar loop| = {err:.2e} (< 1e-7) on {shape}")


def test_desk_scale_loo(capsys, paired_dataset):
    t0 = time.time()
    cfg = TrainConfig(axis="axial", epochs=12)
    report = loo_harness(paired_dataset, cfg, seed=3,
                         model_config=UNetConfig(dims=2, base_filters=16))
    elapsed = time.time() - t0

    improved = [(f["id"], f["input"]["nrmse"], f["output"]["nrmse"])
                for f in report["folds"]]
    all_better = all(o < i for _, i, o in improved)
    table = format_table(report)
    schema_ok = (report["n_folds"] == 4
                 and len(table.splitlines()) == 3
                 and all(set(report["summary"][side][m]) == {"mean", "std"}
                         for side in ("input", "output")
                         for m in ("nrmse", "psnr", "ssim")))
    in_mean = report["summary"]["input"]["nrmse"]["mean"]
    out_mean = report["summary"]["output"]["nrmse"]["mean"]
    ok = all_better and schema_ok and elapsed < 1800.0
    with capsys.disabled():
        print(table)
    detail = (f"NRMSE per fold " +
              "; ".join(f"{i:.3f}->{o:.3f}" for _, i, o in improved) +
              f"; mean {in_mean:.3f}->{out_mean:.3f}; 4 folds, "
              f"{elapsed:.0f}s (< 1800s)")
    _verdict(capsys, "held-out improvement + cross-validation table", ok, detail)
