"""Volume comparison metrics: NRMSE, PSNR, and Gaussian-window SSIM.

All metrics compare a test volume against a reference; the reference
defines normalization (its norm for NRMSE, its value range for PSNR and
SSIM).  Inputs may be Volumes or bare arrays of equal shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11-sample window per axis


def _as_array(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def _pair(test, ref, mask) -> tuple[np.ndarray, np.ndarray]:
    t = _as_array(test)
    r = _as_array(ref)
    if t.shape != r.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {r.shape}")
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.shape != r.shape:
            raise ValueError("mask shape mismatch")
        if not m.any():
            raise ValueError("mask selects no voxels")
        t = t[m]
        r = r[m]
    return t, r


def nrmse(test, ref, mask=None) -> float:
    """``||test - ref||_2 / ||ref||_2`` over the (masked) voxels.

    Raises
    ------
    ValueError
        On shape mismatch or an all-zero reference.
    """
    t, r = _pair(test, ref, mask)
    denom = float(np.linalg.norm(r.ravel()))
    if denom == 0.0:
        raise ValueError("reference norm is zero; NRMSE undefined")
    return float(np.linalg.norm((t - r).ravel())) / denom


def psnr(test, ref, mask=None) -> float:
    """Peak signal-to-noise ratio in dB, peak = ref.max() - ref.min().

    Identical volumes give ``math.inf``.  Scaling both inputs by the same
    positive factor leaves the value unchanged.

    Raises
    ------
    ValueError
        On shape mismatch or a constant reference (zero peak).
    """
    t, r = _pair(test, ref, mask)
    peak = float(r.max() - r.min())
    if peak == 0.0:
        raise ValueError("reference range is zero; PSNR undefined")
    mse = float(np.mean((t - r) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window() -> np.ndarray:
    d = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    g = np.exp(-(d**2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _windowed(arr: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    g = _gaussian_window()
    out = arr
    for ax in axes:
        out = correlate1d(out, g, axis=ax, mode="constant")
    return out


def _crop_valid(arr: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    sl = [slice(None)] * arr.ndim
    for ax in axes:
        sl[ax] = slice(SSIM_RADIUS, arr.shape[ax] - SSIM_RADIUS)
    return arr[tuple(sl)]


def _ssim_mean(t: np.ndarray, r: np.ndarray, axes: tuple[int, ...],
               peak: float) -> float:
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_t = _windowed(t, axes)
    mu_r = _windowed(r, axes)
    var_t = _windowed(t * t, axes) - mu_t**2
    var_r = _windowed(r * r, axes) - mu_r**2
    cov = _windowed(t * r, axes) - mu_t * mu_r
    num = (2.0 * mu_t * mu_r + c1) * (2.0 * cov + c2)
    den = (mu_t**2 + mu_r**2 + c1) * (var_t + var_r + c2)
    ssim_map = num / den
    return float(np.mean(_crop_valid(ssim_map, axes)))


def ssim(test, ref, mode: str = "3d") -> float:
    """Mean structural similarity with an 11-tap Gaussian window (sigma 1.5).

    mode "3d" uses a full 3-d window; "2d" averages the per-axial-slice
    (y, x) SSIM over all slices.  Only windows fully inside the array
    count (5 voxels trimmed per windowed axis), matching a brute-force
    sliding-window evaluation exactly.

    The dynamic range is taken from the reference: ``ref.max() - ref.min()``.

    Raises
    ------
    ValueError
        On shape mismatch, a constant reference, a windowed axis shorter
        than 11, or an unknown mode.
    """
    t = _as_array(test)
    r = _as_array(ref)
    if t.shape != r.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {r.shape}")
    if t.ndim != 3:
        raise ValueError("expected 3-d arrays")
    peak = float(r.max() - r.min())
    if peak == 0.0:
        raise ValueError("reference range is zero; SSIM undefined")
    win = 2 * SSIM_RADIUS + 1
    if mode == "3d":
        axes = (0, 1, 2)
    elif mode == "2d":
        axes = (1, 2)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for ax in axes:
        if t.shape[ax] < win:
            raise ValueError(f"axis {ax} shorter than the {win}-tap window")
    return _ssim_mean(t, r, axes, peak)


@dataclass(frozen=True)
class MetricsReport:
    """One test-vs-reference comparison. ``region`` labels any mask used."""

    nrmse: float
    psnr: float
    ssim: float
    region: str | None = None

    def to_dict(self) -> dict:
        return {
            "nrmse": self.nrmse,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "region": self.region,
        }


def evaluate(test, ref, mask=None, region: str | None = None,
             ssim_mode: str = "3d") -> MetricsReport:
    """All three metrics at once.

    The mask applies to NRMSE and PSNR; SSIM always uses the full grid
    since its window needs spatial context.
    """
    return MetricsReport(
        nrmse=nrmse(test, ref, mask),
        psnr=psnr(test, ref, mask),
        ssim=ssim(test, ref, mode=ssim_mode),
        region=region,
    )
