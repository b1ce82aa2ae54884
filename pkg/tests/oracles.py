"""Independent reference implementations the tests compare against.

Everything here is written the slow, obvious way (per-voxel slab
intersection, explicit sliding windows, dense grid search) and shares no
code with the package internals, so agreement is meaningful.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation


def ray_voxel_chords(grid, src, dst):
    """Exact chord length of the (src, dst) line inside every voxel.

    Classic slab intersection evaluated per voxel, O(n^3) per ray.
    Returns an (nz, ny, nx) array of lengths in mm.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    d = dst - src
    h = grid.voxel_size
    xs = grid.axis_coords(0)
    ys = grid.axis_coords(1)
    zs = grid.axis_coords(2)
    out = np.zeros(grid.shape, dtype=np.float64)
    for k, zc in enumerate(zs):
        for j, yc in enumerate(ys):
            for i, xc in enumerate(xs):
                t0, t1 = -np.inf, np.inf
                ok = True
                for c, dc, s0 in ((xc, d[0], src[0]), (yc, d[1], src[1]),
                                  (zc, d[2], src[2])):
                    lo, hi = c - h / 2.0, c + h / 2.0
                    if dc == 0.0:
                        if not (lo <= s0 <= hi):
                            ok = False
                            break
                    else:
                        ta = (lo - s0) / dc
                        tb = (hi - s0) / dc
                        if ta > tb:
                            ta, tb = tb, ta
                        t0 = max(t0, ta)
                        t1 = min(t1, tb)
                if ok and t1 > t0:
                    out[k, j, i] = (t1 - t0) * np.linalg.norm(d)
    return out


def siddon_line_integral(vol_data, grid, src, dst):
    """Exact line integral of a piecewise-constant volume along a ray."""
    chords = ray_voxel_chords(grid, src, dst)
    return float(np.sum(chords * np.asarray(vol_data, dtype=np.float64)))


def kl_prox_grid_search(y_tilde: float, p: float, sigma: float,
                        n_coarse: int = 4001, n_fine: int = 4001) -> float:
    """Two-stage dense minimization of (z-y~)^2/(2 sigma) - p log(1-z)."""
    lo = min(y_tilde, 1.0) - sigma * p - 1.0
    hi = 1.0 - 1e-9
    z = np.linspace(lo, hi, n_coarse)
    phi = (z - y_tilde) ** 2 / (2.0 * sigma) - p * np.log(1.0 - z)
    j = int(np.argmin(phi))
    z2 = np.linspace(z[max(j - 2, 0)], z[min(j + 2, n_coarse - 1)], n_fine)
    phi2 = (z2 - y_tilde) ** 2 / (2.0 * sigma) \
        - p * np.log(np.maximum(1.0 - z2, 1e-300))
    return float(z2[int(np.argmin(phi2))])


def nrmse_loops(test, ref):
    num = 0.0
    den = 0.0
    for t, r in zip(np.asarray(test).ravel(), np.asarray(ref).ravel()):
        num += (t - r) ** 2
        den += r**2
    return np.sqrt(num) / np.sqrt(den)


def psnr_loops(test, ref):
    t = np.asarray(test, dtype=np.float64).ravel()
    r = np.asarray(ref, dtype=np.float64).ravel()
    peak = r.max() - r.min()
    mse = 0.0
    for a, b in zip(t, r):
        mse += (a - b) ** 2
    mse /= t.size
    if mse == 0.0:
        return np.inf
    return 10.0 * np.log10(peak**2 / mse)


def gaussian_window_3d(radius: int = 5, sigma: float = 1.5) -> np.ndarray:
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    g1 = np.exp(-(d**2) / (2.0 * sigma**2))
    g1 /= g1.sum()
    return g1[:, None, None] * g1[None, :, None] * g1[None, None, :]


def ssim_sliding_window(test, ref, radius: int = 5, sigma: float = 1.5,
                        k1: float = 0.01, k2: float = 0.03,
                        peak=None) -> float:
    """Brute-force SSIM over all fully interior window positions.

    Works on 2-d or 3-d arrays; the window is the matching-rank
    separable Gaussian.  ``peak`` overrides the dynamic range (used when
    scoring slices of a larger volume against its global range).
    """
    t = np.asarray(test, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    w = gaussian_window_3d(radius, sigma)
    if t.ndim == 2:
        w = w.sum(axis=0)  # marginalize one axis of the separable window
    if peak is None:
        peak = r.max() - r.min()
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    vals = []
    for pos in np.ndindex(*(n - 2 * radius for n in t.shape)):
        sl = tuple(slice(p, p + 2 * radius + 1) for p in pos)
        tw = t[sl]
        rw = r[sl]
        mt = float(np.sum(w * tw))
        mr = float(np.sum(w * rw))
        vt = float(np.sum(w * tw * tw)) - mt * mt
        vr = float(np.sum(w * rw * rw)) - mr * mr
        cov = float(np.sum(w * tw * rw)) - mt * mr
        num = (2 * mt * mr + c1) * (2 * cov + c2)
        den = (mt * mt + mr * mr + c1) * (vt + vr + c2)
        vals.append(num / den)
    return float(np.mean(vals))


def ellipsoid_contains_scipy(center, semi_axes, euler, pts) -> np.ndarray:
    """Membership test built on scipy's rotation machinery."""
    rot = Rotation.from_euler("ZYX", list(euler)).as_matrix()
    local = (np.asarray(pts, dtype=np.float64) - np.asarray(center)) @ rot
    scaled = local / np.asarray(semi_axes, dtype=np.float64)
    return np.einsum("...i,...i->...", scaled, scaled) <= 1.0
