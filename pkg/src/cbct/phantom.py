"""Procedural dental-style phantoms, noise simulation, dataset generation.

Phantoms are sums of constant-attenuation ellipsoids: a soft-tissue head,
a horseshoe arc of jaw-bone segments, 8 to 16 teeth seated on the arc,
and optionally one or two metal inserts.  Sizes and positions are grid
relative, jittered by a seeded generator, and constructed so that away
from metal no point is covered by more than a few components (total
attenuation stays below 0.2 everywhere without metal, while metal voxels
exceed 0.9 and dominate the volume).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .fdk import FdkOptions, fdk_reconstruct
from .geometry import ConeBeamGeometry, VoxelGrid
from .projector import (
    Domain,
    ProjectionSet,
    Volume,
    forward_project,
    subsample_views,
)
from .volio import NormalizationRecord, write_volume

# additive attenuation per component (mm^-1): tissue regions land at
# head 0.02, jaw 0.05, teeth 0.08, metal about 1.0
DELTA_HEAD = 0.02
DELTA_BONE = 0.03
DELTA_TOOTH = 0.06
DELTA_METAL = 0.98


@dataclass(frozen=True)
class Ellipsoid:
    """Constant additive ellipsoid.

    euler holds intrinsic z-y-x rotation angles (radians) taking local
    axes to world axes; semi_axes are the local half-lengths.
    """

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    euler: tuple[float, float, float]
    delta: float
    label: str = ""

    def __post_init__(self):
        if any(a <= 0 for a in self.semi_axes):
            raise ValueError("semi axes must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        object.__setattr__(self, "euler", tuple(float(a) for a in self.euler))

    def rotation(self) -> np.ndarray:
        """Local-to-world rotation matrix Rz(a) @ Ry(b) @ Rx(c)."""
        a, b, c = self.euler
        ca, sa = math.cos(a), math.sin(a)
        cb, sb = math.cos(b), math.sin(b)
        cc, sc = math.cos(c), math.sin(c)
        rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cc, -sc], [0.0, sc, cc]])
        return rz @ ry @ rx

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean membership for points of shape (..., 3)."""
        pts = np.asarray(pts, dtype=np.float64)
        local = (pts - np.asarray(self.center)) @ self.rotation()
        scaled = local / np.asarray(self.semi_axes)
        return np.einsum("...i,...i->...", scaled, scaled) <= 1.0


@dataclass(frozen=True)
class PhantomSpec:
    """Everything needed to re-rasterize a phantom bit-identically."""

    grid: VoxelGrid
    seed: int
    with_metal: bool
    ellipsoids: tuple[Ellipsoid, ...]


def rasterize(spec: PhantomSpec) -> Volume:
    """Sum each ellipsoid's delta over the voxel centers it contains."""
    grid = spec.grid
    xs = grid.axis_coords(0)
    ys = grid.axis_coords(1)
    zs = grid.axis_coords(2)
    data = np.zeros(grid.shape, dtype=np.float64)
    h = grid.voxel_size
    for e in spec.ellipsoids:
        rot = e.rotation()
        # world-axis half extents of the rotated ellipsoid
        ext = np.sqrt((rot**2 @ np.asarray(e.semi_axes) ** 2))
        sl = []
        for axis, coords in enumerate((xs, ys, zs)):
            lo = np.searchsorted(coords, e.center[axis] - ext[axis] - h)
            hi = np.searchsorted(coords, e.center[axis] + ext[axis] + h)
            sl.append(slice(lo, hi))
        if any(s.start >= s.stop for s in sl):
            continue
        pz, py, px = np.meshgrid(zs[sl[2]], ys[sl[1]], xs[sl[0]], indexing="ij")
        pts = np.stack([px, py, pz], axis=-1)
        data[sl[2], sl[1], sl[0]] += e.delta * e.contains(pts)
    return Volume(grid, data.astype(np.float32))


def _arch_point(theta: float, ax: float, by: float, y_shift: float) -> np.ndarray:
    return np.array([ax * math.sin(theta), by * math.cos(theta) + y_shift, 0.0])


def dental_phantom(grid: VoxelGrid, seed: int = 0,
                   with_metal: bool = False) -> tuple[PhantomSpec, Volume]:
    """Build a seeded dental phantom and rasterize it.

    Same (grid, seed, with_metal) always yields bit-identical volumes.

    Returns
    -------
    (spec, volume)
        The generative description and the voxelized attenuation map.
    """
    rng = np.random.default_rng(seed)
    ex, ey, ez = grid.extent
    rx, ry, rz = ex / 2.0, ey / 2.0, ez / 2.0
    s = min(rx, ry)

    parts: list[Ellipsoid] = []
    parts.append(Ellipsoid(
        center=(0.0, 0.0, 0.0),
        semi_axes=(0.84 * rx, 0.90 * ry, 0.92 * rz),
        euler=(float(rng.uniform(-0.05, 0.05)), 0.0, 0.0),
        delta=DELTA_HEAD,
        label="head",
    ))

    # horseshoe arch, opening toward -y
    theta_max = 1.15
    ax_arch = 0.62 * s
    by_arch = 0.66 * s
    y_shift = -0.06 * s
    z_jaw = -0.18 * rz

    n_bone = 9
    thetas_b = np.linspace(-theta_max, theta_max, n_bone)
    pitch_b = float(np.linalg.norm(
        _arch_point(thetas_b[1], ax_arch, by_arch, y_shift)
        - _arch_point(thetas_b[0], ax_arch, by_arch, y_shift)
    ))
    for t in thetas_b:
        c = _arch_point(float(t), ax_arch, by_arch, y_shift)
        tangent = np.array([ax_arch * math.cos(t), -by_arch * math.sin(t)])
        parts.append(Ellipsoid(
            center=(c[0], c[1], z_jaw),
            # 0.62 * pitch: neighbors overlap, second neighbors never do,
            # so no point sees more than two bone segments
            semi_axes=(0.62 * pitch_b, 0.15 * s, 0.30 * rz),
            euler=(math.atan2(tangent[1], tangent[0]), 0.0, 0.0),
            delta=DELTA_BONE,
            label="bone",
        ))

    n_teeth = int(rng.integers(8, 17))
    thetas_t = np.linspace(-theta_max + 0.06, theta_max - 0.06, n_teeth)
    pitch_t = float(np.linalg.norm(
        _arch_point(thetas_t[1], ax_arch, by_arch, y_shift)
        - _arch_point(thetas_t[0], ax_arch, by_arch, y_shift)
    ))
    # 0.45 * pitch plus <= 0.04 * pitch jitter keeps teeth disjoint
    a_tooth = min(0.45 * pitch_t, 0.09 * s)
    z_teeth = z_jaw + 0.40 * rz
    tooth_centers = []
    tooth_rots = []
    for t in thetas_t:
        tj = float(t) + float(rng.uniform(-0.04, 0.04)) * (thetas_t[1] - thetas_t[0])
        radial = float(rng.uniform(0.985, 1.015))
        c = _arch_point(tj, radial * ax_arch, radial * by_arch, y_shift)
        zj = z_teeth + float(rng.uniform(-0.2, 0.2)) * a_tooth
        tangent = np.array([ax_arch * math.cos(tj), -by_arch * math.sin(tj)])
        rot_z = math.atan2(tangent[1], tangent[0]) + float(rng.uniform(-0.15, 0.15))
        tooth_centers.append((c[0], c[1], zj))
        tooth_rots.append(rot_z)
        parts.append(Ellipsoid(
            center=(c[0], c[1], zj),
            semi_axes=(a_tooth, 0.75 * a_tooth, 2.0 * a_tooth),
            euler=(rot_z, 0.0, 0.0),
            delta=DELTA_TOOTH,
            label="tooth",
        ))

    if with_metal:
        n_metal = int(rng.integers(1, 3))
        picks = rng.choice(n_teeth, size=n_metal, replace=False)
        for idx in sorted(int(i) for i in picks):
            cx, cy, cz = tooth_centers[idx]
            # strictly inside its tooth, so metal always stacks on
            # tooth + head attenuation
            parts.append(Ellipsoid(
                center=(cx, cy, cz + 0.35 * 2.0 * a_tooth),
                semi_axes=(0.55 * a_tooth, 0.55 * 0.75 * a_tooth, 0.5 * 2.0 * a_tooth),
                euler=(tooth_rots[idx], 0.0, 0.0),
                delta=DELTA_METAL,
                label="metal",
            ))

    spec = PhantomSpec(grid=grid, seed=int(seed), with_metal=bool(with_metal),
                       ellipsoids=tuple(parts))
    return spec, rasterize(spec)


def simulate_counts(proj: ProjectionSet, i0: float, seed: int = 0) -> ProjectionSet:
    """Draw Poisson photon counts with incident intensity ``i0``.

    counts ~ Poisson(i0 * exp(-p)) per detector sample.

    Raises
    ------
    ValueError
        If ``i0 <= 0`` or the input is not line integrals.
    """
    if not (i0 > 0):
        raise ValueError("i0 must be positive")
    if proj.domain is not Domain.LINE_INTEGRAL:
        raise ValueError("expected line integrals")
    rng = np.random.default_rng(seed)
    lam = i0 * np.exp(-proj.data.astype(np.float64))
    counts = rng.poisson(lam).astype(np.float32)
    return ProjectionSet(proj.geom, counts, Domain.COUNTS)


def counts_to_line_integrals(counts: ProjectionSet, i0: float) -> ProjectionSet:
    """Log-convert counts: ``p = max(0, ln(i0 / max(counts, 1)))``.

    Zero counts are floored at one photon, and counts above ``i0``
    (possible under noise) clamp to p = 0 so line integrals stay
    nonnegative.
    """
    if not (i0 > 0):
        raise ValueError("i0 must be positive")
    if counts.domain is not Domain.COUNTS:
        raise ValueError("expected counts")
    c = np.maximum(counts.data.astype(np.float64), 1.0)
    p = np.maximum(np.log(i0 / c), 0.0)
    return ProjectionSet(counts.geom, p.astype(np.float32), Domain.LINE_INTEGRAL)


def split_counts(n: int) -> tuple[int, int, int]:
    """(train, val, test) sizes following a 25:6:1 proportion.

    Every split is nonempty once n >= 3; tiny datasets fill splits in
    priority order train, val, test.
    """
    if n < 1:
        raise ValueError("need at least one volume")
    if n < 3:
        train = 1
        val = 1 if n >= 2 else 0
        return train, val, 0
    val = max(1, n * 6 // 32)
    test = max(1, n * 1 // 32)
    return n - val - test, val, test


def make_dataset(
    out_dir: str | os.PathLike,
    n_volumes: int,
    grid: VoxelGrid,
    geom: ConeBeamGeometry,
    i0: float = 1e5,
    keep_every: int = 5,
    noise: bool = False,
    metal: str = "none",
    seed: int = 0,
    fdk_options: FdkOptions | None = None,
) -> dict:
    """Generate paired normal / sparse-view FDK reconstructions.

    Per volume: a seeded phantom is projected, optionally Poisson-noised
    at intensity ``i0``, reconstructed with FDK from all views (the
    "normal" member) and again from every ``keep_every``-th view (the
    "low" member).  Both are written unnormalized; the manifest records
    dataset-global min/max bounds computed over the training split, plus
    everything needed to regenerate the files bit-identically.

    ``metal`` is "none", "all", or "mixed" (metal in every fourth volume).

    Returns the manifest dict (also written to ``out_dir/manifest.json``).
    """
    if metal not in ("none", "all", "mixed"):
        raise ValueError("metal must be 'none', 'all' or 'mixed'")
    if not isinstance(n_volumes, (int, np.integer)) or n_volumes < 1:
        raise ValueError("n_volumes must be an integer >= 1")
    os.makedirs(out_dir, exist_ok=True)
    n_train, n_val, n_test = split_counts(n_volumes)
    splits = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test

    entries = []
    lo = math.inf
    hi = -math.inf
    for v in range(n_volumes):
        vid = f"vol{v:03d}"
        phantom_seed = int(seed) * 1_000_003 + 2 * v
        noise_seed = phantom_seed + 1
        with_metal = metal == "all" or (metal == "mixed" and v % 4 == 3)
        _, vol = dental_phantom(grid, phantom_seed, with_metal)
        proj = forward_project(vol, geom)
        if noise:
            proj = counts_to_line_integrals(
                simulate_counts(proj, i0, noise_seed), i0
            )
        normal = fdk_reconstruct(proj, grid, fdk_options)
        low_proj = subsample_views(proj, keep_every)
        low = fdk_reconstruct(low_proj, grid, fdk_options)

        normal_name = f"{vid}_normal.vol"
        low_name = f"{vid}_low.vol"
        write_volume(
            os.path.join(out_dir, normal_name), normal,
            meta={"volume_id": vid, "role": "normal", "phantom_seed": phantom_seed,
                  "n_views": proj.geom.n_views, "with_metal": with_metal},
        )
        write_volume(
            os.path.join(out_dir, low_name), low,
            meta={"volume_id": vid, "role": "low", "phantom_seed": phantom_seed,
                  "n_views": low_proj.geom.n_views, "with_metal": with_metal},
        )
        if splits[v] == "train":
            lo = min(lo, float(normal.data.min()), float(low.data.min()))
            hi = max(hi, float(normal.data.max()), float(low.data.max()))
        entries.append({
            "id": vid,
            "split": splits[v],
            "phantom_seed": phantom_seed,
            "with_metal": with_metal,
            "normal": normal_name,
            "low": low_name,
            "n_views_normal": proj.geom.n_views,
            "n_views_low": low_proj.geom.n_views,
        })

    if not (hi > lo):
        hi = lo + 1.0
    norm_rec = NormalizationRecord(kind="global_minmax", lo=lo, hi=hi)
    manifest = {
        "format": "cbct-dataset",
        "version": 1,
        "seed": int(seed),
        "i0": float(i0),
        "keep_every": int(keep_every),
        "noise": bool(noise),
        "metal": metal,
        "grid": grid.to_dict(),
        "geometry": geom.to_dict(),
        "normalization": norm_rec.to_dict(),
        "volumes": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
