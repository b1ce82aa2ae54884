"""Volume / projection containers and the matched projector pair.

The forward operator A computes Joseph-style line integrals: each ray
marches the volume in unit slabs along its dominant axis and interpolates
bilinearly in the transverse plane.  ``back_project`` applies the exact
algebraic transpose of A, the property the variational reconstruction
relies on.  Both run single-threaded for bit-reproducibility.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import ConeBeamGeometry, VoxelGrid, view_basis


class Domain(str, enum.Enum):
    """What the detector samples mean."""

    LINE_INTEGRAL = "line_integral"
    COUNTS = "counts"


@dataclass(frozen=True)
class Volume:
    """A float32 scalar field on a :class:`VoxelGrid`.

    ``data`` has shape ``grid.shape`` == (nz, ny, nx) and must be finite.
    """

    grid: VoxelGrid
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"data shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume data must be finite")
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, grid: VoxelGrid) -> "Volume":
        return cls(grid, np.zeros(grid.shape, dtype=np.float32))


@dataclass(frozen=True)
class ProjectionSet:
    """A float32 projection stack bound to its acquisition geometry.

    ``data`` has shape (n_views, n_rows, n_cols).  Counts must be
    nonnegative; line integrals may take any finite value.
    """

    geom: ConeBeamGeometry
    data: np.ndarray
    domain: Domain = Domain.LINE_INTEGRAL

    def __post_init__(self):
        arr = np.asarray(self.data)
        expected = (self.geom.n_views, self.geom.n_rows, self.geom.n_cols)
        if arr.shape != expected:
            raise ValueError(
                f"data shape {arr.shape} does not match geometry shape {expected}"
            )
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError("projection data must be finite")
        object.__setattr__(self, "domain", Domain(self.domain))
        if self.domain is Domain.COUNTS and arr.min() < 0:
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def _grid_origin0(grid: VoxelGrid) -> tuple[float, float, float]:
    # physical coordinate of voxel (0, 0, 0) center
    h = grid.voxel_size
    return (
        grid.origin[0] - 0.5 * (grid.nx - 1) * h,
        grid.origin[1] - 0.5 * (grid.ny - 1) * h,
        grid.origin[2] - 0.5 * (grid.nz - 1) * h,
    )


def forward_project_array(vol_data: np.ndarray, grid: VoxelGrid,
                          geom: ConeBeamGeometry) -> np.ndarray:
    """A @ vol_data as a bare (n_views, n_rows, n_cols) float32 array."""
    vol_data = np.ascontiguousarray(vol_data, dtype=np.float32)
    if vol_data.shape != grid.shape:
        raise ValueError("volume array does not match grid")
    srcs, det0, e_u, e_v = view_basis(geom)
    out = np.empty((geom.n_views, geom.n_rows, geom.n_cols), dtype=np.float32)
    x0, y0, z0 = _grid_origin0(grid)
    _kernels.joseph_forward(
        vol_data, grid.voxel_size, x0, y0, z0,
        srcs, det0, e_u, e_v, geom.pitch_u, geom.pitch_v, out,
    )
    return out


def back_project_array(proj_data: np.ndarray, geom: ConeBeamGeometry,
                       grid: VoxelGrid) -> np.ndarray:
    """A^T @ proj_data as a bare (nz, ny, nx) float32 array."""
    proj_data = np.ascontiguousarray(proj_data, dtype=np.float32)
    expected = (geom.n_views, geom.n_rows, geom.n_cols)
    if proj_data.shape != expected:
        raise ValueError("projection array does not match geometry")
    srcs, det0, e_u, e_v = view_basis(geom)
    acc = np.empty(grid.shape, dtype=np.float64)
    x0, y0, z0 = _grid_origin0(grid)
    _kernels.joseph_adjoint(
        proj_data, grid.voxel_size, x0, y0, z0,
        srcs, det0, e_u, e_v, geom.pitch_u, geom.pitch_v, acc,
    )
    return acc.astype(np.float32)


def forward_project(vol: Volume, geom: ConeBeamGeometry) -> ProjectionSet:
    """Project a volume into line integrals along every detector ray.

    Rays that miss the volume produce exactly 0.  The result is bound to
    ``geom`` with domain LINE_INTEGRAL.
    """
    data = forward_project_array(vol.data, vol.grid, geom)
    return ProjectionSet(geom=geom, data=data, domain=Domain.LINE_INTEGRAL)


def back_project(proj: ProjectionSet, grid: VoxelGrid) -> Volume:
    """Apply the exact transpose of :func:`forward_project`.

    This is the algebraic adjoint, not a filtered or weighted
    backprojection; use :func:`cbct.fdk.fdk_reconstruct` for imaging.
    """
    data = back_project_array(proj.data, proj.geom, grid)
    return Volume(grid=grid, data=data)


def operator_row_col_sums(geom: ConeBeamGeometry,
                          grid: VoxelGrid) -> tuple[np.ndarray, np.ndarray]:
    """Row and column absolute sums of the system matrix.

    All Joseph coefficients are nonnegative, so ``A @ 1`` and ``A^T @ 1``
    give the row and column sums used for diagonal preconditioning.

    Returns
    -------
    row_sums : (n_views, n_rows, n_cols) float32
    col_sums : (nz, ny, nx) float32
    """
    ones_vol = np.ones(grid.shape, dtype=np.float32)
    row_sums = forward_project_array(ones_vol, grid, geom)
    ones_proj = np.ones((geom.n_views, geom.n_rows, geom.n_cols), dtype=np.float32)
    col_sums = back_project_array(ones_proj, geom, grid)
    return row_sums, col_sums


def subsample_views(proj: ProjectionSet, keep_every: int) -> ProjectionSet:
    """Keep views 0, k, 2k, ... of a projection set.

    Returns a new set bound to the correspondingly thinned geometry.
    ``keep_every=1`` returns an equal copy.

    Raises
    ------
    ValueError
        If ``keep_every`` is not a positive integer.
    """
    if not isinstance(keep_every, (int, np.integer)) or keep_every < 1:
        raise ValueError("keep_every must be an integer >= 1")
    g = proj.geom
    idx = np.arange(0, g.n_views, keep_every)
    new_geom = ConeBeamGeometry(
        sid=g.sid,
        sdd=g.sdd,
        n_rows=g.n_rows,
        n_cols=g.n_cols,
        pitch_u=g.pitch_u,
        pitch_v=g.pitch_v,
        angles=np.asarray(g.angles)[idx].copy(),
        arc_kind=g.arc_kind,
        offset_u=g.offset_u,
        offset_v=g.offset_v,
    )
    return ProjectionSet(
        geom=new_geom,
        data=proj.data[idx].copy(),
        domain=proj.domain,
    )
