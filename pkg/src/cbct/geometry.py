"""Circular cone-beam acquisition geometry and reconstruction grids.

Conventions
-----------
Right-handed coordinates, rotation axis z, isocenter at the origin.
For a view at angle ``beta`` (radians, counter-clockwise in the x-y plane):

- source position ``s = sid * (cos(beta), sin(beta), 0)``
- central ray direction ``rhat = -s / |s|``
- detector column axis ``e_u = (-sin(beta), cos(beta), 0)``
- detector row axis ``e_v = (0, 0, 1)``

The flat detector plane is orthogonal to the central ray at distance
``sdd`` from the source.  Pixel ``(row r, col c)`` sits at

    F + (  (c - (n_cols-1)/2) * pitch_u + offset_u ) * e_u
      + (  (r - (n_rows-1)/2) * pitch_v + offset_v ) * e_v

where ``F = s + sdd * rhat`` is the foot of the central ray.

Volumes are indexed ``[k, j, i]`` for ``(z, y, x)``; voxel ``(i, j, k)``
is centered at ``origin + voxel_size * (i - (n-1)/2, ...)`` per axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class ArcKind(str, enum.Enum):
    """Scan arc classification.

    FULL covers a complete turn; SHORT covers at least half a turn plus
    the full fan angle, the minimum for Parker-weighted reconstruction.
    """

    FULL = "full"
    SHORT = "short"


@dataclass(frozen=True)
class VoxelGrid:
    """Axis-aligned reconstruction grid with isotropic voxels.

    Parameters
    ----------
    nx, ny, nz : int
        Voxel counts per axis, all >= 1.
    voxel_size : float
        Isotropic voxel edge length in mm.  Defaults to 0.3.
    origin : tuple of float
        Physical position of the grid center relative to the isocenter.
    """

    nx: int
    ny: int
    nz: int
    voxel_size: float = 0.3
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for n in (self.nx, self.ny, self.nz):
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise ValueError("voxel counts must be integers >= 1")
        if not (self.voxel_size > 0):
            raise ValueError("voxel_size must be positive")
        if len(self.origin) != 3 or not all(math.isfinite(c) for c in self.origin):
            raise ValueError("origin must be three finite floats")
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Array shape ``(nz, ny, nx)`` of a volume on this grid."""
        return (self.nz, self.ny, self.nx)

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def extent(self) -> tuple[float, float, float]:
        """Physical side lengths ``(ex, ey, ez)`` in mm."""
        h = self.voxel_size
        return (self.nx * h, self.ny * h, self.nz * h)

    def axis_coords(self, axis: int) -> np.ndarray:
        """Voxel center coordinates along ``axis`` (0=x, 1=y, 2=z)."""
        n = (self.nx, self.ny, self.nz)[axis]
        h = self.voxel_size
        return self.origin[axis] + h * (np.arange(n) - (n - 1) / 2.0)

    def to_dict(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "nz": self.nz,
            "voxel_size": self.voxel_size,
            "origin": list(self.origin),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelGrid":
        return cls(
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            nz=int(d["nz"]),
            voxel_size=float(d["voxel_size"]),
            origin=tuple(d.get("origin", (0.0, 0.0, 0.0))),
        )


@dataclass(frozen=True)
class ConeBeamGeometry:
    """Circular cone-beam geometry with a flat detector.

    Parameters
    ----------
    sid : float
        Source-to-isocenter distance (mm), > 0.
    sdd : float
        Source-to-detector distance (mm), > sid.
    n_rows, n_cols : int
        Detector pixel counts (rows along z, columns along e_u).
    pitch_u, pitch_v : float
        Detector pixel pitches (mm), > 0.
    angles : numpy.ndarray
        Strictly increasing view angles in radians, spanning at most one
        full turn from ``angles[0]``.
    arc_kind : ArcKind
        FULL or SHORT.  A SHORT arc must span at least
        ``pi + 2 * fan_half_angle``.
    offset_u, offset_v : float
        Detector shift along e_u / e_v (mm), default 0.
    """

    sid: float
    sdd: float
    n_rows: int
    n_cols: int
    pitch_u: float
    pitch_v: float
    angles: np.ndarray
    arc_kind: ArcKind
    offset_u: float = 0.0
    offset_v: float = 0.0

    def __post_init__(self):
        if not (0 < self.sid < self.sdd):
            raise ValueError("require 0 < sid < sdd")
        for n in (self.n_rows, self.n_cols):
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise ValueError("detector pixel counts must be integers >= 1")
        if not (self.pitch_u > 0 and self.pitch_v > 0):
            raise ValueError("pixel pitches must be positive")
        ang = np.asarray(self.angles, dtype=np.float64)
        if ang.ndim != 1 or ang.size < 1 or not np.all(np.isfinite(ang)):
            raise ValueError("angles must be a finite 1-d array")
        if ang.size > 1 and not np.all(np.diff(ang) > 0):
            raise ValueError("angles must be strictly increasing")
        if ang[-1] - ang[0] > TWO_PI + 1e-12:
            raise ValueError("angles must lie within one full turn of angles[0]")
        ang.setflags(write=False)
        object.__setattr__(self, "angles", ang)
        object.__setattr__(self, "arc_kind", ArcKind(self.arc_kind))
        if self.arc_kind is ArcKind.SHORT:
            need = math.pi + 2.0 * self.fan_half_angle
            if self.angular_span < need - 1e-9:
                raise ValueError(
                    f"short arc spans {self.angular_span:.6f} rad, "
                    f"needs at least {need:.6f}"
                )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConeBeamGeometry):
            return NotImplemented
        return (
            self.sid == other.sid
            and self.sdd == other.sdd
            and self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.pitch_u == other.pitch_u
            and self.pitch_v == other.pitch_v
            and self.arc_kind == other.arc_kind
            and self.offset_u == other.offset_u
            and self.offset_v == other.offset_v
            and np.array_equal(self.angles, other.angles)
        )

    @property
    def n_views(self) -> int:
        return int(self.angles.size)

    @property
    def fan_half_angle(self) -> float:
        """Half opening angle of the fan in the rotation plane (radians)."""
        return math.atan(0.5 * self.n_cols * self.pitch_u / self.sdd)

    @property
    def angular_step(self) -> float:
        """Representative angular step between consecutive views."""
        if self.n_views < 2:
            return TWO_PI
        return float(np.median(np.diff(self.angles)))

    @property
    def angular_span(self) -> float:
        """Arc covered by the views, counting each view's angular width.

        Views are treated as sampling half-open intervals, so an even
        start-inclusive, end-exclusive spacing of ``arc`` over n views
        reports exactly ``arc``.
        """
        return float(self.angles[-1] - self.angles[0]) + self.angular_step

    @property
    def magnification(self) -> float:
        return self.sdd / self.sid

    def detector_u_coords(self) -> np.ndarray:
        """Signed physical column coordinates relative to the central ray."""
        c = np.arange(self.n_cols, dtype=np.float64)
        return (c - (self.n_cols - 1) / 2.0) * self.pitch_u + self.offset_u

    def detector_v_coords(self) -> np.ndarray:
        """Signed physical row coordinates relative to the central ray."""
        r = np.arange(self.n_rows, dtype=np.float64)
        return (r - (self.n_rows - 1) / 2.0) * self.pitch_v + self.offset_v

    def to_dict(self) -> dict:
        return {
            "sid": self.sid,
            "sdd": self.sdd,
            "n_rows": self.n_rows,
            "n_cols": self.n_cols,
            "pitch_u": self.pitch_u,
            "pitch_v": self.pitch_v,
            "angles": np.asarray(self.angles).tolist(),
            "arc_kind": self.arc_kind.value,
            "offset_u": self.offset_u,
            "offset_v": self.offset_v,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConeBeamGeometry":
        return cls(
            sid=float(d["sid"]),
            sdd=float(d["sdd"]),
            n_rows=int(d["n_rows"]),
            n_cols=int(d["n_cols"]),
            pitch_u=float(d["pitch_u"]),
            pitch_v=float(d["pitch_v"]),
            angles=np.asarray(d["angles"], dtype=np.float64),
            arc_kind=ArcKind(d["arc_kind"]),
            offset_u=float(d.get("offset_u", 0.0)),
            offset_v=float(d.get("offset_v", 0.0)),
        )


def make_circular_geometry(
    n_views: int,
    arc_span: float,
    sid: float,
    sdd: float,
    n_rows: int,
    n_cols: int,
    pitch_u: float,
    pitch_v: float,
    offset_u: float = 0.0,
    offset_v: float = 0.0,
    start_angle: float = 0.0,
) -> ConeBeamGeometry:
    """Evenly sampled circular trajectory.

    Angles are ``start_angle + i * arc_span / n_views`` for
    ``i = 0 .. n_views-1``: start-inclusive, end-exclusive.  The arc is
    classified FULL when ``arc_span`` equals a full turn, SHORT otherwise.

    Raises
    ------
    ValueError
        If ``n_views < 2``, ``arc_span`` is not in ``(0, 2*pi]``, or a
        short arc is too narrow for its fan angle.
    """
    if not isinstance(n_views, (int, np.integer)) or n_views < 2:
        raise ValueError("n_views must be an integer >= 2")
    if not (0 < arc_span <= TWO_PI + 1e-12):
        raise ValueError("arc_span must lie in (0, 2*pi]")
    full = abs(arc_span - TWO_PI) <= 1e-12
    angles = start_angle + np.arange(n_views, dtype=np.float64) * (arc_span / n_views)
    return ConeBeamGeometry(
        sid=float(sid),
        sdd=float(sdd),
        n_rows=int(n_rows),
        n_cols=int(n_cols),
        pitch_u=float(pitch_u),
        pitch_v=float(pitch_v),
        angles=angles,
        arc_kind=ArcKind.FULL if full else ArcKind.SHORT,
        offset_u=float(offset_u),
        offset_v=float(offset_v),
    )


def view_basis(geom: ConeBeamGeometry) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-view source positions and detector frame.

    Returns
    -------
    sources : (n_views, 3) float64
    det_origin : (n_views, 3) float64
        Physical position of pixel (row 0, col 0).
    e_u, e_v : (n_views, 3) float64
        Column / row unit axes.
    """
    beta = np.asarray(geom.angles, dtype=np.float64)
    cb, sb = np.cos(beta), np.sin(beta)
    zeros = np.zeros_like(beta)
    sources = geom.sid * np.stack([cb, sb, zeros], axis=1)
    e_u = np.stack([-sb, cb, zeros], axis=1)
    e_v = np.stack([zeros, zeros, np.ones_like(beta)], axis=1)
    rhat = -np.stack([cb, sb, zeros], axis=1)
    foot = sources + geom.sdd * rhat
    u0 = geom.detector_u_coords()[0]
    v0 = geom.detector_v_coords()[0]
    det_origin = foot + u0 * e_u + v0 * e_v
    return sources, det_origin, e_u, e_v
