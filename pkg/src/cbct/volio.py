"""Binary volume / projection file format and intensity normalization.

Layout of a ``.vol`` / ``.prj`` file::

    bytes 0..7     magic  b"CBVOL001"
    bytes 8..11    uint32 little-endian header length H
    bytes 12..12+H UTF-8 JSON header
    remainder      payload: little-endian float32, C order

Volume payloads are ordered ``[z, y, x]`` with x fastest; projection
payloads ``[view, row, col]`` with col fastest.  The JSON header fully
describes the payload, so files round-trip without outside context.

Header keys
-----------
``kind``           "volume" or "projections"
``dtype``          always "<f4"
``grid``           volume files: the voxel grid (see VoxelGrid.to_dict)
``geometry``       projection files: the acquisition geometry
``domain``         projection files: "line_integral" or "counts"
``normalization``  null, or {"kind": "global_minmax", "lo": .., "hi": ..}
``meta``           free-form JSON object for provenance (seeds, view counts)
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import ConeBeamGeometry, VoxelGrid
from .projector import Domain, ProjectionSet, Volume

MAGIC = b"CBVOL001"
_DTYPE_TAG = "<f4"


class VolioError(Exception):
    """Base class for file format errors."""


class CorruptHeaderError(VolioError):
    """Magic, header length, or header JSON is damaged."""


class LengthMismatchError(VolioError):
    """Payload byte count disagrees with the header dimensions."""


class UnsupportedDtypeError(VolioError):
    """Header declares a payload dtype this reader does not handle."""


@dataclass(frozen=True)
class NormalizationRecord:
    """Affine intensity mapping applied to stored values.

    kind "none" is the identity.  kind "global_minmax" maps ``[lo, hi]``
    onto ``[-1, 1]`` with clamping; lo/hi are dataset-global bounds, not
    per-volume ones, so the mapping is shared by every member of a dataset.
    """

    kind: str = "none"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "global_minmax"):
            raise ValueError(f"unknown normalization kind {self.kind!r}")
        if self.kind == "global_minmax" and not (self.hi > self.lo):
            raise ValueError("require hi > lo")

    def to_dict(self) -> dict | None:
        if self.kind == "none":
            return None
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict | None) -> "NormalizationRecord":
        if d is None:
            return cls()
        return cls(kind=d["kind"], lo=float(d["lo"]), hi=float(d["hi"]))


def normalize_global(vol: Volume, bounds: tuple[float, float]) -> tuple[Volume, NormalizationRecord]:
    """Map intensities affinely so ``[lo, hi] -> [-1, 1]``, clamping outliers.

    ``bounds`` must be dataset-global: every volume of a dataset is mapped
    with the same (lo, hi) so relative intensities stay comparable.

    Returns the mapped volume and the record needed to invert the mapping.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    rec = NormalizationRecord(kind="global_minmax", lo=lo, hi=hi)
    y = (vol.data.astype(np.float64) - lo) * (2.0 / (hi - lo)) - 1.0
    y = np.clip(y, -1.0, 1.0)
    return Volume(vol.grid, y.astype(np.float32)), rec


def denormalize(vol: Volume, rec: NormalizationRecord) -> Volume:
    """Invert :func:`normalize_global` (exact up to float rounding).

    Values that were clamped cannot be recovered; everything inside the
    original [lo, hi] range comes back to float32 precision.
    """
    if rec.kind == "none":
        return vol
    y = (vol.data.astype(np.float64) + 1.0) * (0.5 * (rec.hi - rec.lo)) + rec.lo
    return Volume(vol.grid, y.astype(np.float32))


def _write(path: str | os.PathLike, header: dict, payload: np.ndarray) -> None:
    header = dict(header)
    header["dtype"] = _DTYPE_TAG
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    raw = np.ascontiguousarray(payload, dtype=np.dtype(_DTYPE_TAG)).tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(raw)


def _read(path: str | os.PathLike) -> tuple[dict, bytes]:
    with open(path, "rb") as f:
        head = f.read(len(MAGIC) + 4)
        if len(head) < len(MAGIC) + 4 or head[: len(MAGIC)] != MAGIC:
            raise CorruptHeaderError(f"{path}: bad magic")
        (hlen,) = struct.unpack("<I", head[len(MAGIC):])
        blob = f.read(hlen)
        if len(blob) != hlen:
            raise CorruptHeaderError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptHeaderError(f"{path}: header is not valid JSON") from e
        payload = f.read()
    if header.get("dtype") != _DTYPE_TAG:
        raise UnsupportedDtypeError(
            f"{path}: dtype {header.get('dtype')!r} not supported"
        )
    return header, payload


def write_volume(path: str | os.PathLike, vol: Volume,
                 normalization: NormalizationRecord | None = None,
                 meta: dict | None = None) -> None:
    """Write a volume; ``normalization`` records a mapping already applied."""
    header = {
        "kind": "volume",
        "grid": vol.grid.to_dict(),
        "normalization": (normalization or NormalizationRecord()).to_dict(),
        "meta": meta or {},
    }
    _write(path, header, vol.data)


def read_volume(path: str | os.PathLike) -> tuple[Volume, NormalizationRecord, dict]:
    """Read a volume file; returns (volume, normalization record, meta)."""
    header, payload = _read(path)
    if header.get("kind") != "volume":
        raise CorruptHeaderError(f"{path}: not a volume file")
    try:
        grid = VoxelGrid.from_dict(header["grid"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptHeaderError(f"{path}: bad grid header") from e
    expected = grid.n_voxels * 4
    if len(payload) != expected:
        raise LengthMismatchError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=np.dtype(_DTYPE_TAG)).reshape(grid.shape)
    vol = Volume(grid, data.astype(np.float32))
    rec = NormalizationRecord.from_dict(header.get("normalization"))
    return vol, rec, header.get("meta", {})


def write_projections(path: str | os.PathLike, proj: ProjectionSet,
                      meta: dict | None = None) -> None:
    header = {
        "kind": "projections",
        "geometry": proj.geom.to_dict(),
        "domain": proj.domain.value,
        "meta": meta or {},
    }
    _write(path, header, proj.data)


def read_projections(path: str | os.PathLike) -> tuple[ProjectionSet, dict]:
    """Read a projection stack; returns (projections, meta)."""
    header, payload = _read(path)
    if header.get("kind") != "projections":
        raise CorruptHeaderError(f"{path}: not a projection file")
    try:
        geom = ConeBeamGeometry.from_dict(header["geometry"])
        domain = Domain(header.get("domain", "line_integral"))
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptHeaderError(f"{path}: bad geometry header") from e
    expected = geom.n_views * geom.n_rows * geom.n_cols * 4
    if len(payload) != expected:
        raise LengthMismatchError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=np.dtype(_DTYPE_TAG)).reshape(
        (geom.n_views, geom.n_rows, geom.n_cols)
    )
    return ProjectionSet(geom, data.astype(np.float32), domain), header.get("meta", {})
