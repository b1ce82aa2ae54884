"""Minimal reader/writer for the reconstruction toolkit's volume format.

Only the volume flavor is handled here; this package exchanges files
with the reconstruction CLI and never touches projection data.

Layout: magic b"CBVOL001", uint32 little-endian header length, UTF-8
JSON header (sorted keys), then little-endian float32 payload in C
order, [z, y, x] with x fastest.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CBVOL001"
_DTYPE_TAG = "<f4"


class VolumeFormatError(Exception):
    """The file is not a volume in the expected layout."""


@dataclass
class VolumeFile:
    """A volume payload plus the header fields we pass through untouched.

    grid is kept as the raw header dict so files written here stay
    readable by the reconstruction tools without this package knowing
    the geometry conventions.
    """

    data: np.ndarray
    grid: dict
    normalization: dict | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape)

    def with_data(self, data: np.ndarray) -> "VolumeFile":
        if data.shape != self.data.shape:
            raise ValueError("replacement data must keep the volume shape")
        return VolumeFile(np.asarray(data, dtype=np.float32), dict(self.grid),
                          self.normalization, dict(self.meta))


def read_volume(path: str | os.PathLike) -> VolumeFile:
    with open(path, "rb") as f:
        head = f.read(len(MAGIC) + 4)
        if len(head) < len(MAGIC) + 4 or head[: len(MAGIC)] != MAGIC:
            raise VolumeFormatError(f"{path}: bad magic")
        (hlen,) = struct.unpack("<I", head[len(MAGIC):])
        blob = f.read(hlen)
        if len(blob) != hlen:
            raise VolumeFormatError(f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise VolumeFormatError(f"{path}: header is not valid JSON") from e
        payload = f.read()
    if header.get("kind") != "volume":
        raise VolumeFormatError(f"{path}: not a volume file")
    if header.get("dtype") != _DTYPE_TAG:
        raise VolumeFormatError(f"{path}: dtype {header.get('dtype')!r} not supported")
    grid = header.get("grid") or {}
    try:
        shape = (int(grid["nz"]), int(grid["ny"]), int(grid["nx"]))
    except (KeyError, TypeError, ValueError) as e:
        raise VolumeFormatError(f"{path}: bad grid header") from e
    expected = shape[0] * shape[1] * shape[2] * 4
    if len(payload) != expected:
        raise VolumeFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype=np.dtype(_DTYPE_TAG)).reshape(shape)
    return VolumeFile(data.astype(np.float32), grid,
                      header.get("normalization"), header.get("meta", {}))


def write_volume(path: str | os.PathLike, vol: VolumeFile) -> None:
    header = {
        "kind": "volume",
        "dtype": _DTYPE_TAG,
        "grid": vol.grid,
        "normalization": vol.normalization,
        "meta": vol.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    raw = np.ascontiguousarray(vol.data, dtype=np.dtype(_DTYPE_TAG)).tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(raw)
