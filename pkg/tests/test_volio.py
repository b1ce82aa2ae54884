import json
import math
import struct

import numpy as np
import pytest

import cbct
from cbct.volio import (
    MAGIC,
    CorruptHeaderError,
    LengthMismatchError,
    NormalizationRecord,
    UnsupportedDtypeError,
    denormalize,
    normalize_global,
    read_projections,
    read_volume,
    write_projections,
    write_volume,
)


def _vol(seed=0, n=6):
    grid = cbct.VoxelGrid(n, n, n, voxel_size=0.5)
    data = np.random.default_rng(seed).uniform(
        -1, 2, grid.shape).astype(np.float32)
    return cbct.Volume(grid, data)


class TestVolumeRoundTrip:
    def test_bit_identical(self, tmp_path):
        vol = _vol()
        path = tmp_path / "a.vol"
        write_volume(path, vol, meta={"tag": 7})
        back, rec, meta = read_volume(path)
        assert np.array_equal(back.data, vol.data)
        assert back.data.dtype == np.float32
        assert back.grid == vol.grid
        assert rec.kind == "none"
        assert meta == {"tag": 7}

    def test_rewrite_same_bytes(self, tmp_path):
        vol = _vol(3)
        p1, p2 = tmp_path / "x.vol", tmp_path / "y.vol"
        write_volume(p1, vol)
        write_volume(p2, vol)
        assert p1.read_bytes() == p2.read_bytes()

    def test_normalization_record_round_trip(self, tmp_path):
        vol = _vol(4)
        normed, rec = normalize_global(vol, (-1.0, 2.0))
        path = tmp_path / "n.vol"
        write_volume(path, normed, normalization=rec)
        back, rec2, _ = read_volume(path)
        assert rec2.kind == "global_minmax"
        assert rec2.lo == -1.0 and rec2.hi == 2.0
        restored = denormalize(back, rec2)
        assert np.allclose(restored.data, vol.data, rtol=1e-6, atol=1e-6)


class TestProjectionRoundTrip:
    def test_bit_identical_with_geometry(self, tmp_path):
        geom = cbct.make_circular_geometry(5, math.pi + 0.8, 60, 100,
                                           n_rows=4, n_cols=6,
                                           pitch_u=0.4, pitch_v=0.5,
                                           offset_u=0.1)
        data = np.random.default_rng(1).uniform(
            0, 3, (5, 4, 6)).astype(np.float32)
        proj = cbct.ProjectionSet(geom, data, cbct.Domain.COUNTS)
        path = tmp_path / "p.proj"
        write_projections(path, proj, meta={"i0": 1e4})
        back, meta = read_projections(path)
        assert np.array_equal(back.data, proj.data)
        assert back.geom == geom
        assert back.domain is cbct.Domain.COUNTS
        assert meta == {"i0": 1e4}


class TestCorruptFiles:
    def _write_good(self, path):
        write_volume(path, _vol())
        return path.read_bytes()

    def test_bad_magic(self, tmp_path):
        raw = bytearray(self._write_good(tmp_path / "a.vol"))
        raw[:4] = b"XXXX"
        bad = tmp_path / "bad.vol"
        bad.write_bytes(bytes(raw))
        with pytest.raises(CorruptHeaderError):
            read_volume(bad)

    def test_truncated_header(self, tmp_path):
        raw = self._write_good(tmp_path / "a.vol")
        bad = tmp_path / "bad.vol"
        bad.write_bytes(raw[: len(MAGIC) + 2])
        with pytest.raises(CorruptHeaderError):
            read_volume(bad)

    def test_header_json_garbage(self, tmp_path):
        hdr = b"{not json"
        blob = MAGIC + struct.pack("<I", len(hdr)) + hdr
        bad = tmp_path / "bad.vol"
        bad.write_bytes(blob)
        with pytest.raises(CorruptHeaderError):
            read_volume(bad)

    def test_truncated_payload(self, tmp_path):
        raw = self._write_good(tmp_path / "a.vol")
        bad = tmp_path / "bad.vol"
        bad.write_bytes(raw[:-8])
        with pytest.raises(LengthMismatchError):
            read_volume(bad)

    def test_trailing_garbage(self, tmp_path):
        raw = self._write_good(tmp_path / "a.vol")
        bad = tmp_path / "bad.vol"
        bad.write_bytes(raw + b"\x00" * 4)
        with pytest.raises(LengthMismatchError):
            read_volume(bad)

    def test_wrong_dtype_tag(self, tmp_path):
        raw = self._write_good(tmp_path / "a.vol")
        hl = struct.unpack("<I", raw[len(MAGIC): len(MAGIC) + 4])[0]
        start = len(MAGIC) + 4
        hdr = json.loads(raw[start: start + hl].decode())
        hdr["dtype"] = "<f8"
        new_hdr = json.dumps(hdr, sort_keys=True).encode()
        bad = tmp_path / "bad.vol"
        bad.write_bytes(MAGIC + struct.pack("<I", len(new_hdr)) + new_hdr
                        + raw[start + hl:])
        with pytest.raises(UnsupportedDtypeError):
            read_volume(bad)


class TestNormalize:
    def test_endpoints(self):
        grid = cbct.VoxelGrid(2, 1, 1, voxel_size=1.0)
        vol = cbct.Volume(grid, np.array([[[0.0, 10.0]]], dtype=np.float32))
        out, rec = normalize_global(vol, (0.0, 10.0))
        assert out.data[0, 0, 0] == -1.0
        assert out.data[0, 0, 1] == 1.0
        assert rec.kind == "global_minmax"

    def test_midpoint_and_known_value(self):
        grid = cbct.VoxelGrid(2, 1, 1, voxel_size=1.0)
        vol = cbct.Volume(grid, np.array([[[5.0, 2.5]]], dtype=np.float32))
        out, _ = normalize_global(vol, (0.0, 10.0))
        assert out.data[0, 0, 0] == pytest.approx(0.0)
        assert out.data[0, 0, 1] == pytest.approx(-0.5)

    def test_clamps_out_of_range(self):
        grid = cbct.VoxelGrid(2, 1, 1, voxel_size=1.0)
        vol = cbct.Volume(grid, np.array([[[-5.0, 15.0]]], dtype=np.float32))
        out, _ = normalize_global(vol, (0.0, 10.0))
        assert out.data[0, 0, 0] == -1.0
        assert out.data[0, 0, 1] == 1.0

    def test_round_trip_within_bounds(self):
        vol = _vol(9)
        lo, hi = float(vol.data.min()), float(vol.data.max())
        normed, rec = normalize_global(vol, (lo, hi))
        back = denormalize(normed, rec)
        assert np.allclose(back.data, vol.data, rtol=1e-6, atol=1e-6)

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(ValueError):
            normalize_global(_vol(), (1.0, 1.0))

    def test_none_record_denormalize_is_identity(self):
        vol = _vol(2)
        out = denormalize(vol, NormalizationRecord(kind="none"))
        assert np.array_equal(out.data, vol.data)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            NormalizationRecord(kind="zscore")
