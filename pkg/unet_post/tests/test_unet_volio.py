import json
import struct
import subprocess

import numpy as np
import pytest

from unet_post.volio import (MAGIC, VolumeFile, VolumeFormatError,
                             read_volume, write_volume)

from dshelpers import grid_dict


def _vol(seed=0, shape=(4, 5, 6)):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=shape).astype(np.float32)
    return VolumeFile(data, grid_dict(*shape), None, {"tag": "t"})


class TestRoundTrip:
    def test_bit_identical(self, tmp_path):
        vol = _vol()
        p = tmp_path / "a.vol"
        write_volume(p, vol)
        back = read_volume(p)
        assert np.array_equal(back.data, vol.data)
        assert back.data.dtype == np.float32
        assert back.grid == vol.grid
        assert back.normalization is None
        assert back.meta == {"tag": "t"}

    def test_rewrite_same_bytes(self, tmp_path):
        vol = _vol(3)
        p1, p2 = tmp_path / "a.vol", tmp_path / "b.vol"
        write_volume(p1, vol)
        write_volume(p2, read_volume(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_normalization_passthrough(self, tmp_path):
        vol = _vol(1)
        vol.normalization = {"kind": "global_minmax", "lo": -2.0, "hi": 3.0}
        p = tmp_path / "n.vol"
        write_volume(p, vol)
        assert read_volume(p).normalization == vol.normalization

    def test_with_data_rejects_shape_change(self):
        vol = _vol()
        with pytest.raises(ValueError):
            vol.with_data(np.zeros((1, 2, 3), dtype=np.float32))


class TestCorruptFiles:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.vol"
        p.write_bytes(b"NOTAVOL0" + b"\x00" * 32)
        with pytest.raises(VolumeFormatError, match="magic"):
            read_volume(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "t.vol"
        p.write_bytes(MAGIC + struct.pack("<I", 1000) + b"{}")
        with pytest.raises(VolumeFormatError, match="truncated"):
            read_volume(p)

    def test_garbage_header(self, tmp_path):
        blob = b"not json at all"
        p = tmp_path / "g.vol"
        p.write_bytes(MAGIC + struct.pack("<I", len(blob)) + blob)
        with pytest.raises(VolumeFormatError, match="JSON"):
            read_volume(p)

    def test_payload_too_short(self, tmp_path):
        p = tmp_path / "s.vol"
        write_volume(p, _vol())
        raw = p.read_bytes()
        p.write_bytes(raw[:-8])
        with pytest.raises(VolumeFormatError, match="payload"):
            read_volume(p)

    def test_wrong_kind(self, tmp_path):
        header = json.dumps({"kind": "projections", "dtype": "<f4"}).encode()
        p = tmp_path / "k.vol"
        p.write_bytes(MAGIC + struct.pack("<I", len(header)) + header)
        with pytest.raises(VolumeFormatError, match="not a volume"):
            read_volume(p)

    def test_unsupported_dtype(self, tmp_path):
        header = json.dumps({"kind": "volume", "dtype": "<f8",
                             "grid": grid_dict(1, 1, 1)}).encode()
        p = tmp_path / "d.vol"
        p.write_bytes(MAGIC + struct.pack("<I", len(header)) + header
                      + b"\x00" * 8)
        with pytest.raises(VolumeFormatError, match="dtype"):
            read_volume(p)

    def test_missing_grid(self, tmp_path):
        header = json.dumps({"kind": "volume", "dtype": "<f4"}).encode()
        p = tmp_path / "m.vol"
        p.write_bytes(MAGIC + struct.pack("<I", len(header)) + header)
        with pytest.raises(VolumeFormatError, match="grid"):
            read_volume(p)


class TestToolkitInterop:
    """Files must be exchangeable with the reconstruction CLI."""

    def test_written_file_scores_as_identity(self, tmp_path):
        vol = _vol(9, shape=(12, 12, 12))
        p = tmp_path / "x.vol"
        write_volume(p, vol)
        out = subprocess.run(
            ["cbct", "metrics", "--test", str(p), "--ref", str(p), "--json"],
            capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        report = json.loads(out.stdout)
        assert report["nrmse"] == 0.0
        assert report["ssim"] == 1.0

    def test_reads_toolkit_output(self, tmp_path):
        p = tmp_path / "ph.vol"
        out = subprocess.run(
            ["cbct", "phantom", "--grid", "12", "--voxel-size", "0.8",
             "--seed", "4", "--out", str(p)],
            capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        vol = read_volume(p)
        assert vol.shape == (12, 12, 12)
        assert np.all(np.isfinite(vol.data))
        assert vol.grid["nx"] == 12
