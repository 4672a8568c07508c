"""Test the :mod:`granulab.core.camera.io` module."""
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from granulab.core.camera.io import import_depth, load_depth, load_mask, save_depth, \
    save_mask, sidecar_path
from granulab.core.errors import SchemaMismatchError
from granulab.core.models.camera import CameraConfig, DepthImage, Intrinsics

CAMERA = CameraConfig(native_resolution=(40, 40), downsample_factor=10)


class TestDepthFiles:
    """Test :func:`save_depth` and :func:`load_depth`."""

    def test_float32_grid(self, tmp_path: Path) -> None:
        """Test that grids are stored as float32 with a matching sidecar."""
        depth = np.linspace(0.2, 0.29, 12).reshape(3, 4)
        img = DepthImage(depth, Intrinsics(2.0, 2.0, 2.0, 1.5), 0.29)
        fp = tmp_path / 'obs.depth'
        files = save_depth(img, fp)
        assert files == [fp, sidecar_path(fp)]
        assert fp.stat().st_size == 12 * 4
        loaded = load_depth(fp)
        assert np.array_equal(loaded.depth, depth.astype(np.float32).astype(np.float64))
        assert loaded.intrinsics == img.intrinsics
        assert loaded.camera_height == 0.29

    def test_size_mismatch(self, tmp_path: Path) -> None:
        """Test that a grid that does not match its sidecar is rejected."""
        img = DepthImage(np.full((3, 4), 0.29), Intrinsics(2.0, 2.0, 2.0, 1.5), 0.29)
        fp = tmp_path / 'obs.depth'
        save_depth(img, fp)
        fp.write_bytes(fp.read_bytes()[:-4])
        with pytest.raises(SchemaMismatchError):
            load_depth(fp)

    def test_unknown_version(self, tmp_path: Path) -> None:
        """Test that sidecars of another version are rejected."""
        img = DepthImage(np.full((2, 2), 0.29), Intrinsics(1.0, 1.0, 1.0, 1.0), 0.29)
        fp = tmp_path / 'obs.depth'
        save_depth(img, fp)
        meta = json.loads(sidecar_path(fp).read_text())
        meta['version'] = 99
        sidecar_path(fp).write_text(json.dumps(meta))
        with pytest.raises(SchemaMismatchError):
            load_depth(fp)

    def test_unknown_field(self, tmp_path: Path) -> None:
        """Test that sidecars with unknown fields are rejected."""
        img = DepthImage(np.full((2, 2), 0.29), Intrinsics(1.0, 1.0, 1.0, 1.0), 0.29)
        fp = tmp_path / 'obs.depth'
        save_depth(img, fp)
        meta = json.loads(sidecar_path(fp).read_text())
        meta['units'] = 'mm'
        sidecar_path(fp).write_text(json.dumps(meta))
        with pytest.raises(SchemaMismatchError):
            load_depth(fp)


class TestImportDepth:
    """Test the :func:`granulab.core.camera.io.import_depth` function."""

    GRID = np.full((40, 40), 290, dtype=np.uint16)

    def test_png(self, tmp_path: Path) -> None:
        """Test that 16-bit millimetre PNGs are converted to metres."""
        grid = self.GRID.copy()
        grid[5, 7] = 250
        fp = tmp_path / 'capture.png'
        Image.fromarray(grid).save(fp)
        img = import_depth(fp, CAMERA)
        assert img.depth[5, 7] == pytest.approx(0.25)
        assert img.depth[0, 0] == pytest.approx(0.29)
        assert img.intrinsics == CAMERA.K

    def test_raw_missing_pixels(self, tmp_path: Path) -> None:
        """Test that zero pixels of a raw grid are set to the ground depth."""
        grid = self.GRID.copy()
        grid[0, :5] = 0
        fp = tmp_path / 'capture.u16'
        grid.astype('<u2').tofile(fp)
        img = import_depth(fp, CAMERA)
        assert np.all(img.depth[0, :5] == CAMERA.height_above_ground)

    def test_wrong_resolution(self, tmp_path: Path) -> None:
        """Test that grids of another resolution are rejected."""
        fp = tmp_path / 'capture.png'
        Image.fromarray(np.full((10, 10), 290, dtype=np.uint16)).save(fp)
        with pytest.raises(SchemaMismatchError):
            import_depth(fp, CAMERA)

    def test_raw_wrong_size(self, tmp_path: Path) -> None:
        """Test that raw grids with the wrong number of values are rejected."""
        fp = tmp_path / 'capture.u16'
        np.zeros(17, dtype='<u2').tofile(fp)
        with pytest.raises(SchemaMismatchError):
            import_depth(fp, CAMERA)


class TestMasks:
    """Test :func:`save_mask` and :func:`load_mask`."""

    @pytest.mark.parametrize('name', ['mask.png', 'mask.npy'])
    def test_round_trip(self, tmp_path: Path, name: str) -> None:
        """Test that a saved mask loads back unchanged."""
        mask = np.zeros((20, 40), dtype=bool)
        mask[4:9, 10:30] = True
        save_mask(mask, tmp_path / name)
        assert np.array_equal(load_mask(tmp_path / name, (20, 40)), mask)

    def test_shape_mismatch(self, tmp_path: Path) -> None:
        """Test that a mask of the wrong shape is rejected."""
        np.save(tmp_path / 'mask.npy', np.ones((3, 3), dtype=bool))
        with pytest.raises(SchemaMismatchError):
            load_mask(tmp_path / 'mask.npy', (20, 40))
