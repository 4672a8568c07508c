"""Test the :mod:`granulab.core.camera.render` module."""
import numpy as np
import pytest

from granulab.core.camera.render import downsample, downsample_mask, render_depth
from granulab.core.errors import ConfigError
from granulab.core.models.camera import CameraConfig, DepthImage, Intrinsics
from granulab.core.models.grain import SceneState

RADIUS = 0.002


class TestRenderDepth:
    """Test the :func:`granulab.core.camera.render.render_depth` function."""

    def test_grain_top(self) -> None:
        """Test that the pixel on the axis sees the top of a grain on the axis."""
        cam = CameraConfig()
        img = render_depth(SceneState.at_rest(np.array([[0.0, 0.0, RADIUS]])), cam, RADIUS)
        assert img.depth[160, 160] == pytest.approx(cam.height_above_ground - 2 * RADIUS)
        assert img.depth[0, 0] == cam.height_above_ground
        assert img.depth.min() == pytest.approx(cam.height_above_ground - 2 * RADIUS)

    def test_silhouette(self) -> None:
        """Test that the grain covers the pixels within its projected radius."""
        cam = CameraConfig()
        img = render_depth(SceneState.at_rest(np.array([[0.0, 0.0, RADIUS]])), cam, RADIUS)
        covered = img.depth < cam.height_above_ground
        # At about 1.8 mm per pixel the grain spans two or three pixels each way.
        assert 2 <= covered.sum() <= 16
        rows, cols = np.nonzero(covered)
        assert abs(rows.mean() - 160) <= 1 and abs(cols.mean() - 160) <= 1

    def test_nearest_wins(self) -> None:
        """Test that the higher of two stacked grains is seen."""
        cam = CameraConfig()
        stacked = SceneState.at_rest(np.array([[0.0, 0.0, RADIUS], [0.0, 0.0, 3 * RADIUS]]))
        img = render_depth(stacked, cam, RADIUS)
        assert img.depth[160, 160] == pytest.approx(cam.height_above_ground - 4 * RADIUS)

    def test_image_orientation(self) -> None:
        """Test that positive world y appears in the upper image rows."""
        cam = CameraConfig()
        img = render_depth(SceneState.at_rest(np.array([[0.05, 0.1, RADIUS]])), cam, RADIUS)
        rows, cols = np.nonzero(img.depth < cam.height_above_ground)
        k = cam.K
        assert rows.mean() == pytest.approx(k.cy - k.fy * 0.1 / (0.29 - 2 * RADIUS), abs=1.5)
        assert cols.mean() == pytest.approx(k.cx + k.fx * 0.05 / (0.29 - 2 * RADIUS), abs=1.5)

    def test_outside_view(self) -> None:
        """Test that grains outside the field of view leave the image untouched."""
        cam = CameraConfig()
        img = render_depth(SceneState.at_rest(np.array([[1.0, 1.0, RADIUS]])), cam, RADIUS)
        assert np.all(img.depth == cam.height_above_ground)


class TestDownsample:
    """Test :func:`downsample` and :func:`downsample_mask`."""

    IMAGE = DepthImage(np.arange(16, dtype=float).reshape(4, 4),
                       Intrinsics(4.0, 4.0, 2.0, 2.0), 20.0)

    def test_block_mean(self) -> None:
        """Test that each output pixel is the mean of its block."""
        out = downsample(self.IMAGE, 2)
        assert out.depth.tolist() == [[2.5, 4.5], [10.5, 12.5]]
        assert out.intrinsics == Intrinsics(2.0, 2.0, 0.75, 0.75)
        assert out.camera_height == 20.0

    def test_identity(self) -> None:
        """Test that a factor of one copies the image."""
        out = downsample(self.IMAGE, 1)
        assert np.array_equal(out.depth, self.IMAGE.depth)
        assert out.depth is not self.IMAGE.depth

    @pytest.mark.parametrize('n', [0, 3])
    def test_bad_factor(self, n: int) -> None:
        """Test that factors that do not divide the image are rejected."""
        with pytest.raises(ConfigError):
            downsample(self.IMAGE, n)

    def test_default_camera(self) -> None:
        """Test that the default camera pools to a 16 by 16 image."""
        cam = CameraConfig()
        img = render_depth(SceneState.at_rest(np.zeros((0, 3))), cam, RADIUS)
        assert downsample(img, cam.downsample_factor).depth.shape == (16, 16)

    def test_mask(self) -> None:
        """Test that mask blocks are set by majority."""
        mask = np.zeros((4, 4), dtype=bool)
        mask[:2, :2] = True
        mask[2, 2] = True
        assert downsample_mask(mask, 2).tolist() == [[True, False], [False, False]]
        with pytest.raises(ConfigError):
            downsample_mask(mask, 3)
