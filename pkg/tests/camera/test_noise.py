"""Test the :mod:`granulab.core.camera.noise` module."""
import numpy as np
import pytest

from granulab.core.camera.noise import apply_blur, apply_noise, apply_pixel_noise
from granulab.core.models.camera import DepthImage, Intrinsics, NoiseConfig

K = Intrinsics(32.0, 32.0, 32.0, 32.0)


def _step_image() -> DepthImage:
    depth = np.full((64, 64), 0.29)
    depth[:, 32:] = 0.25
    return DepthImage(depth, K, 0.29)


class TestApplyBlur:
    """Test the :func:`granulab.core.camera.noise.apply_blur` function."""

    def test_zero(self) -> None:
        """Test that a zero sigma returns an identical copy."""
        img = _step_image()
        out = apply_blur(img, 0.0)
        assert np.array_equal(out.depth, img.depth)
        assert out.depth is not img.depth

    def test_preserves_mean(self) -> None:
        """Test that the normalized kernel keeps the image mean under reflection."""
        img = _step_image()
        out = apply_blur(img, 3.0)
        assert out.depth.mean() == pytest.approx(img.depth.mean())

    def test_smooths_edge(self) -> None:
        """Test that the step edge is spread over a few sigma."""
        out = apply_blur(_step_image(), 2.0).depth
        assert out[10, 31] < 0.29 and out[10, 32] > 0.25
        assert out[10, 31] == pytest.approx(0.29 - 0.04 * 0.40, abs=0.001)
        # Pixels further than the kernel radius are untouched.
        assert out[10, 20] == pytest.approx(0.29)
        assert out[10, 45] == pytest.approx(0.25)

    def test_negative(self) -> None:
        """Test that a negative sigma is rejected."""
        with pytest.raises(ValueError):
            apply_blur(_step_image(), -1.0)


class TestApplyPixelNoise:
    """Test the :func:`granulab.core.camera.noise.apply_pixel_noise` function."""

    def test_statistics(self) -> None:
        """Test that the noise is zero-mean with the requested deviation."""
        img = DepthImage(np.full((200, 200), 0.29), K, 0.29)
        noise = apply_pixel_noise(img, 0.002, seed=1).depth - 0.29
        assert abs(noise.mean()) < 0.002 * 4 / 200
        assert noise.std() == pytest.approx(0.002, rel=0.02)

    def test_seeded(self) -> None:
        """Test that the same seed gives the same field and another seed does not."""
        img = _step_image()
        a = apply_pixel_noise(img, 0.001, seed=5).depth
        b = apply_pixel_noise(img, 0.001, seed=5).depth
        c = apply_pixel_noise(img, 0.001, seed=6).depth
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestApplyNoise:
    """Test the :func:`granulab.core.camera.noise.apply_noise` function."""

    def test_identity(self) -> None:
        """Test that zero noise leaves the image unchanged."""
        img = _step_image()
        assert NoiseConfig().is_identity
        assert np.array_equal(apply_noise(img, NoiseConfig()).depth, img.depth)

    def test_blur_then_pixels(self) -> None:
        """Test that the pixel noise is added after blurring."""
        img = _step_image()
        noise = NoiseConfig(blur_sigma=2.0, pixel_sigma=0.001, seed=3)
        expected = apply_pixel_noise(apply_blur(img, 2.0), 0.001, 3).depth
        assert np.array_equal(apply_noise(img, noise).depth, expected)
