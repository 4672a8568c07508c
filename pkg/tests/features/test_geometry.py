"""Test the :mod:`granulab.core.features.geometry` module."""
import math

import numpy as np
import pytest

from granulab.core.errors import DegenerateGroundError, EmptySegmentationError
from granulab.core.features.geometry import camera_to_world, fit_ground_plane, \
    level_ground, pixels_to_camera, project, reproject, segment, tilt_degrees
from granulab.core.models.camera import DepthImage, Intrinsics
from granulab.core.models.features import GrainPointCloud

K = Intrinsics(8.0, 8.0, 7.5, 7.5)
RADIUS = 0.002


def _tilted_plane(degrees: float, height: float, n: int = 400, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    xy = rng.uniform(-0.2, 0.2, size=(n, 2))
    z = math.tan(math.radians(degrees)) * xy[:, 0] + height
    return np.column_stack([xy, z])


class TestSegment:
    """Test the :func:`granulab.core.features.geometry.segment` function."""

    def test_threshold(self) -> None:
        """Test that pixels above half a grain radius count as grain."""
        depth = np.full((4, 4), 0.29)
        depth[1, 1] = 0.29 - 0.6 * RADIUS
        depth[2, 2] = 0.29 - 0.4 * RADIUS
        selected = segment(DepthImage(depth, K, 0.29), RADIUS)
        assert selected.sum() == 1 and selected[1, 1]

    def test_mask_used_verbatim(self) -> None:
        """Test that a given mask overrides the threshold."""
        img = DepthImage(np.full((4, 4), 0.29), K, 0.29)
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 3] = True
        assert np.array_equal(segment(img, RADIUS, mask), mask)

    def test_empty(self) -> None:
        """Test that an image of bare ground raises."""
        with pytest.raises(EmptySegmentationError):
            segment(DepthImage(np.full((4, 4), 0.29), K, 0.29), RADIUS)

    def test_mask_shape(self) -> None:
        """Test that a mask of another shape is rejected."""
        with pytest.raises(ValueError):
            segment(DepthImage(np.full((4, 4), 0.29), K, 0.29), RADIUS,
                    np.ones((2, 2), dtype=bool))


class TestProjection:
    """Test back-projection and projection."""

    def test_inverse(self) -> None:
        """Test that projecting back-projected pixels recovers them."""
        rng = np.random.default_rng(3)
        u, v = rng.uniform(0, 16, 50), rng.uniform(0, 16, 50)
        depth = rng.uniform(0.1, 0.3, 50)
        uvd = project(pixels_to_camera(u, v, depth, K), K)
        assert np.allclose(uvd, np.column_stack([u, v, depth]))

    def test_world_frame(self) -> None:
        """Test that image rows grow towards negative world y."""
        world = camera_to_world(np.array([[0.01, 0.02, 0.25]]), 0.29)
        assert world[0] == pytest.approx([0.01, -0.02, 0.04])

    def test_reproject(self) -> None:
        """Test that selected pixels map to world points above the ground."""
        depth = np.full((16, 16), 0.29)
        depth[7:9, 7:9] = 0.28
        img = DepthImage(depth, K, 0.29)
        cloud = reproject(segment(img, RADIUS), img)
        assert cloud.size == 4
        assert cloud.z == pytest.approx([0.01] * 4)


class TestLevelling:
    """Test ground-plane fitting and levelling."""

    @pytest.mark.parametrize('degrees', [0.0, 3.0, 10.0])
    def test_recovers_tilt(self, degrees: float) -> None:
        """Test that the fitted plane has the tilt it was sampled with."""
        normal, height = fit_ground_plane(_tilted_plane(degrees, 0.01))
        assert height == pytest.approx(0.01)
        assert math.degrees(math.acos(normal[2])) == pytest.approx(degrees, abs=1e-5)

    def test_outliers(self) -> None:
        """Test that a few far outliers do not bias the fit."""
        ground = _tilted_plane(5.0, 0.0)
        ground[:5, 2] += 0.05
        normal, height = fit_ground_plane(ground)
        assert math.degrees(math.acos(normal[2])) == pytest.approx(5.0, abs=0.05)
        assert height == pytest.approx(0.0, abs=1e-3)

    @pytest.mark.parametrize('points', [
        np.zeros((2, 3)),
        np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [3.0, 3.0, 0.0]]),
    ])
    def test_degenerate(self, points: np.ndarray) -> None:
        """Test that too few or collinear points raise."""
        with pytest.raises(DegenerateGroundError):
            fit_ground_plane(points)

    def test_level_ground(self) -> None:
        """Test that grains on a tilted ground end up at their height above it."""
        degrees = 4.0
        ground = _tilted_plane(degrees, 0.02)
        a = math.radians(degrees)
        normal = np.array([-math.sin(a), 0.0, math.cos(a)])
        grains = _tilted_plane(degrees, 0.02, n=50, seed=1) + 0.01 * normal
        levelled = level_ground(GrainPointCloud(grains), ground)
        assert levelled.z == pytest.approx(np.full(50, 0.01))
        assert levelled.points[:, :2].mean(axis=0) == pytest.approx([0.0, 0.0], abs=1e-12)
        assert tilt_degrees(levelled.rotation) == pytest.approx(degrees)
