"""Segmentation, back-projection and ground-plane levelling of depth images.

Camera-frame coordinates follow the pinhole convention: `x` along image
columns, `y` along image rows and `z` along the optical axis. The nominal
world frame has the ground at `z = 0` directly below the camera, with
`X = x`, `Y = -y` and `Z = camera_height - z`.
"""
import logging
from typing import Optional

import numpy as np

from granulab.core.errors import DegenerateGroundError, EmptySegmentationError
from granulab.core.models.camera import DepthImage, Intrinsics
from granulab.core.models.features import GrainPointCloud

logger = logging.getLogger(__name__)

# Grain pixels are closer to the camera than the ground by at least this
# fraction of the grain radius.
SEGMENTATION_FRACTION = 0.5


def segment(img: DepthImage, radius: float,
            mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Select the grain pixels of an image.

    Args:
        img: The depth image.
        radius: The grain radius, used by the depth threshold.
        mask: A per-pixel boolean mask of grain pixels. When given it is
            used verbatim.

    Returns:
        A boolean array with the image's shape.

    Raises:
        EmptySegmentationError: If no pixel is selected.
    """
    if mask is not None:
        selected = np.asarray(mask, dtype=bool)
        if selected.shape != img.depth.shape:
            raise ValueError(f'mask shape {selected.shape} does not match image {img.depth.shape}')
    else:
        selected = img.depth < img.camera_height - SEGMENTATION_FRACTION * radius
    if not selected.any():
        raise EmptySegmentationError('no grain pixels in the depth image')
    return selected


def pixels_to_camera(u: np.ndarray, v: np.ndarray, depth: np.ndarray,
                     k: Intrinsics) -> np.ndarray:
    """Back-project pixels to camera-frame points `depth * K^-1 (u, v, 1)`.

    Examples:
        >>> k = Intrinsics(100.0, 100.0, 50.0, 50.0)
        >>> pixels_to_camera(np.array([150.0]), np.array([50.0]), np.array([0.2]), k).tolist()
        [[0.2, 0.0, 0.2]]
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    x = depth * (u - k.cx) / k.fx
    y = depth * (v - k.cy) / k.fy
    return np.stack([x, y, depth], axis=-1)


def project(points: np.ndarray, k: Intrinsics) -> np.ndarray:
    """Project camera-frame points to `(u, v, depth)`; the inverse of :func:`pixels_to_camera`."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    depth = points[:, 2]
    u = k.fx * points[:, 0] / depth + k.cx
    v = k.fy * points[:, 1] / depth + k.cy
    return np.stack([u, v, depth], axis=-1)


def camera_to_world(points: np.ndarray, camera_height: float) -> np.ndarray:
    """Map camera-frame points to the nominal world frame."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return np.stack([points[:, 0], -points[:, 1], camera_height - points[:, 2]], axis=1)


def reproject(pixels: np.ndarray, img: DepthImage) -> GrainPointCloud:
    """Back-project selected pixels into the nominal world frame.

    Args:
        pixels: A boolean pixel mask, as returned by :func:`segment`.
        img: The depth image.
    """
    v, u = np.nonzero(pixels)
    camera = pixels_to_camera(u, v, img.depth[v, u], img.intrinsics)
    return GrainPointCloud(camera_to_world(camera, img.camera_height))


def _rotation_to_z(normal: np.ndarray) -> np.ndarray:
    """Return the rotation taking the unit vector `normal` onto `+z`."""
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(normal, z)
    s = np.linalg.norm(axis)
    c = float(normal @ z)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    axis = axis / s
    cross = np.array([[0.0, -axis[2], axis[1]],
                      [axis[2], 0.0, -axis[0]],
                      [-axis[1], axis[0], 0.0]])
    return np.eye(3) + s * cross + (1.0 - c) * cross @ cross


def _is_planar_support(points: np.ndarray) -> bool:
    """Whether the points contain three non-collinear points."""
    if len(points) < 3:
        return False
    centred = points - points.mean(axis=0)
    singular = np.linalg.svd(centred, compute_uv=False)
    scale = max(float(singular[0]), 1e-300)
    return bool(singular[1] > 1e-9 * scale)


def _fit_plane(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fit of `z = a x + b y + c`; returns coefficients and residuals."""
    design = np.column_stack([points[:, 0], points[:, 1], np.ones(len(points))])
    coef, *_ = np.linalg.lstsq(design, points[:, 2], rcond=None)
    return coef, points[:, 2] - design @ coef


def fit_ground_plane(ground: np.ndarray) -> tuple[np.ndarray, float]:
    """Fit the ground plane with one pass of 2-sigma outlier rejection.

    Returns:
        The upward unit normal and the plane's height at the origin.

    Raises:
        DegenerateGroundError: If fewer than three non-collinear points
            are available.
    """
    ground = np.asarray(ground, dtype=np.float64).reshape(-1, 3)
    if not _is_planar_support(ground[:, :2]):
        raise DegenerateGroundError(
            f'need at least 3 non-collinear ground points, got {len(ground)}')
    coef, residuals = _fit_plane(ground)
    sigma = residuals.std()
    inliers = ground[np.abs(residuals) <= 2.0 * sigma]
    if sigma > 0 and len(inliers) < len(ground) and _is_planar_support(inliers[:, :2]):
        logger.debug('ground fit rejected %d of %d points', len(ground) - len(inliers),
                     len(ground))
        coef, _ = _fit_plane(inliers)
    a, b, c = coef
    normal = np.array([-a, -b, 1.0])
    return normal / np.linalg.norm(normal), float(c)


def level_ground(cloud: GrainPointCloud, ground: np.ndarray) -> GrainPointCloud:
    """Rotate and translate a cloud so the fitted ground becomes `z = 0`.

    The grain centroid is moved to the origin horizontally.

    Args:
        cloud: The grain points in the nominal world frame.
        ground: Ground points in the same frame, shape `(m, 3)`.

    Raises:
        DegenerateGroundError: If the ground points do not span a plane.
    """
    normal, height = fit_ground_plane(ground)
    rotation = _rotation_to_z(normal)
    on_plane = rotation @ np.array([0.0, 0.0, height])
    points = cloud.points @ rotation.T
    points[:, 2] -= on_plane[2]
    if len(points):
        points[:, :2] -= points[:, :2].mean(axis=0)
    return GrainPointCloud(points, rotation=rotation @ cloud.rotation)


def tilt_degrees(rotation: np.ndarray) -> float:
    """Return the angle in degrees by which a rotation tilts the vertical axis."""
    z = np.asarray(rotation)[:, 2]
    return float(np.degrees(np.arccos(np.clip(z[2], -1.0, 1.0))))
