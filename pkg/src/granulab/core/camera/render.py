"""Rendering settled scenes into birds-eye depth images.

The camera sits on the vertical axis through the origin at
`height_above_ground` and looks straight down. Pixel `(u, v)` sees the
ray through camera-frame direction `((u - cx) / fx, -(v - cy) / fy, 1)`,
so image rows grow towards negative world `y`. Depth is the distance
along the optical axis, i.e. `height_above_ground - z` of the hit point.
"""
import math

import numpy as np
from numba import njit

from granulab.core.errors import ConfigError
from granulab.core.models.camera import CameraConfig, DepthImage
from granulab.core.models.grain import SceneState


@njit(cache=True)
def _splat_spheres(depth, centres, radius, camera_height, fx, fy, cx, cy):
    """Z-buffer the nearest ray-sphere hits into `depth` in place."""
    height, width = depth.shape
    r2 = radius * radius
    for s in range(centres.shape[0]):
        px = centres[s, 0]
        py = centres[s, 1]
        pz = centres[s, 2]
        d_centre = camera_height - pz
        if d_centre <= radius:
            continue
        # The silhouette lies inside the projection of the bounding box,
        # whose extremes are attained at its corners.
        near = d_centre - radius
        far = d_centre + radius
        x_lo = min((px - radius) / near, (px - radius) / far)
        x_hi = max((px + radius) / near, (px + radius) / far)
        y_lo = min((py - radius) / near, (py - radius) / far)
        y_hi = max((py + radius) / near, (py + radius) / far)
        u0 = max(int(math.floor(cx + fx * x_lo)), 0)
        u1 = min(int(math.ceil(cx + fx * x_hi)), width - 1)
        v0 = max(int(math.floor(cy - fy * y_hi)), 0)
        v1 = min(int(math.ceil(cy - fy * y_lo)), height - 1)
        # Ray o + t * w with o = (0, 0, H), w = (a, b, -1); t is the depth.
        ox = -px
        oy = -py
        oz = camera_height - pz
        for v in range(v0, v1 + 1):
            b = -(v - cy) / fy
            for u in range(u0, u1 + 1):
                a = (u - cx) / fx
                qa = a * a + b * b + 1.0
                qb = 2.0 * (a * ox + b * oy - oz)
                qc = ox * ox + oy * oy + oz * oz - r2
                disc = qb * qb - 4.0 * qa * qc
                if disc < 0.0:
                    continue
                t = (-qb - math.sqrt(disc)) / (2.0 * qa)
                if 0.0 < t < depth[v, u]:
                    depth[v, u] = t


def render_depth(state: SceneState, cam: CameraConfig, radius: float) -> DepthImage:
    """Render the nearest grain surface seen by each pixel.

    Pixels that miss every grain see the ground plane, whose depth is the
    camera height.

    Args:
        state: The scene to render.
        cam: The camera.
        radius: The grain radius.

    Examples:
        >>> empty = SceneState.at_rest(np.zeros((0, 3)))
        >>> img = render_depth(empty, CameraConfig(), 0.002)
        >>> img.depth.shape, float(img.depth.min()), float(img.depth.max())
        ((320, 320), 0.29, 0.29)
    """
    width, height = cam.native_resolution
    k = cam.K
    depth = np.full((height, width), cam.height_above_ground, dtype=np.float64)
    _splat_spheres(depth, state.positions, float(radius), cam.height_above_ground,
                   k.fx, k.fy, k.cx, k.cy)
    return DepthImage(depth, k, cam.height_above_ground)


def downsample(img: DepthImage, n: int) -> DepthImage:
    """Block-mean pool an image over `n` by `n` blocks.

    Raises:
        ConfigError: If `n` does not divide both image dimensions.

    Examples:
        >>> from granulab.core.models.camera import Intrinsics
        >>> img = DepthImage(np.array([[0.29, 0.29], [0.27, 0.27]]),
        ...                  Intrinsics(2.0, 2.0, 1.0, 1.0), 0.29)
        >>> downsample(img, 2).depth.round(12).tolist()
        [[0.28]]
    """
    if n < 1 or img.height % n or img.width % n:
        raise ConfigError(
            f'downsample factor {n} does not divide {img.width}x{img.height}')
    if n == 1:
        return img.with_depth(img.depth.copy())
    blocks = img.depth.reshape(img.height // n, n, img.width // n, n)
    return DepthImage(blocks.mean(axis=(1, 3)), img.intrinsics.pooled(n),
                      img.camera_height)


def downsample_mask(mask: np.ndarray, n: int) -> np.ndarray:
    """Pool a boolean mask like :func:`downsample`; a block is set when most of it is.

    Examples:
        >>> downsample_mask(np.array([[1, 1], [1, 0]], dtype=bool), 2).tolist()
        [[True]]
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if n < 1 or h % n or w % n:
        raise ConfigError(f'downsample factor {n} does not divide {w}x{h}')
    return mask.reshape(h // n, n, w // n, n).mean(axis=(1, 3)) >= 0.5
