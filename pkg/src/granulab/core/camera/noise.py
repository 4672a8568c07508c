"""Observation noise models for native-resolution depth images.

Noise is applied before downsampling; :func:`apply_noise` applies the
blur first and the pixel noise second.
"""
import math

import numpy as np
from scipy.ndimage import gaussian_filter

from granulab.core.models.camera import DepthImage, NoiseConfig


def apply_blur(img: DepthImage, blur_sigma: float) -> DepthImage:
    """Blur an image in XY with a normalized Gaussian kernel.

    The kernel is separable with radius `ceil(3 * sigma)` pixels, and
    borders are handled by reflection. A zero sigma returns an exact copy.

    Examples:
        >>> from granulab.core.models.camera import Intrinsics
        >>> img = DepthImage(np.full((8, 8), 0.29), Intrinsics(4., 4., 4., 4.), 0.29)
        >>> bool(np.allclose(apply_blur(img, 2.0).depth, 0.29))
        True
    """
    if blur_sigma < 0:
        raise ValueError(f'blur_sigma must be non-negative, got {blur_sigma}')
    if blur_sigma == 0:
        return img.with_depth(img.depth.copy())
    blurred = gaussian_filter(img.depth, sigma=blur_sigma, mode='reflect',
                              radius=math.ceil(3 * blur_sigma))
    return img.with_depth(blurred)


def apply_pixel_noise(img: DepthImage, pixel_sigma: float, seed: int) -> DepthImage:
    """Add i.i.d. zero-mean Gaussian noise, in metres, to every pixel.

    The same seed always produces the same noise field.
    """
    if pixel_sigma < 0:
        raise ValueError(f'pixel_sigma must be non-negative, got {pixel_sigma}')
    if pixel_sigma == 0:
        return img.with_depth(img.depth.copy())
    rng = np.random.default_rng(seed)
    return img.with_depth(img.depth + rng.normal(0.0, pixel_sigma, img.depth.shape))


def apply_noise(img: DepthImage, noise: NoiseConfig) -> DepthImage:
    """Apply the blur and then the pixel noise of `noise`."""
    out = apply_blur(img, noise.blur_sigma)
    return apply_pixel_noise(out, noise.pixel_sigma, noise.seed)
