"""Model definitions for the depth camera and its images."""
import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from granulab.core.errors import ConfigError


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics with square pixels.

    Pixel `(u, v)` has its centre at integer coordinates; `u` grows along
    image columns and `v` along rows.

    Instance Attributes:
        fx: Focal length along `u` in pixels.
        fy: Focal length along `v` in pixels.
        cx: Principal point column.
        cy: Principal point row.
    """

    fx: float
    fy: float
    cx: float
    cy: float

    @property
    def matrix(self) -> np.ndarray:
        """The 3x3 intrinsics matrix K."""
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def pooled(self, n: int) -> 'Intrinsics':
        """Return the intrinsics of an image block-pooled by factor `n`.

        Block `(i, j)` covers native pixels `n*i .. n*i + n - 1`, so its
        centre sits at native coordinate `n*i + (n - 1) / 2`.

        Examples:
            >>> Intrinsics(160.0, 160.0, 160.0, 160.0).pooled(20)
            Intrinsics(fx=8.0, fy=8.0, cx=7.525, cy=7.525)
        """
        offset = (n - 1) / 2.0
        return Intrinsics(fx=self.fx / n, fy=self.fy / n,
                          cx=(self.cx - offset) / n, cy=(self.cy - offset) / n)


@dataclass(frozen=True)
class CameraConfig:
    """A birds-eye depth camera looking straight down at the ground.

    The camera sits on the funnel axis. When no intrinsics are given they
    are derived so that the image spans `footprint` metres at ground level.

    Instance Attributes:
        height_above_ground: Height of the optical centre in metres.
        native_resolution: `(width, height)` in pixels.
        footprint: Side length of the square field of view at the ground.
        downsample_factor: Block size used before extracting statistics.
        intrinsics: The pinhole intrinsics.
    """

    height_above_ground: float = 0.29
    native_resolution: tuple[int, int] = (320, 320)
    footprint: float = 0.58
    downsample_factor: int = 20
    intrinsics: Optional[Intrinsics] = None

    def __post_init__(self) -> None:
        """Derive default intrinsics and validate the configuration."""
        width, height = (int(n) for n in self.native_resolution)
        object.__setattr__(self, 'native_resolution', (width, height))
        if not self.height_above_ground > 0 or not self.footprint > 0:
            raise ConfigError('camera height and footprint must be positive')
        if width < 1 or height < 1:
            raise ConfigError(f'invalid resolution {self.native_resolution}')
        if self.intrinsics is None:
            f = width * self.height_above_ground / self.footprint
            object.__setattr__(self, 'intrinsics',
                               Intrinsics(f, f, width / 2.0, height / 2.0))
        n = self.downsample_factor
        if n < 1 or width % n or height % n:
            raise ConfigError(
                f'downsample factor {n} does not divide {self.native_resolution}')
        half = self.footprint / 2.0
        k = self.intrinsics
        assert k is not None
        # Ground half-extent seen by the outermost pixel centres.
        seen_x = min(k.cx, width - 1 - k.cx) / k.fx * self.height_above_ground
        seen_y = min(k.cy, height - 1 - k.cy) / k.fy * self.height_above_ground
        pixel = self.height_above_ground / min(k.fx, k.fy)
        if min(seen_x, seen_y) + 1.5 * pixel < half:
            raise ConfigError('camera field of view does not cover the footprint')

    @property
    def K(self) -> Intrinsics:
        """The intrinsics, never None after construction."""
        assert self.intrinsics is not None
        return self.intrinsics

    def replace(self, **changes: object) -> 'CameraConfig':
        """Return a copy with the given fields replaced.

        Intrinsics are re-derived unless explicitly supplied.
        """
        if 'intrinsics' not in changes:
            changes['intrinsics'] = None
        return dataclasses.replace(self, **changes)  # type: ignore


@dataclass(eq=False)
class DepthImage:
    """A metric depth image taken by a downward-looking camera.

    Instance Attributes:
        depth: Row-major grid of distances from the camera plane, in
            metres, shape `(height, width)`.
        intrinsics: The intrinsics of this (possibly pooled) image.
        camera_height: Height of the camera above the ground.
    """

    depth: np.ndarray
    intrinsics: Intrinsics
    camera_height: float

    def __post_init__(self) -> None:
        """Coerce the grid to float64 and check that it is finite."""
        self.depth = np.ascontiguousarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 2:
            raise ValueError(f'depth grid must be 2-D, got shape {self.depth.shape}')
        if not np.isfinite(self.depth).all():
            raise ValueError('depth grid contains non-finite values')

    @property
    def width(self) -> int:
        """Image width in pixels."""
        return int(self.depth.shape[1])

    @property
    def height(self) -> int:
        """Image height in pixels."""
        return int(self.depth.shape[0])

    def with_depth(self, depth: np.ndarray) -> 'DepthImage':
        """Return an image with the same camera and a new depth grid."""
        return DepthImage(depth, self.intrinsics, self.camera_height)


@dataclass(frozen=True)
class NoiseConfig:
    """Observation noise applied to a native-resolution depth image.

    Instance Attributes:
        blur_sigma: Standard deviation of the XY Gaussian blur in pixels.
        pixel_sigma: Standard deviation of per-pixel depth noise in metres.
        seed: Seed of the pixel-noise generator.
    """

    blur_sigma: float = 0.0
    pixel_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the noise magnitudes."""
        if self.blur_sigma < 0 or self.pixel_sigma < 0:
            raise ConfigError('noise standard deviations must be non-negative')

    @property
    def is_identity(self) -> bool:
        """Whether this configuration leaves images unchanged."""
        return self.blur_sigma == 0 and self.pixel_sigma == 0
