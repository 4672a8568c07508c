"""The summary statistics of a grain formation and distances between them."""
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import dcor
import numpy as np
from scipy import stats as sps

from granulab.core.data.utils.io import read_csv, write_csv
from granulab.core.errors import SchemaMismatchError
from granulab.core.features.chi import MIN_POINTS, degenerate_fit, fit_chi
from granulab.core.features.geometry import camera_to_world, level_ground, \
    pixels_to_camera, reproject, segment
from granulab.core.models.camera import DepthImage
from granulab.core.models.features import STAT_NAMES, GrainPointCloud, SummaryStats
from granulab.core.models.inference import STD_FLOOR

logger = logging.getLogger(__name__)

# Largest number of points used by the distance correlation.
DCOR_MAX_POINTS = 4096
DCOR_SEED = 0


def distance_correlation(r: np.ndarray, z: np.ndarray,
                         max_points: int = DCOR_MAX_POINTS,
                         seed: int = DCOR_SEED) -> float:
    """Return the distance correlation of two samples, in `[0, 1]`.

    Samples longer than `max_points` are subsampled uniformly without
    replacement with a fixed seed. A constant sample gives 0.

    Examples:
        >>> x = np.array([0.0, 1.0, 2.0, 4.0])
        >>> round(distance_correlation(x, x), 12)
        1.0
        >>> distance_correlation(x, np.ones(4))
        0.0
    """
    r = np.asarray(r, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if len(r) != len(z):
        raise ValueError('samples must have the same length')
    if len(r) > max_points:
        idx = np.sort(np.random.default_rng(seed).choice(len(r), max_points, replace=False))
        r, z = r[idx], z[idx]
    if len(r) < 2 or np.ptp(r) == 0 or np.ptp(z) == 0:
        return 0.0
    value = float(dcor.distance_correlation(r, z, method='naive'))
    return min(max(value, 0.0), 1.0)


def kurtosis(x: np.ndarray) -> float:
    """The standard (non-excess) kurtosis; 0 for a constant sample."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0
    return float(sps.kurtosis(x, fisher=False, bias=True))


def iqr(x: np.ndarray) -> float:
    """Interquartile range with linearly interpolated quantiles."""
    return float(sps.iqr(x, interpolation='linear'))


def summarize_cloud(cloud: GrainPointCloud) -> SummaryStats:
    """Compute the 16 statistics of a point cloud.

    `x` and `y` statistics are computed after centring on the horizontal
    centroid.
    """
    points = cloud.centred().points
    x, y, z, r = points[:, 0], points[:, 1], cloud.z, cloud.r
    if len(r) >= MIN_POINTS:
        chi = fit_chi(r)
    else:
        logger.debug('only %d grain points; using a degenerate chi fit', len(r))
        chi = degenerate_fit(r)
    return SummaryStats([
        z.max(), z.mean(), z.std(),
        r.max(), r.mean(),
        x.std(), y.std(), r.std(),
        iqr(x), iqr(y), iqr(r),
        kurtosis(r), distance_correlation(r, z),
        chi.df, chi.b, chi.A,
    ])


def summarize(img: DepthImage, radius: float, mask: Optional[np.ndarray] = None,
              level: Optional[bool] = None) -> SummaryStats:
    """Compute the summary statistics of a depth image.

    The image is segmented, back-projected and, when levelling is on,
    rotated so that the ground plane fitted to the non-grain pixels
    becomes `z = 0`.

    Args:
        img: The (downsampled) depth image.
        radius: The grain radius used by threshold segmentation.
        mask: An optional grain mask for externally captured images.
        level: Whether to level the ground. Defaults to True exactly when
            a mask is given.

    Raises:
        EmptySegmentationError: If the image has no grain pixels.
    """
    pixels = segment(img, radius, mask)
    cloud = reproject(pixels, img)
    if level is None:
        level = mask is not None
    if level:
        v, u = np.nonzero(~pixels)
        ground = camera_to_world(pixels_to_camera(u, v, img.depth[v, u], img.intrinsics),
                                 img.camera_height)
        cloud = level_ground(cloud, ground)
    return summarize_cloud(cloud)


def radial_percentiles(img: DepthImage, radius: float,
                       percentiles: Sequence[float] = (5.0, 50.0),
                       mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Return percentiles of the radial distance of grain pixels from their centroid."""
    cloud = reproject(segment(img, radius, mask), img)
    return np.percentile(cloud.r, list(percentiles))


def select_statistics(stats: Union[SummaryStats, np.ndarray],
                      names: Sequence[str]) -> np.ndarray:
    """Return the named statistics, in the given order.

    Rows of a 2-D array are treated as full statistic vectors.

    Raises:
        KeyError: If a name is not a statistic.
    """
    unknown = [n for n in names if n not in STAT_NAMES]
    if unknown:
        raise KeyError(f'unknown statistics: {", ".join(unknown)}')
    idx = [STAT_NAMES.index(n) for n in names]
    if isinstance(stats, SummaryStats):
        return stats.as_array()[idx]
    return np.asarray(stats, dtype=np.float64)[..., idx]


def standardize(stats: np.ndarray, reference_mean: np.ndarray,
                reference_std: np.ndarray) -> np.ndarray:
    """Z-score statistics against reference constants, flooring the std.

    Examples:
        >>> standardize(np.array([1.0, 3.0]), np.array([0.0, 3.0]), np.array([2.0, 0.0])).tolist()
        [0.5, 0.0]
    """
    stats = np.asarray(stats, dtype=np.float64)
    std = np.maximum(np.asarray(reference_std, dtype=np.float64), STD_FLOOR)
    return (stats - np.asarray(reference_mean, dtype=np.float64)) / std


def l2_error(stats_a: np.ndarray, stats_b: np.ndarray, reference_mean: np.ndarray,
             reference_std: np.ndarray) -> float:
    """Euclidean distance between two statistic vectors after standardization."""
    a = standardize(np.asarray(stats_a, dtype=np.float64), reference_mean, reference_std)
    b = standardize(np.asarray(stats_b, dtype=np.float64), reference_mean, reference_std)
    return float(np.linalg.norm(a - b))


def write_stats_csv(fp: Union[str, Path], rows: Sequence[SummaryStats]) -> None:
    """Write statistic vectors as CSV rows under the canonical header."""
    write_csv(fp, STAT_NAMES, (s.as_array().tolist() for s in rows))


def read_stats_csv(fp: Union[str, Path]) -> list[SummaryStats]:
    """Read statistic vectors written by :func:`write_stats_csv`.

    Raises:
        SchemaMismatchError: If the header is not the canonical one.
    """
    header, rows = read_csv(fp)
    if tuple(header) != STAT_NAMES:
        raise SchemaMismatchError(f'{fp} does not have the summary-statistic header')
    return [SummaryStats(float(v) for v in row) for row in rows]

