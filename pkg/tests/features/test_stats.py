"""Test the :mod:`granulab.core.features.stats` module."""
from pathlib import Path

import numpy as np
import pytest

from granulab.core.camera.render import render_depth
from granulab.core.errors import EmptySegmentationError, SchemaMismatchError
from granulab.core.features.stats import distance_correlation, iqr, kurtosis, l2_error, \
    radial_percentiles, read_stats_csv, select_statistics, summarize, summarize_cloud, \
    write_stats_csv
from granulab.core.models.camera import CameraConfig, DepthImage
from granulab.core.models.features import STAT_NAMES, GrainPointCloud, SummaryStats
from granulab.core.models.grain import SceneState

RADIUS = 0.002


def _brute_force_dcor(x: np.ndarray, y: np.ndarray) -> float:
    def centred(v: np.ndarray) -> np.ndarray:
        d = np.abs(v[:, None] - v[None, :])
        return d - d.mean(axis=0) - d.mean(axis=1)[:, None] + d.mean()

    a, b = centred(x), centred(y)
    dcov = (a * b).mean()
    return float(np.sqrt(dcov / np.sqrt((a * a).mean() * (b * b).mean())))


def _pile() -> SceneState:
    """A stepped cone of grains centred on the camera axis."""
    centres = []
    for layer in range(5):
        reach = 0.03 - 0.006 * layer
        steps = np.arange(-reach, reach + 1e-9, 2 * RADIUS)
        for x in steps:
            for y in steps:
                if x * x + y * y <= reach * reach:
                    centres.append((x, y, RADIUS + 2 * RADIUS * layer))
    return SceneState.at_rest(np.array(centres))


class TestDistanceCorrelation:
    """Test the :func:`granulab.core.features.stats.distance_correlation` function."""

    @pytest.mark.parametrize('seed', [0, 1, 2])
    def test_brute_force(self, seed: int) -> None:
        """Test against the O(m^2) definition."""
        rng = np.random.default_rng(seed)
        x = rng.normal(size=300)
        y = x ** 2 + rng.normal(scale=0.5, size=300)
        assert distance_correlation(x, y) == pytest.approx(_brute_force_dcor(x, y), abs=1e-9)

    def test_subsampled(self) -> None:
        """Test that long samples are subsampled deterministically."""
        rng = np.random.default_rng(4)
        x = rng.normal(size=500)
        y = -x + rng.normal(scale=0.1, size=500)
        a = distance_correlation(x, y, max_points=100)
        assert a == distance_correlation(x, y, max_points=100)
        assert 0.8 < a <= 1.0

    def test_length_mismatch(self) -> None:
        """Test that samples of different lengths are rejected."""
        with pytest.raises(ValueError):
            distance_correlation(np.zeros(3), np.zeros(4))


class TestMoments:
    """Test :func:`kurtosis` and :func:`iqr`."""

    def test_kurtosis(self) -> None:
        """Test the non-excess kurtosis of known samples."""
        assert kurtosis(np.array([-1.0, 1.0] * 10)) == pytest.approx(1.0)
        assert kurtosis(np.full(5, 2.0)) == 0.0
        normal = np.random.default_rng(5).normal(size=100_000)
        assert kurtosis(normal) == pytest.approx(3.0, abs=0.05)

    def test_iqr(self) -> None:
        """Test the interquartile range with interpolated quantiles."""
        assert iqr(np.arange(5.0)) == 2.0
        assert iqr(np.arange(4.0)) == 1.5


class TestSummarize:
    """Test the :func:`granulab.core.features.stats.summarize` function."""

    def test_pile(self) -> None:
        """Test the statistics of a rendered cone of grains."""
        cam = CameraConfig()
        stats = summarize(render_depth(_pile(), cam, RADIUS), radius=RADIUS)
        assert len(stats) == 16
        assert stats['max_z'] == pytest.approx(10 * RADIUS, abs=1e-3)
        assert 0 < stats['mean_z'] < stats['max_z']
        assert stats['max_r'] == pytest.approx(0.032, abs=0.004)
        assert stats['std_x'] == pytest.approx(stats['std_y'], rel=0.1)
        assert stats['dcor_rz'] > 0.5
        assert stats['chi_a'] > 0

    def test_levelled_pile(self) -> None:
        """Test that levelling a flat scene with a mask keeps the heights."""
        cam = CameraConfig()
        img = render_depth(_pile(), cam, RADIUS)
        mask = img.depth < cam.height_above_ground - 0.5 * RADIUS
        unlevelled = summarize(img, radius=RADIUS)
        levelled = summarize(img, RADIUS, mask)
        assert levelled['max_z'] == pytest.approx(unlevelled['max_z'], abs=1e-9)
        assert levelled['std_r'] == pytest.approx(unlevelled['std_r'], abs=1e-9)

    def test_empty(self) -> None:
        """Test that an image without grains raises."""
        img = render_depth(SceneState.at_rest(np.zeros((0, 3))), CameraConfig(), RADIUS)
        with pytest.raises(EmptySegmentationError):
            summarize(img, RADIUS)

    def test_radial_percentiles(self) -> None:
        """Test that radial percentiles are ordered and within the pile."""
        img = render_depth(_pile(), CameraConfig(), RADIUS)
        p5, p50 = radial_percentiles(img, RADIUS, (5.0, 50.0))
        assert 0 <= p5 < p50 < 0.032

class TestInvariance:
    """Test that the statistics ignore where the pile lies and how it is turned."""

    RADIAL = ['max_z', 'mean_z', 'std_z', 'max_r', 'mean_r', 'std_r', 'iqr_r',
              'kurt_r', 'dcor_rz']
    CHI = ['chi_df', 'chi_b', 'chi_a']

    @staticmethod
    def _cone() -> np.ndarray:
        rng = np.random.default_rng(8)
        r = 0.04 * np.sqrt(rng.uniform(size=600))
        phi = rng.uniform(0.0, 2 * np.pi, size=600)
        z = np.clip(0.03 - 0.6 * r + rng.normal(0.0, 0.002, size=600), 0.0, None)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])

    @staticmethod
    def _turn(points: np.ndarray, degrees: float, shift: tuple[float, float]) -> np.ndarray:
        a = np.radians(degrees)
        turned = points.copy()
        turned[:, 0] = np.cos(a) * points[:, 0] - np.sin(a) * points[:, 1] + shift[0]
        turned[:, 1] = np.sin(a) * points[:, 0] + np.cos(a) * points[:, 1] + shift[1]
        return turned

    @pytest.mark.parametrize('degrees, shift', [
        (0.0, (0.05, -0.02)),
        (37.0, (0.0, 0.0)),
        (135.0, (-0.03, 0.08)),
    ])
    def test_cloud(self, degrees: float, shift: tuple[float, float]) -> None:
        """Test that radial and height statistics survive a turn and a shift."""
        points = self._cone()
        base = summarize_cloud(GrainPointCloud(points))
        moved = summarize_cloud(GrainPointCloud(self._turn(points, degrees, shift)))
        for name in self.RADIAL:
            assert moved[name] == pytest.approx(base[name], rel=1e-6, abs=1e-12), name
        for name in self.CHI:
            assert moved[name] == pytest.approx(base[name], rel=1e-3, abs=1e-6), name

    def test_quarter_turn(self) -> None:
        """Test that a quarter turn swaps the x and y spreads."""
        points = self._cone()
        base = summarize_cloud(GrainPointCloud(points))
        moved = summarize_cloud(GrainPointCloud(self._turn(points, 90.0, (0.01, 0.01))))
        assert moved['std_x'] == pytest.approx(base['std_y'], rel=1e-9)
        assert moved['std_y'] == pytest.approx(base['std_x'], rel=1e-9)
        assert moved['iqr_x'] == pytest.approx(base['iqr_y'], rel=1e-9)

    def test_rendered_shift(self) -> None:
        """Test that moving a rendered pile off the camera axis keeps its shape."""
        cam = CameraConfig()
        pile = _pile()
        shifted = SceneState.at_rest(pile.positions + [0.02, -0.015, 0.0])
        base = summarize(render_depth(pile, cam, RADIUS), RADIUS)
        moved = summarize(render_depth(shifted, cam, RADIUS), RADIUS)
        assert moved['max_z'] == pytest.approx(base['max_z'], abs=5e-4)
        assert moved['mean_z'] == pytest.approx(base['mean_z'], abs=5e-4)
        assert moved['mean_r'] == pytest.approx(base['mean_r'], rel=0.1)
        assert moved['max_r'] == pytest.approx(base['max_r'], abs=3e-3)



class TestHelpers:
    """Test statistic selection, distances and CSV files."""

    STATS = SummaryStats(np.arange(16.0))

    def test_select(self) -> None:
        """Test selection by name from vectors and matrices."""
        assert select_statistics(self.STATS, ['max_r', 'max_z']).tolist() == [3.0, 0.0]
        matrix = np.stack([self.STATS.as_array()] * 2)
        assert select_statistics(matrix, ['chi_a']).tolist() == [[15.0], [15.0]]
        with pytest.raises(KeyError):
            select_statistics(self.STATS, ['height'])

    def test_l2(self) -> None:
        """Test the standardized distance."""
        a = np.array([1.0, 2.0])
        b = np.array([4.0, 6.0])
        assert l2_error(a, b, np.zeros(2), np.ones(2)) == pytest.approx(5.0)
        assert l2_error(a, b, np.zeros(2), np.full(2, 5.0)) == pytest.approx(1.0)

    def test_csv(self, tmp_path: Path) -> None:
        """Test that statistic CSVs read back exactly."""
        fp = tmp_path / 'stats.csv'
        rows = [self.STATS, SummaryStats(np.linspace(0.1, 1.7, 16))]
        write_stats_csv(fp, rows)
        assert read_stats_csv(fp) == rows

    def test_csv_header(self, tmp_path: Path) -> None:
        """Test that a CSV with another header is rejected."""
        fp = tmp_path / 'stats.csv'
        fp.write_text(','.join(reversed(STAT_NAMES)) + '\n')
        with pytest.raises(SchemaMismatchError):
            read_stats_csv(fp)

    def test_image_shape(self) -> None:
        """Test that summary statistics need a 2-D grid."""
        with pytest.raises(ValueError):
            DepthImage(np.zeros(4), CameraConfig().K, 0.29)
