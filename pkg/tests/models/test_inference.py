"""Test the :mod:`granulab.core.models.inference` module."""
import numpy as np
import pytest
from scipy import integrate, stats

import granulab.core.models.inference as inference
from granulab.core.errors import ConfigError


class TestTrainingSet:
    """Test the :class:`granulab.core.models.inference.TrainingSet` class."""

    DATA = inference.TrainingSet(np.arange(8.0).reshape(4, 2), np.arange(12.0).reshape(4, 3),
                                 ['a', 'b'], ['x', 'y', 'z'], provenance={'source': 't'})

    def test_defaults(self) -> None:
        """Test the default seeds and the standardization statistics."""
        assert len(self.DATA) == 4
        assert self.DATA.seeds == [0, 1, 2, 3]
        assert self.DATA.stat_mean.tolist() == [4.5, 5.5, 6.5]

    def test_std_floor(self) -> None:
        """Test that constant statistics get a positive deviation."""
        data = inference.TrainingSet(np.arange(3.0), np.ones(3), ['a'], ['x'])
        assert data.stat_std[0] == inference.STD_FLOOR

    def test_select(self) -> None:
        """Test column selection by name."""
        data = self.DATA.select(['b'], ['z', 'x'])
        assert data.theta[:, 0].tolist() == [1.0, 3.0, 5.0, 7.0]
        assert data.stats[0].tolist() == [2.0, 0.0]
        assert data.provenance == {'source': 't'}
        with pytest.raises(ValueError):
            self.DATA.select(stat_names=['w'])

    def test_head(self) -> None:
        """Test taking the first rows."""
        data = self.DATA.head(2)
        assert len(data) == 2 and data.seeds == [0, 1]

    @pytest.mark.parametrize('theta, stats_, names', [
        (np.zeros((3, 1)), np.zeros((2, 1)), ['a']),
        (np.zeros((1, 1)), np.zeros((1, 1)), ['a']),
        (np.zeros((3, 1)), np.zeros((3, 1)), ['a', 'b']),
        (np.full((3, 1), np.nan), np.zeros((3, 1)), ['a']),
    ])
    def test_invalid(self, theta: np.ndarray, stats_: np.ndarray, names: list) -> None:
        """Test row count, column name and finiteness checks."""
        with pytest.raises(ConfigError):
            inference.TrainingSet(theta, stats_, names, ['x'])


class TestPosterior:
    """Test the :class:`granulab.core.models.inference.Posterior` class."""

    MIXTURE = inference.Posterior([0.3, 0.7], [[0.0, 1.0], [2.0, -1.0]],
                                  [[1.0, 0.25], [0.5, 4.0]], ['a', 'b'],
                                  [[-5.0, 5.0], [-5.0, 5.0]])

    def test_log_density(self) -> None:
        """Test the mixture density against independent normals."""
        x = np.array([0.5, 0.2])
        expected = sum(
            w * stats.norm.pdf(x, m, np.sqrt(v)).prod()
            for w, m, v in zip(self.MIXTURE.weights, self.MIXTURE.means,
                               self.MIXTURE.variances))
        assert self.MIXTURE.density(x) == pytest.approx(expected)
        assert self.MIXTURE.log_density(np.stack([x, x])).shape == (2,)

    def test_moments(self) -> None:
        """Test the mixture mean and standard deviation."""
        assert self.MIXTURE.mean().tolist() == pytest.approx([1.4, -0.4])
        # E[a^2] = 0.3 * 1 + 0.7 * (0.5 + 4) = 3.45
        assert self.MIXTURE.std()[0] == pytest.approx(np.sqrt(3.45 - 1.4 ** 2))

    def test_sample(self) -> None:
        """Test that samples follow the mixture moments."""
        samples = self.MIXTURE.sample(50_000, np.random.default_rng(0))
        assert samples.mean(axis=0) == pytest.approx(self.MIXTURE.mean(), abs=0.05)
        assert samples.std(axis=0) == pytest.approx(self.MIXTURE.std(), rel=0.03)

    def test_marginal(self) -> None:
        """Test that a marginal integrates to one."""
        grid = np.linspace(-10.0, 10.0, 4001)
        density = self.MIXTURE.marginal(1, grid)
        assert integrate.trapezoid(density, grid) == pytest.approx(1.0, abs=1e-4)

    def test_mass_in_box(self) -> None:
        """Test the in-box mass of a narrow mixture and of a fixed dimension."""
        narrow = inference.Posterior([1.0], [[0.5, 0.0]], [[1e-4, 1e-4]], ['a', 'b'],
                                     [[0.0, 1.0], [0.0, 0.0]])
        assert narrow.mass_in_box() == 1.0

    @pytest.mark.parametrize('weights, variances', [
        ([0.5, 0.6], [[1.0], [1.0]]),
        ([-0.5, 1.5], [[1.0], [1.0]]),
        ([0.5, 0.5], [[1.0], [0.0]]),
    ])
    def test_invalid(self, weights: list, variances: list) -> None:
        """Test that invalid weights and variances are rejected."""
        with pytest.raises(ValueError):
            inference.Posterior(weights, [[0.0], [1.0]], variances, ['a'], [[0.0, 1.0]])


class TestSettings:
    """Test the feature map and schedule settings."""

    @pytest.mark.parametrize('changes', [
        {'n_features': 0},
        {'lengthscale_factor': 0.0},
    ])
    def test_rff_settings(self, changes: dict) -> None:
        """Test invalid feature settings."""
        with pytest.raises(ConfigError):
            inference.RffSettings(**changes)

    @pytest.mark.parametrize('changes', [
        {'n_components': 0},
        {'epochs': 0},
        {'learning_rate': 0.0},
        {'weight_decay': -1.0},
    ])
    def test_training_schedule(self, changes: dict) -> None:
        """Test invalid schedules."""
        with pytest.raises(ConfigError):
            inference.TrainingSchedule(**changes)
