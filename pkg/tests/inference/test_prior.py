"""Test the :mod:`granulab.core.inference.prior` module."""
import math

import numpy as np
import pytest

from granulab.core.errors import ConfigError
from granulab.core.inference.prior import grain_params, sample_prior, to_natural, to_theta
from granulab.core.models.grain import MATERIALS
from granulab.core.models.inference import ParameterRange, Prior, default_prior


class TestSamplePrior:
    """Test the :func:`granulab.core.inference.prior.sample_prior` function."""

    def test_within_bounds(self) -> None:
        """Test that every draw lies inside the inference-space box."""
        prior = default_prior()
        theta = sample_prior(prior, 1000)
        assert theta.shape == (1000, 3)
        assert (theta >= prior.bounds[:, 0]).all() and (theta <= prior.bounds[:, 1]).all()

    def test_log_uniform(self) -> None:
        """Test that the rolling friction is log-uniform in natural units."""
        mu_r = np.exp(sample_prior(default_prior(), 20_000, seed=4)[:, 1])
        # The geometric midpoint of 1e-7 and 1e-1.
        assert np.median(mu_r) == pytest.approx(1e-4, rel=0.25)
        decades = np.floor(np.log10(mu_r)).astype(int)
        counts = np.bincount(decades + 7, minlength=6)
        assert counts.min() > 0.8 * len(mu_r) / 6

    def test_fixed_column(self) -> None:
        """Test that a zero-width range always yields its value."""
        prior = default_prior().with_fixed(mu_r=1e-3)
        theta = sample_prior(prior, 50)
        assert np.all(theta[:, 1] == math.log(1e-3))
        assert prior.free_indices == [0, 2]

    def test_seeded(self) -> None:
        """Test that the prior seed makes draws reproducible."""
        prior = default_prior(seed=11)
        assert np.array_equal(sample_prior(prior, 5), sample_prior(prior, 5))
        assert not np.array_equal(sample_prior(prior, 5), sample_prior(prior, 5, seed=12))

    def test_negative_count(self) -> None:
        """Test that a negative count is rejected."""
        with pytest.raises(ValueError):
            sample_prior(default_prior(), -1)


class TestConversions:
    """Test the mapping between inference and natural space."""

    def test_round_trip(self) -> None:
        """Test that natural values survive a trip through inference space."""
        prior = default_prior()
        values = {'mu_s': 0.4, 'mu_r': 2.5e-5, 'e': 0.3}
        theta = to_theta(prior, values)
        assert theta[1] == pytest.approx(math.log(2.5e-5))
        assert to_natural(prior, theta) == pytest.approx(values)

    def test_missing_value(self) -> None:
        """Test that a parameter without a value raises."""
        with pytest.raises(KeyError):
            to_theta(default_prior(), {'mu_s': 0.4, 'e': 0.3})

    def test_grain_params(self) -> None:
        """Test that only the material coefficients are replaced."""
        base = MATERIALS['barley'].replace(radius=0.003)
        params = grain_params(default_prior(), np.array([0.2, math.log(1e-5), 0.9]), base)
        assert (params.mu_s, params.e, params.radius) == (0.2, 0.9, 0.003)
        assert params.mu_r == pytest.approx(1e-5)


class TestPriorModel:
    """Test the :class:`granulab.core.models.inference.Prior` model."""

    def test_names_and_bounds(self) -> None:
        """Test inference-space names and bounds of the default prior."""
        prior = default_prior()
        assert prior.theta_names == ['mu_s', 'ln_mu_r', 'e']
        assert prior.bounds[1] == pytest.approx([math.log(1e-7), math.log(1e-1)])

    @pytest.mark.parametrize('low, high, log', [
        (0.5, 0.1, False),
        (0.0, 1.0, True),
    ])
    def test_invalid_range(self, low: float, high: float, log: bool) -> None:
        """Test that inverted and non-positive log ranges are rejected."""
        with pytest.raises(ConfigError):
            ParameterRange('x', low, high, log)

    def test_empty(self) -> None:
        """Test that a prior without parameters is rejected."""
        with pytest.raises(ConfigError):
            Prior(())
