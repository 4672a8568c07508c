"""Sampling the parameter prior."""
import logging
from typing import Optional

import numpy as np

from granulab.core.models.grain import GrainParams
from granulab.core.models.inference import Prior

logger = logging.getLogger(__name__)


def sample_prior(prior: Prior, count: int, seed: Optional[int] = None) -> np.ndarray:
    """Draw i.i.d. parameter vectors in inference space.

    Log-scaled parameters are drawn uniformly in log space, which makes
    them log-uniform in natural units. A zero-width range always yields its
    single value.

    Args:
        prior: The prior to sample.
        count: The number of draws.
        seed: Overrides the prior's seed.

    Returns:
        An array of shape `(count, P)`, columns in `prior.theta_names` order.

    Examples:
        >>> from granulab.core.models.inference import default_prior
        >>> theta = sample_prior(default_prior().with_fixed(e=0.5), 3)
        >>> theta.shape, theta[:, 2].tolist()
        ((3, 3), [0.5, 0.5, 0.5])
    """
    if count < 0:
        raise ValueError('count must be non-negative')
    rng = np.random.default_rng(prior.seed if seed is None else seed)
    bounds = prior.bounds
    draws = rng.uniform(size=(count, len(prior.ranges)))
    theta = bounds[:, 0] + draws * (bounds[:, 1] - bounds[:, 0])
    for i, r in enumerate(prior.ranges):
        if r.is_fixed:
            theta[:, i] = bounds[i, 0]
    return theta


def to_natural(prior: Prior, theta: np.ndarray) -> dict[str, float]:
    """Map one inference-space vector to natural-space values by name."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    return {r.name: float(np.exp(v)) if r.log else float(v)
            for r, v in zip(prior.ranges, theta)}


def to_theta(prior: Prior, values: dict[str, float]) -> np.ndarray:
    """Map natural-space values to an inference-space vector.

    Raises:
        KeyError: If a parameter of the prior has no value.
    """
    return np.array([np.log(values[r.name]) if r.log else values[r.name]
                     for r in prior.ranges], dtype=np.float64)


def grain_params(prior: Prior, theta: np.ndarray, base: GrainParams) -> GrainParams:
    """Return `base` with the material parameters taken from `theta`."""
    values = to_natural(prior, theta)
    return base.replace(**{k: v for k, v in values.items()
                           if k in ('mu_s', 'mu_r', 'e')})
