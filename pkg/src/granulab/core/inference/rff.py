"""Random Fourier features approximating the Matern-5/2 kernel.

Frequencies are drawn from the kernel's spectral density, a multivariate
Student-t with `2 * nu = 5` degrees of freedom scaled by the inverse
lengthscales, so that `phi(x) . phi(y)` is an unbiased estimate of
:func:`matern25`.
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from granulab.core.models.inference import MATERN_NU, RffConfig, RffSettings

logger = logging.getLogger(__name__)

_SQRT5 = math.sqrt(5.0)


def matern25(x: np.ndarray, y: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Evaluate the Matern kernel with smoothness 5/2.

    `k = (1 + sqrt(5) d + 5 d^2 / 3) exp(-sqrt(5) d)`, where `d` is the
    Euclidean distance after dividing each coordinate by its lengthscale.
    Leading dimensions of `x` and `y` broadcast.

    Examples:
        >>> float(matern25(np.zeros(2), np.zeros(2), np.ones(2)))
        1.0
        >>> round(float(matern25(np.array([0.0]), np.array([1.0]), np.array([1.0]))), 4)
        0.524
    """
    diff = (np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) \
        / np.asarray(lengthscales, dtype=np.float64)
    d = np.sqrt((diff ** 2).sum(axis=-1))
    return (1.0 + _SQRT5 * d + 5.0 * d ** 2 / 3.0) * np.exp(-_SQRT5 * d)


def median_lengthscales(x: np.ndarray, factor: float = 1.0) -> np.ndarray:
    """Per-dimension median of pairwise absolute differences.

    Dimensions without spread get a lengthscale of 1.

    Args:
        x: Standardized inputs, shape `(N, S)`.
        factor: Multiplier applied to every lengthscale.
    """
    x = np.asarray(x, dtype=np.float64)
    x = x.reshape(len(x), -1)
    scales = np.ones(x.shape[1])
    if len(x) >= 2:
        for j in range(x.shape[1]):
            median = float(np.median(pdist(x[:, j:j + 1], 'cityblock')))
            if median > 0:
                scales[j] = median
    return scales * factor


def sample_rff(input_dim: int, settings: RffSettings,
               lengthscales: Optional[np.ndarray] = None) -> RffConfig:
    """Draw a feature map for inputs of length `input_dim`.

    Each frequency row is `z / sqrt(g)` divided by the lengthscales, with
    `z` standard normal and `g ~ Gamma(shape=nu, scale=1/nu)`. Phases are
    uniform in `[0, 2 pi)`. The draw depends only on `settings.seed`.

    Args:
        input_dim: The length of the statistic vectors.
        settings: The feature count and seed. Its lengthscale factor is
            not applied here.
        lengthscales: Per-dimension lengthscales. Defaults to ones.
    """
    if lengthscales is None:
        lengthscales = np.ones(input_dim)
    lengthscales = np.asarray(lengthscales, dtype=np.float64).ravel()
    if len(lengthscales) != input_dim:
        raise ValueError(f'expected {input_dim} lengthscales, got {len(lengthscales)}')
    rng = np.random.default_rng(settings.seed)
    d = settings.n_features
    z = rng.standard_normal((d, input_dim))
    g = rng.gamma(shape=MATERN_NU, scale=1.0 / MATERN_NU, size=(d, 1))
    omega = z / np.sqrt(g) / lengthscales
    phase = rng.uniform(0.0, 2.0 * np.pi, size=d)
    return RffConfig(omega=omega, phase=phase, lengthscales=lengthscales,
                     nu=MATERN_NU, seed=settings.seed)


def rff_features(x: np.ndarray, rff: RffConfig) -> np.ndarray:
    """Map inputs to `sqrt(2 / D) cos(omega x + phase)`.

    Args:
        x: One input of shape `(S,)` or a batch of shape `(N, S)`.
        rff: The feature map.

    Returns:
        Features of shape `(D,)` or `(N, D)`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != rff.input_dim:
        raise ValueError(f'expected inputs of length {rff.input_dim}, got {x.shape[-1]}')
    return math.sqrt(2.0 / rff.n_features) * np.cos(x @ rff.omega.T + rff.phase)
