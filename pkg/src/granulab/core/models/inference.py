"""Model definitions for priors, training sets and posteriors.

Parameters are handled in inference space: each parameter is either used
as-is or through its natural logarithm (`log=True`), in which case the
inference-space name is prefixed with `ln_`.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from granulab.core.errors import ConfigError

# Floor applied to standard deviations used for standardization.
STD_FLOOR = 1e-9


@dataclass(frozen=True)
class ParameterRange:
    """The prior range and sampling law of one parameter.

    Instance Attributes:
        name: The natural-space name of the parameter.
        low: Lower bound in natural units.
        high: Upper bound in natural units.
        log: Whether the parameter is sampled log-uniformly and handled in
            log space during inference.
    """

    name: str
    low: float
    high: float
    log: bool = False

    def __post_init__(self) -> None:
        """Validate the range."""
        if not self.high >= self.low:
            raise ConfigError(f'{self.name}: high < low')
        if self.log and not self.low > 0:
            raise ConfigError(f'{self.name}: log-uniform range must be positive')

    @property
    def theta_name(self) -> str:
        """The inference-space name of the parameter."""
        return f'ln_{self.name}' if self.log else self.name

    @property
    def bounds(self) -> tuple[float, float]:
        """The range in inference space."""
        if self.log:
            return math.log(self.low), math.log(self.high)
        return self.low, self.high

    @property
    def is_fixed(self) -> bool:
        """Whether the range has zero width."""
        return self.high == self.low


@dataclass(frozen=True)
class Prior:
    """An independent uniform (or log-uniform) prior over parameters.

    Instance Attributes:
        ranges: One range per parameter, in inference-vector order.
        seed: The seed used by :func:`granulab.core.inference.prior.sample_prior`.
    """

    ranges: tuple[ParameterRange, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        """Normalize the ranges to a tuple."""
        object.__setattr__(self, 'ranges', tuple(self.ranges))
        if not self.ranges:
            raise ConfigError('a prior needs at least one parameter')

    @property
    def theta_names(self) -> list[str]:
        """Inference-space names of all parameters."""
        return [r.theta_name for r in self.ranges]

    @property
    def free_indices(self) -> list[int]:
        """Indices of the parameters with non-zero prior width."""
        return [i for i, r in enumerate(self.ranges) if not r.is_fixed]

    @property
    def bounds(self) -> np.ndarray:
        """Inference-space bounds, shape `(P, 2)`."""
        return np.array([r.bounds for r in self.ranges])

    def with_fixed(self, **values: float) -> 'Prior':
        """Return a prior where the named parameters are fixed at `values`.

        Values are given in natural units and keyed by natural-space name.
        """
        ranges = []
        for r in self.ranges:
            if r.name in values:
                v = float(values[r.name])
                r = ParameterRange(r.name, v, v, r.log)
            ranges.append(r)
        return Prior(tuple(ranges), self.seed)


def default_prior(seed: int = 0) -> Prior:
    """Return the material prior over `(mu_s, mu_r, e)`.

    Examples:
        >>> default_prior().theta_names
        ['mu_s', 'ln_mu_r', 'e']
    """
    return Prior((
        ParameterRange('mu_s', 0.01, 1.0),
        ParameterRange('mu_r', 1e-7, 1e-1, log=True),
        ParameterRange('e', 0.0, 1.0),
    ), seed)


@dataclass(eq=False)
class TrainingSet:
    """Pairs of parameters and summary statistics used to train a model.

    Instance Attributes:
        theta: Inference-space parameters, shape `(N, P)`.
        stats: Summary statistics, shape `(N, S)`.
        param_names: Inference-space parameter names.
        stat_names: Statistic names.
        seeds: The simulation seed of each row.
        provenance: Free-form metadata such as config digests.
    """

    theta: np.ndarray
    stats: np.ndarray
    param_names: list[str]
    stat_names: list[str]
    seeds: list[int] = field(default_factory=list)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate shapes and finiteness."""
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(len(self.theta), -1)
        self.stats = np.asarray(self.stats, dtype=np.float64).reshape(len(self.stats), -1)
        self.param_names = list(self.param_names)
        self.stat_names = list(self.stat_names)
        if len(self.theta) != len(self.stats):
            raise ConfigError('theta and stats must have the same number of rows')
        if len(self.theta) < 2:
            raise ConfigError('a training set needs at least two rows')
        if self.theta.shape[1] != len(self.param_names) \
                or self.stats.shape[1] != len(self.stat_names):
            raise ConfigError('column names do not match the array shapes')
        if not (np.isfinite(self.theta).all() and np.isfinite(self.stats).all()):
            raise ConfigError('training rows must be finite')
        if not self.seeds:
            self.seeds = list(range(len(self.theta)))

    def __len__(self) -> int:
        """Return the number of rows."""
        return len(self.theta)

    @property
    def stat_mean(self) -> np.ndarray:
        """Per-statistic mean over the rows."""
        return self.stats.mean(axis=0)

    @property
    def stat_std(self) -> np.ndarray:
        """Per-statistic population standard deviation, floored."""
        return np.maximum(self.stats.std(axis=0), STD_FLOOR)

    def head(self, n: int) -> 'TrainingSet':
        """Return the first `n` rows as a new training set."""
        return TrainingSet(self.theta[:n], self.stats[:n], self.param_names,
                           self.stat_names, self.seeds[:n], dict(self.provenance))

    def select(self, param_names: Optional[Sequence[str]] = None,
               stat_names: Optional[Sequence[str]] = None) -> 'TrainingSet':
        """Return a training set restricted to the named columns."""
        param_names = list(param_names or self.param_names)
        stat_names = list(stat_names or self.stat_names)
        p_idx = [self.param_names.index(n) for n in param_names]
        s_idx = [self.stat_names.index(n) for n in stat_names]
        return TrainingSet(self.theta[:, p_idx], self.stats[:, s_idx], param_names,
                           stat_names, list(self.seeds), dict(self.provenance))


@dataclass(frozen=True)
class TrainingSchedule:
    """Optimizer settings for fitting the mixture-density model.

    Instance Attributes:
        n_components: The number of mixture components K.
        epochs: The maximum number of full-batch epochs.
        learning_rate: The initial step size of the adaptive optimizer.
        plateau_window: Epochs over which the plateau test is applied.
        plateau_tol: Relative improvement below which training stops.
        weight_decay: L2 penalty on the readout weights.
        seed: Seed of the weight initialization.
    """

    n_components: int = 3
    epochs: int = 3000
    learning_rate: float = 1e-2
    plateau_window: int = 50
    plateau_tol: float = 1e-5
    weight_decay: float = 1e-5
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the schedule."""
        if self.n_components < 1:
            raise ConfigError('n_components must be at least 1')
        if self.epochs < 1 or self.plateau_window < 1:
            raise ConfigError('epochs and plateau_window must be positive')
        if not self.learning_rate > 0 or self.weight_decay < 0:
            raise ConfigError('invalid learning rate or weight decay')


@dataclass(eq=False)
class Posterior:
    """A Gaussian mixture with diagonal covariances over inference space.

    The mixture is untruncated; `bounds` records the prior box, which is
    used only to project point estimates and to measure in-box mass.

    Instance Attributes:
        weights: Mixture weights, shape `(K,)`.
        means: Component means, shape `(K, P)`.
        variances: Diagonal component variances, shape `(K, P)`.
        param_names: Inference-space parameter names.
        bounds: The prior box, shape `(P, 2)`.
        fixed: Inference-space values of parameters that the model does
            not infer, keyed by name.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    param_names: list[str]
    bounds: np.ndarray
    fixed: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Coerce arrays and check the mixture invariants."""
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        k = len(self.weights)
        self.means = np.asarray(self.means, dtype=np.float64).reshape(k, -1)
        self.variances = np.asarray(self.variances, dtype=np.float64).reshape(k, -1)
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(-1, 2)
        if (self.weights < 0).any() or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError('mixture weights must be non-negative and sum to 1')
        if not (self.variances > 0).all():
            raise ValueError('mixture variances must be positive')

    @property
    def n_components(self) -> int:
        """The number of mixture components."""
        return len(self.weights)

    @property
    def dim(self) -> int:
        """The dimension of the parameter space."""
        return self.means.shape[1]

    def log_density(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate the log density at one point or a batch of points."""
        theta = np.asarray(theta, dtype=np.float64)
        single = theta.ndim == 1
        x = theta.reshape(-1, self.dim)
        diff = x[:, None, :] - self.means[None, :, :]
        log_comp = -0.5 * ((diff ** 2) / self.variances
                           + np.log(2 * np.pi * self.variances)).sum(axis=-1)
        with np.errstate(divide='ignore'):
            log_w = np.log(self.weights)
        out = logsumexp(log_comp + log_w, axis=1)
        return out[0] if single else out

    def density(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate the density at one point or a batch of points."""
        return np.exp(self.log_density(theta))

    def mean(self) -> np.ndarray:
        """The mixture mean."""
        return self.weights @ self.means

    def std(self) -> np.ndarray:
        """The per-dimension mixture standard deviation."""
        second = self.weights @ (self.variances + self.means ** 2)
        return np.sqrt(np.maximum(second - self.mean() ** 2, 0.0))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `n` samples, shape `(n, P)`."""
        components = rng.choice(self.n_components, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[components] + noise * np.sqrt(self.variances[components])

    def marginal(self, index: int, grid: np.ndarray) -> np.ndarray:
        """Evaluate the marginal density of one parameter on a grid."""
        grid = np.asarray(grid, dtype=np.float64)
        mu = self.means[:, index]
        var = self.variances[:, index]
        comp = np.exp(-0.5 * (grid[:, None] - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)
        return comp @ self.weights

    def mass_in_box(self, n: int = 10000, seed: int = 0) -> float:
        """Estimate the probability mass inside the prior box by sampling.

        Fixed parameters (zero-width bounds) are ignored.
        """
        samples = self.sample(n, np.random.default_rng(seed))
        free = self.bounds[:, 1] > self.bounds[:, 0]
        lo, hi = self.bounds[free, 0], self.bounds[free, 1]
        inside = ((samples[:, free] >= lo) & (samples[:, free] <= hi)).all(axis=1)
        return float(inside.mean())

    def complete(self, theta: np.ndarray) -> dict[str, float]:
        """Return a full inference-space assignment, adding fixed values.

        Examples:
            >>> p = Posterior([1.0], [[0.4]], [[0.01]], ['mu_s'], [[0.0, 1.0]],
            ...               fixed={'e': 0.5})
            >>> p.complete(np.array([0.3]))
            {'mu_s': 0.3, 'e': 0.5}
        """
        values = {n: float(v) for n, v in zip(self.param_names, np.ravel(theta))}
        values.update(self.fixed)
        return values


# Smoothness of the Matern kernel approximated by the random features.
MATERN_NU = 2.5


@dataclass(frozen=True)
class RffSettings:
    """User-facing settings of the random Fourier feature map.

    Instance Attributes:
        n_features: The number of features D.
        lengthscale_factor: Multiplier applied to the median-heuristic
            lengthscales.
        seed: Seed of the frequency and phase draws.
    """

    n_features: int = 200
    lengthscale_factor: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the settings."""
        if self.n_features < 1:
            raise ConfigError('n_features must be at least 1')
        if not self.lengthscale_factor > 0:
            raise ConfigError('lengthscale_factor must be positive')


@dataclass(eq=False)
class RffConfig:
    """A sampled random Fourier feature map for the Matern kernel.

    Instance Attributes:
        omega: Frequency matrix, shape `(D, S)`, already divided by the
            lengthscales.
        phase: Phase offsets in `[0, 2*pi)`, shape `(D,)`.
        lengthscales: Per-input lengthscales, shape `(S,)`.
        nu: Kernel smoothness; always 2.5.
        seed: The seed the map was drawn with.
    """

    omega: np.ndarray
    phase: np.ndarray
    lengthscales: np.ndarray
    nu: float = MATERN_NU
    seed: int = 0

    def __post_init__(self) -> None:
        """Coerce arrays and validate the map."""
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=np.float64))
        self.phase = np.asarray(self.phase, dtype=np.float64).ravel()
        self.lengthscales = np.asarray(self.lengthscales, dtype=np.float64).ravel()
        if self.nu != MATERN_NU:
            raise ConfigError(f'only nu={MATERN_NU} is supported, got {self.nu}')
        if len(self.phase) != len(self.omega) or len(self.phase) < 1:
            raise ConfigError('omega and phase must describe at least one feature')
        if self.omega.shape[1] != len(self.lengthscales):
            raise ConfigError('omega columns must match the lengthscales')
        if not (self.lengthscales > 0).all():
            raise ConfigError('lengthscales must be positive')

    @property
    def n_features(self) -> int:
        """The number of features D."""
        return len(self.phase)

    @property
    def input_dim(self) -> int:
        """The length of the statistic vectors the map accepts."""
        return len(self.lengthscales)


@dataclass(eq=False)
class MdrffModel:
    """A trained mixture-density model over random Fourier features.

    The readout is an affine map from the D features to K logits, K mean
    vectors and K log-scale vectors. Means and scales live in standardized
    target space; :attr:`theta_mean` and :attr:`theta_std` map them back to
    inference space.

    Instance Attributes:
        rff: The feature map.
        n_components: The number of mixture components K.
        weight: Readout weights, shape `(D, K * (1 + 2P))`.
        bias: Readout bias, shape `(K * (1 + 2P),)`.
        stat_names: Names of the input statistics.
        stat_mean: Standardization mean of the statistics.
        stat_std: Standardization std of the statistics.
        param_names: Inference-space names of the inferred parameters.
        theta_mean: Standardization mean of the targets.
        theta_std: Standardization std of the targets.
        bounds: Prior box of the inferred parameters, shape `(P, 2)`.
        fixed: Values of parameters held fixed during training.
        diagnostics: Training diagnostics such as the final loss.
        provenance: Digests of the data and configs used for training.
    """

    rff: RffConfig
    n_components: int
    weight: np.ndarray
    bias: np.ndarray
    stat_names: list[str]
    stat_mean: np.ndarray
    stat_std: np.ndarray
    param_names: list[str]
    theta_mean: np.ndarray
    theta_std: np.ndarray
    bounds: np.ndarray
    fixed: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Coerce arrays and check that the shapes agree."""
        for name in ('weight', 'bias', 'stat_mean', 'stat_std', 'theta_mean',
                     'theta_std', 'bounds'):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.bounds = self.bounds.reshape(-1, 2)
        p = len(self.param_names)
        outputs = self.n_components * (1 + 2 * p)
        if self.weight.shape != (self.rff.n_features, outputs) or self.bias.shape != (outputs,):
            raise ConfigError('readout shape does not match the feature and mixture sizes')
        if len(self.stat_names) != self.rff.input_dim:
            raise ConfigError('statistic names do not match the feature map input size')

    @property
    def stat_dim(self) -> int:
        """The length of the statistic vectors the model accepts."""
        return len(self.stat_names)
