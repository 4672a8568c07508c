"""Experiments: dataset generation, sim-to-sim recovery and sensitivity studies.

Every experiment is a pure function of its arguments. Test formations
are drawn from their own seed stream, so they never coincide with
training rows produced from the same seed.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, TypeVar, Union

import numpy as np

from granulab.core.data.dataset import produce
from granulab.core.data.utils.hash import derive_seed
from granulab.core.errors import ConfigError
from granulab.core.features.stats import l2_error
from granulab.core.harness.datasets import FormationDataset, HeightDataset, height_prior
from granulab.core.harness.pipeline import observe, observe_state
from granulab.core.inference.mdrff import is_extrapolation, predict_posterior, train
from granulab.core.inference.posterior import mixture_mode
from granulab.core.inference.prior import grain_params, sample_prior
from granulab.core.models.camera import NoiseConfig
from granulab.core.models.config import RunConfig
from granulab.core.models.experiment import CaseResult, EvalReport
from granulab.core.models.features import STAT_NAMES, SummaryStats
from granulab.core.models.grain import FunnelSpec, GrainParams, SceneState
from granulab.core.models.inference import MdrffModel, Posterior, Prior, TrainingSet
from granulab.core.schemas.config import dump_run_config

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

# Seed stream tags keeping test formations apart from training rows.
TEST_STREAM = 0x7E57
FORWARD_STREAM = 0xF0D
REPEAT_STREAM = 0x5EED

BLUR_SIGMAS = (0.0, 2.0, 4.0, 6.0, 8.0)
PIXEL_SIGMAS = (0.0, 0.001, 0.002, 0.003, 0.004)
PROPAGATION_DELTAS = {'mu_s': 0.05, 'ln_mu_r': 3.0, 'e': 0.01}
PROBE_STATISTICS = ('max_z', 'mean_r')
GENERALIZATION_HEIGHTS = (0.02, 0.04, 0.06, 0.08, 0.10)
# Forward validation passes when the standardized L2 error is at most this.
L2_PASS_THRESHOLD = 4.0


def _pool_map(func: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    """Apply `func` to every item, in worker processes when `workers > 1`."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


@dataclass(frozen=True)
class StatReference:
    """Standardization constants for comparing statistic vectors.

    Instance Attributes:
        names: The statistics compared, in order.
        mean: Reference mean per statistic.
        std: Reference standard deviation per statistic.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_model(cls, model: MdrffModel) -> 'StatReference':
        """Use the standardization constants a model was trained with."""
        return cls(tuple(model.stat_names), model.stat_mean, model.stat_std)

    @classmethod
    def from_training_set(cls, dataset: TrainingSet) -> 'StatReference':
        """Use the statistics of a training set."""
        return cls(tuple(dataset.stat_names), dataset.stat_mean, dataset.stat_std)

    def select(self, stats: Union[SummaryStats, np.ndarray]) -> np.ndarray:
        """Pick the referenced statistics from a full statistic vector."""
        if isinstance(stats, SummaryStats):
            return stats.select(self.names)
        stats = np.asarray(stats, dtype=np.float64)
        if stats.shape[-1] == len(self.names):
            return stats
        return stats[..., [STAT_NAMES.index(n) for n in self.names]]

    def l2(self, a: Union[SummaryStats, np.ndarray],
           b: Union[SummaryStats, np.ndarray]) -> float:
        """Standardized L2 distance between two statistic vectors."""
        return l2_error(self.select(a), self.select(b), self.mean, self.std)


@dataclass(frozen=True)
class HeldOutFormation:
    """A formation simulated from known parameters.

    Instance Attributes:
        theta: The full inference-space parameter vector.
        seed: The simulation seed.
        state: The settled scene.
        stats: The noise-free statistics.
    """

    theta: np.ndarray
    seed: int
    state: SceneState
    stats: SummaryStats


def generate_dataset(config: RunConfig, n: int, fp: Union[str, Path],
                     workers: int = 1) -> TrainingSet:
    """Simulate `n` formations from the prior and write them as a dataset.

    Rows are resumable and independent of the worker count.
    """
    logger.info('generating %d rows into %s with %d workers', n, fp, workers)
    return produce(FormationDataset(config, n), fp, workers,
                   config=dump_run_config(config))


def draw_test_thetas(prior: Prior, count: int, seed: int,
                     fixed: Optional[Mapping[str, float]] = None,
                     even: Optional[str] = None) -> np.ndarray:
    """Draw the parameters of test formations.

    Args:
        prior: The prior to draw from.
        count: The number of test formations.
        seed: The experiment seed.
        fixed: Inference-space values overriding the draws, by name.
        even: The name of a parameter to space evenly over its range
            instead of drawing it.
    """
    theta = np.stack([sample_prior(prior, 1, seed=derive_seed(seed, TEST_STREAM, i, 0))[0]
                      for i in range(count)]) if count else np.zeros((0, len(prior.ranges)))
    names = prior.theta_names
    if even is not None:
        low, high = prior.bounds[names.index(even)]
        theta[:, names.index(even)] = np.linspace(low, high, count)
    for name, value in (fixed or {}).items():
        theta[:, names.index(name)] = value
    return theta


def _simulate_test(args: tuple[RunConfig, np.ndarray, int]) -> HeldOutFormation:
    config, theta, seed = args
    params = grain_params(config.prior, theta, config.grain)
    observation = observe(params, config, seed, noise=NoiseConfig())
    return HeldOutFormation(theta, seed, observation.state, observation.stats)


def simulate_tests(config: RunConfig, thetas: np.ndarray, seed: int,
                   workers: int = 1) -> list[HeldOutFormation]:
    """Simulate one noise-free formation per parameter vector."""
    jobs = [(config, theta, derive_seed(seed, TEST_STREAM, i, 1))
            for i, theta in enumerate(thetas)]
    return _pool_map(_simulate_test, jobs, workers)


def estimate(model: MdrffModel, stats: Union[SummaryStats, np.ndarray]) \
        -> tuple[Posterior, np.ndarray]:
    """Return the posterior of a statistic vector and its mode."""
    posterior = predict_posterior(model, stats)
    return posterior, mixture_mode(posterior)


def _full_theta(model: MdrffModel, prior: Prior, theta_star: np.ndarray) -> np.ndarray:
    """Complete a model's estimate with its fixed values, in prior order."""
    values = dict(model.fixed)
    values.update(zip(model.param_names, theta_star))
    return np.array([values[n] for n in prior.theta_names])


def _free_values(model: MdrffModel, prior: Prior, theta: np.ndarray) -> tuple[float, ...]:
    names = prior.theta_names
    return tuple(float(theta[names.index(n)]) for n in model.param_names)


def _forward_case(args: tuple[RunConfig, MdrffModel, HeldOutFormation, bool]) -> CaseResult:
    config, model, test, forward = args
    _, theta_star = estimate(model, test.stats)
    l2 = None
    if forward:
        full = _full_theta(model, config.prior, theta_star)
        params = grain_params(config.prior, full, config.grain)
        replay = observe(params, config, derive_seed(test.seed, FORWARD_STREAM),
                         noise=NoiseConfig()).stats
        l2 = StatReference.from_model(model).l2(test.stats, replay)
    return CaseResult(_free_values(model, config.prior, test.theta),
                      tuple(float(v) for v in theta_star), l2)


def sim2sim_eval(model: MdrffModel, config: RunConfig, test_count: int, seed: int = 0,
                 forward: bool = True, workers: int = 1) -> EvalReport:
    """Recover the parameters of simulated test formations.

    Test parameters are drawn from the prior, with the model's fixed
    parameters held at their values. For each formation the posterior mode
    is compared with the truth and, when `forward` is set, the estimate is
    re-simulated and its statistics compared with the test statistics.
    """
    thetas = draw_test_thetas(config.prior, test_count, seed, model.fixed)
    tests = simulate_tests(config, thetas, seed, workers)
    rows = _pool_map(_forward_case, [(config, model, t, forward) for t in tests], workers)
    report = EvalReport(list(model.param_names), rows, label='sim2sim')
    logger.info('sim2sim: %s', report.aggregates())
    return report


@dataclass
class NoiseSweepResult:
    """Reports and posterior curves of a noise sweep.

    Instance Attributes:
        reports: One report per cell, keyed by `(kind, sigma)` where kind
            is `blur` or `pixel`.
        target: The parameter whose posterior marginals are recorded.
        grid: The evaluation grid of the marginals.
        curves: Rows `(kind, sigma, true value, densities...)`.
    """

    reports: dict[tuple[str, float], EvalReport] = field(default_factory=dict)
    target: str = 'mu_s'
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    curves: list[tuple[Any, ...]] = field(default_factory=list)

    def mean_abs_error(self, kind: str) -> list[tuple[float, float]]:
        """Return `(sigma, mean |error|)` of the target for each cell of a kind."""
        out = []
        for (k, sigma), report in sorted(self.reports.items()):
            if k == kind:
                out.append((sigma, report.abs_error_mean()[self.target]))
        return out


def _noise_cell(args: tuple[RunConfig, MdrffModel, HeldOutFormation, str, float, np.ndarray]) \
        -> tuple[CaseResult, np.ndarray]:
    config, model, test, kind, sigma, grid = args
    noise = NoiseConfig(blur_sigma=sigma if kind == 'blur' else 0.0,
                        pixel_sigma=sigma if kind == 'pixel' else 0.0,
                        seed=config.noise.seed)
    stats = observe_state(test.state, config, noise, test.seed).stats
    posterior, theta_star = estimate(model, stats)
    index = model.param_names.index('mu_s') if 'mu_s' in model.param_names else 0
    case = CaseResult(_free_values(model, config.prior, test.theta),
                      tuple(float(v) for v in theta_star))
    return case, posterior.marginal(index, grid)


def noise_sweep(model: MdrffModel, config: RunConfig,
                blur_sigmas: Iterable[float] = BLUR_SIGMAS,
                pixel_sigmas: Iterable[float] = PIXEL_SIGMAS,
                test_count: int = 10, seed: int = 0, grid_points: int = 101,
                workers: int = 1) -> NoiseSweepResult:
    """Measure how observation noise degrades recovery.

    Test formations space the sliding friction evenly over its prior range
    and are simulated once. Their images are then perturbed by each blur
    and each pixel-noise level separately, never both at once.
    """
    target = 'mu_s' if 'mu_s' in model.param_names else model.param_names[0]
    even = target if target in config.prior.theta_names else None
    thetas = draw_test_thetas(config.prior, test_count, seed, model.fixed, even=even)
    tests = simulate_tests(config, thetas, seed, workers)
    low, high = model.bounds[model.param_names.index(target)]
    grid = np.linspace(low, high, grid_points)
    result = NoiseSweepResult(target=target, grid=grid)
    cells = [('blur', float(s)) for s in blur_sigmas] + [('pixel', float(s)) for s in pixel_sigmas]
    for kind, sigma in cells:
        outputs = _pool_map(_noise_cell, [(config, model, t, kind, sigma, grid) for t in tests],
                            workers)
        result.reports[(kind, sigma)] = EvalReport(list(model.param_names),
                                                  [case for case, _ in outputs],
                                                  label=f'{kind}={sigma:g}')
        truth = config.prior.theta_names.index(target)
        for test, (_, curve) in zip(tests, outputs):
            result.curves.append((kind, sigma, float(test.theta[truth]), *curve.tolist()))
        logger.info('noise %s=%g: mean |%s error| %.4f', kind, sigma, target,
                    result.reports[(kind, sigma)].abs_error_mean()[target])
    return result


def _probe_case(args: tuple[RunConfig, GrainParams, int]) -> SummaryStats:
    config, params, seed = args
    return observe(params, config, seed, noise=NoiseConfig()).stats


def propagation_probe(params: GrainParams, config: RunConfig,
                      deltas: Mapping[str, float] = PROPAGATION_DELTAS,
                      seed: int = 0, workers: int = 1) -> list[dict[str, Any]]:
    """Measure how parameter errors shift the formation.

    Each parameter is perturbed by `-delta` and `+delta` with the others
    held fixed; all runs share one seed. Perturbed values are clipped into
    their valid ranges.

    Returns:
        One row per perturbation with the shift of every probed statistic,
        in grain diameters.
    """
    base = params.to_theta()
    names = ['mu_s', 'ln_mu_r', 'e']
    unknown = [n for n in deltas if n not in names]
    if unknown:
        raise ConfigError(f'cannot perturb {", ".join(unknown)}')
    runs = [('base', 0.0, params)]
    for name, delta in deltas.items():
        for sign in (-1.0, 1.0):
            theta = base.copy()
            theta[names.index(name)] += sign * delta
            runs.append((name, sign * delta, GrainParams.from_theta(
                theta, params.radius, params.mass, clip=True)))
    stats = _pool_map(_probe_case, [(config, p, seed) for _, _, p in runs], workers)
    reference = stats[0]
    rows = []
    for (name, delta, p), s in zip(runs[1:], stats[1:]):
        row: dict[str, Any] = {'parameter': name, 'delta': delta}
        for stat in PROBE_STATISTICS:
            row[f'{stat}_shift'] = (s[stat] - reference[stat]) / params.diameter
        rows.append(row)
        logger.info('probe %s %+g: %s', name, delta, row)
    return rows


def forward_validate(params: GrainParams, observation: SummaryStats, config: RunConfig,
                     reference: StatReference, seed: int = 0,
                     threshold: float = L2_PASS_THRESHOLD) -> tuple[float, bool]:
    """Re-simulate estimated parameters and compare with an observation.

    Returns:
        The standardized L2 error and whether it is within `threshold`.
    """
    replay = observe(params, config, seed, noise=NoiseConfig()).stats
    l2 = reference.l2(observation, replay)
    return l2, l2 <= threshold


def _validate_case(args: tuple[GrainParams, SummaryStats, RunConfig, StatReference, int]) \
        -> float:
    params, observation, config, reference, seed = args
    return forward_validate(params, observation, config, reference, seed)[0]


def best_k_average(thetas: np.ndarray, l2: Sequence[float], k: int) -> np.ndarray:
    """Average the `k` parameter vectors with the lowest L2 errors.

    Ties keep their input order.

    Examples:
        >>> best_k_average(np.array([[1.0], [2.0], [3.0]]), [0.3, 0.1, 0.2], 2).tolist()
        [2.5]
    """
    if not 1 <= k <= len(thetas):
        raise ConfigError(f'k must be between 1 and {len(thetas)}, got {k}')
    order = np.argsort(np.asarray(l2), kind='stable')[:k]
    return np.asarray(thetas, dtype=np.float64)[order].mean(axis=0)


def forward_validate_batch(thetas: np.ndarray, observations: Sequence[SummaryStats],
                           config: RunConfig, reference: StatReference, k: int = 5,
                           seed: int = 0, workers: int = 1) -> tuple[np.ndarray, list[float]]:
    """Validate several estimates, each against its own observation, and average the best `k`.

    Args:
        thetas: Inference-space estimates `(mu_s, ln_mu_r, e)`, one per row.
        observations: The observation each estimate was inferred from.
        config: The configuration used for re-simulation.
        reference: The standardization constants.
        k: The number of best estimates to average.
        seed: The seed of the re-simulations.
        workers: The number of worker processes.

    Returns:
        The averaged estimate and the L2 error of every estimate.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    jobs = [(GrainParams.from_theta(t, config.grain.radius, config.grain.mass, clip=True),
             obs, config, reference, derive_seed(seed, FORWARD_STREAM, i))
            for i, (t, obs) in enumerate(zip(thetas, observations))]
    l2 = _pool_map(_validate_case, jobs, workers)
    return best_k_average(thetas, l2, k), l2


@dataclass
class HeightDemoResult:
    """The outcome of the funnel-height demo.

    Instance Attributes:
        model: The height-inference model.
        report: Held-out height recovery.
        training: The training rows.
    """

    model: MdrffModel
    report: EvalReport
    training: TrainingSet


def height_demo(config: RunConfig, params: GrainParams, out_dir: Union[str, Path],
                n_train: int = 150, n_test: int = 10,
                height_range: tuple[float, float] = (0.01, 0.13),
                workers: int = 1) -> HeightDemoResult:
    """Learn to infer the funnel height from two radial percentiles.

    Training and held-out rows are written as datasets under `out_dir`.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prior = height_prior(*height_range, seed=config.prior.seed)
    training = produce(HeightDataset(config, params, n_train, prior),
                       out_dir / 'height_train.csv', workers)
    test_prior = height_prior(*height_range, seed=derive_seed(config.prior.seed, TEST_STREAM))
    held_out = produce(HeightDataset(config, params, max(n_test, 2), test_prior),
                       out_dir / 'height_test.csv', workers)
    model = train(training, config.rff, config.training, prior)
    rows = []
    for theta, stats in zip(held_out.theta[:n_test], held_out.stats[:n_test]):
        _, mode = estimate(model, stats)
        rows.append(CaseResult((float(theta[0]),), (float(mode[0]),)))
    report = EvalReport(list(model.param_names), rows, label='height')
    logger.info('height demo: %s', report.aggregates())
    return HeightDemoResult(model, report, training)


def infer_heights(model: MdrffModel, targets: Iterable[Sequence[float]]) -> list[dict[str, Any]]:
    """Infer pour heights for target radial-percentile pairs.

    Targets outside the range of the training statistics are flagged as
    extrapolation and logged, but still answered.
    """
    out = []
    for target in targets:
        target = np.asarray(target, dtype=np.float64)
        _, mode = estimate(model, target)
        flagged = is_extrapolation(model, target)
        if flagged:
            logger.warning('percentiles %s lie outside the training range', target.tolist())
        out.append({'percentiles': target.tolist(), 'height': float(mode[0]),
                    'extrapolation': flagged})
    return out


def height_generalization(params: GrainParams, config: RunConfig,
                          observations: Mapping[float, SummaryStats],
                          reference: StatReference, seed: int = 0,
                          workers: int = 1) -> list[dict[str, float]]:
    """Compare calibrated parameters with observations poured from other heights.

    Returns:
        One row per height with the standardized L2 error and the
        difference of each probed statistic, in grain diameters.
    """
    heights = sorted(observations)
    jobs = [(params, config, derive_seed(seed, FORWARD_STREAM, i), config.funnel.at_height(h))
            for i, h in enumerate(heights)]
    replays = _pool_map(_height_case, jobs, workers)
    rows = []
    for h, replay in zip(heights, replays):
        observed = observations[h]
        row = {'height': h, 'l2': reference.l2(observed, replay)}
        for stat in PROBE_STATISTICS:
            row[f'{stat}_diff'] = (replay[stat] - observed[stat]) / params.diameter
        rows.append(row)
    return rows


def _height_case(args: tuple[GrainParams, RunConfig, int, FunnelSpec]) -> SummaryStats:
    params, config, seed, funnel = args
    return observe(params, config, seed, funnel=funnel, noise=NoiseConfig()).stats


def simulate_observations(params: GrainParams, config: RunConfig,
                          heights: Iterable[float] = GENERALIZATION_HEIGHTS,
                          seed: int = 0, workers: int = 1) -> dict[float, SummaryStats]:
    """Simulate reference observations of a material poured from several heights."""
    heights = [float(h) for h in heights]
    jobs = [(params, config, derive_seed(seed, TEST_STREAM, i), config.funnel.at_height(h))
            for i, h in enumerate(heights)]
    return dict(zip(heights, _pool_map(_height_case, jobs, workers)))


def repeatability(params: GrainParams, config: RunConfig, repeats: int, seed: int = 0,
                  workers: int = 1) -> list[dict[str, Any]]:
    """Repeat one pour over many seeds and measure the spread of each statistic.

    Returns:
        One row per statistic with its mean, standard deviation and the
        ratio `std / |mean|` (None for a zero mean).
    """
    jobs = [(config, params, derive_seed(seed, REPEAT_STREAM, i)) for i in range(repeats)]
    stats = np.array([s.as_array() for s in _pool_map(_probe_case, jobs, workers)])
    rows = []
    for j, name in enumerate(STAT_NAMES):
        mean, std = float(stats[:, j].mean()), float(stats[:, j].std())
        rows.append({'statistic': name, 'mean': mean, 'std': std,
                     'ratio': std / abs(mean) if mean != 0 else None})
    return rows


def sample_size_study(dataset: TrainingSet, config: RunConfig, sizes: Iterable[int],
                      test_count: int = 10, seed: int = 0,
                      workers: int = 1) -> list[dict[str, Any]]:
    """Train on nested prefixes of a dataset and evaluate on common test formations.

    Returns:
        One row per size with the mean absolute error of every inferred
        parameter.
    """
    sizes = sorted(int(n) for n in sizes)
    if not sizes or sizes[0] < 2 or sizes[-1] > len(dataset):
        raise ConfigError(f'sizes must lie in [2, {len(dataset)}], got {sizes}')
    tests = simulate_tests(config, draw_test_thetas(config.prior, test_count, seed),
                           seed, workers)
    rows = []
    for n in sizes:
        model = train(dataset.head(n), config.rff, config.training, config.prior)
        report = EvalReport(list(model.param_names),
                            _pool_map(_forward_case, [(config, model, t, False) for t in tests],
                                      workers), label=f'n={n}')
        row: dict[str, Any] = {'n': n}
        row.update({f'{k}_abs_error': v for k, v in report.abs_error_mean().items()})
        rows.append(row)
        logger.info('sample size %d: %s', n, row)
    return rows
