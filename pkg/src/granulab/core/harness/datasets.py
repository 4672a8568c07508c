"""Datasets of simulated formations used to train inference models."""
import logging
from typing import Any, Iterator, Optional

from granulab.core.camera.render import downsample, render_depth
from granulab.core.data.dataset import Dataset, ProcessedRow
from granulab.core.data.utils.hash import derive_seed
from granulab.core.errors import ConfigError, SimulationDivergedError
from granulab.core.features.stats import radial_percentiles
from granulab.core.harness.pipeline import observe
from granulab.core.inference.prior import grain_params, sample_prior
from granulab.core.models.config import RunConfig
from granulab.core.models.features import STAT_NAMES
from granulab.core.models.grain import GrainParams
from granulab.core.models.inference import ParameterRange, Prior
from granulab.core.schemas.config import dump_run_config
from granulab.core.sim.scene import simulate_formation

logger = logging.getLogger(__name__)

# Simulations attempted per row before giving up.
MAX_ATTEMPTS = 10
HEIGHT_RANGE = (0.01, 0.13)
HEIGHT_PERCENTILES = (5.0, 50.0)


class FormationDataset(Dataset):
    """Parameters drawn from the prior and the statistics of their formations.

    Row `i` uses the seeds `derive_seed(seed, i, attempt)`. A simulation
    that diverges is retried with the next attempt's seeds, which draws
    both new parameters and a new simulation seed.

    Instance Attributes:
        config: The configuration; supplies the prior, scene and camera.
        size: The number of rows.
    """

    config: RunConfig
    size: int

    def __init__(self, config: RunConfig, size: int) -> None:
        """Initialize a FormationDataset.

        Raises:
            ConfigError: If fewer than two rows are requested.
        """
        if size < 2:
            raise ConfigError(f'a dataset needs at least 2 rows, got {size}')
        self.config = config
        self.size = size

    @property
    def slug(self) -> str:
        """Return the slug of this dataset."""
        return 'formation'

    @property
    def name(self) -> str:
        """Return the name of this dataset."""
        return 'Funnel-pour formations'

    @property
    def description(self) -> str:
        """Return the description of this dataset."""
        return 'Material parameters drawn from the prior and the summary ' \
               'statistics of the poured formation.'

    @property
    def param_names(self) -> list[str]:
        """Return the names of the parameter columns."""
        return self.config.prior.theta_names

    @property
    def stat_names(self) -> list[str]:
        """Return the names of the statistic columns."""
        return list(STAT_NAMES)

    def config_document(self) -> dict:
        """Return the configuration document."""
        return dump_run_config(self.config)

    def get(self) -> Iterator[tuple[str, Any]]:
        """Yield one record per row index."""
        for i in range(self.size):
            yield f'{i:06d}', {'index': i}

    def process(self, id: str, data: Any) -> ProcessedRow:
        """Simulate and summarize one formation, retrying divergent simulations.

        Raises:
            SimulationDivergedError: If every attempt diverges.
        """
        index = data['index']
        for attempt in range(MAX_ATTEMPTS):
            theta = sample_prior(self.config.prior, 1,
                                 seed=derive_seed(self.config.prior.seed, index, attempt))[0]
            seed = derive_seed(self.config.sim.seed, index, attempt)
            params = grain_params(self.config.prior, theta, self.config.grain)
            try:
                stats = observe(params, self.config, seed).stats
            except SimulationDivergedError as e:
                logger.warning('row %s diverged with seed %d (attempt %d): %s; resampling',
                               id, seed, attempt + 1, e)
                continue
            return ProcessedRow((seed, *theta.tolist(), *stats.as_array().tolist()),
                                attempt + 1)
        raise SimulationDivergedError(f'row {id} diverged {MAX_ATTEMPTS} times')


def height_prior(low: float = HEIGHT_RANGE[0], high: float = HEIGHT_RANGE[1],
                 seed: int = 0) -> Prior:
    """Return the uniform prior over the funnel tip height."""
    return Prior((ParameterRange('tip_height', low, high),), seed)


class HeightDataset(Dataset):
    """Funnel heights and the radial percentiles of the resulting formations.

    The material is fixed; the tip height is drawn uniformly per row.

    Instance Attributes:
        config: The configuration; supplies the scene and camera.
        params: The calibrated material.
        size: The number of rows.
        prior: The height prior.
    """

    config: RunConfig
    params: GrainParams
    size: int
    prior: Prior

    def __init__(self, config: RunConfig, params: GrainParams, size: int,
                 prior: Optional[Prior] = None) -> None:
        """Initialize a HeightDataset.

        Raises:
            ConfigError: If fewer than two rows are requested.
        """
        if size < 2:
            raise ConfigError(f'a dataset needs at least 2 rows, got {size}')
        self.config = config
        self.params = params
        self.size = size
        self.prior = prior or height_prior(seed=config.prior.seed)

    @property
    def slug(self) -> str:
        """Return the slug of this dataset."""
        return 'height'

    @property
    def name(self) -> str:
        """Return the name of this dataset."""
        return 'Funnel heights'

    @property
    def description(self) -> str:
        """Return the description of this dataset."""
        return 'Funnel tip heights and the 5th and 50th percentiles of the ' \
               'radial distance of the poured formation.'

    @property
    def param_names(self) -> list[str]:
        """Return the names of the parameter columns."""
        return self.prior.theta_names

    @property
    def stat_names(self) -> list[str]:
        """Return the names of the statistic columns."""
        return [f'r_p{int(p)}' for p in HEIGHT_PERCENTILES]

    def config_document(self) -> dict:
        """Return the configuration document, including the material and height range."""
        document = dump_run_config(self.config.replace(grain=self.params))
        document['height_range'] = [float(v) for v in self.prior.bounds[0]]
        return document

    def get(self) -> Iterator[tuple[str, Any]]:
        """Yield one record per row index."""
        for i in range(self.size):
            yield f'{i:06d}', {'index': i}

    def process(self, id: str, data: Any) -> ProcessedRow:
        """Pour from one height and measure the radial percentiles.

        Raises:
            SimulationDivergedError: If every attempt diverges.
        """
        index = data['index']
        for attempt in range(MAX_ATTEMPTS):
            height = float(sample_prior(self.prior, 1, seed=derive_seed(
                self.prior.seed, index, attempt))[0, 0])
            seed = derive_seed(self.config.sim.seed, index, attempt)
            try:
                percentiles = measure_height_features(self.params, self.config, height, seed)
            except SimulationDivergedError as e:
                logger.warning('row %s diverged with seed %d (attempt %d): %s; resampling',
                               id, seed, attempt + 1, e)
                continue
            return ProcessedRow((seed, height, *percentiles), attempt + 1)
        raise SimulationDivergedError(f'row {id} diverged {MAX_ATTEMPTS} times')


def measure_height_features(params: GrainParams, config: RunConfig, height: float,
                            seed: int) -> list[float]:
    """Pour from `height` and return the radial percentiles of the formation."""
    state = simulate_formation(params, config.funnel.at_height(height),
                               config.scene_config().replace(seed=seed))
    image = downsample(render_depth(state, config.camera, params.radius),
                       config.camera.downsample_factor)
    return radial_percentiles(image, params.radius, HEIGHT_PERCENTILES).tolist()
