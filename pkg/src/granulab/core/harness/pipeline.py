"""The forward model from material parameters to summary statistics."""
import logging
from dataclasses import dataclass
from typing import Optional

from granulab.core.camera.noise import apply_noise
from granulab.core.camera.render import downsample, render_depth
from granulab.core.data.utils.hash import derive_seed
from granulab.core.features.stats import summarize
from granulab.core.models.camera import DepthImage, NoiseConfig
from granulab.core.models.config import RunConfig
from granulab.core.models.features import SummaryStats
from granulab.core.models.grain import FunnelSpec, GrainParams, SceneState
from granulab.core.sim.scene import simulate_formation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    """A simulated formation as seen by the camera.

    Instance Attributes:
        state: The settled scene.
        image: The native-resolution depth image, before noise.
        stats: The summary statistics of the noisy, downsampled image.
    """

    state: SceneState
    image: DepthImage
    stats: SummaryStats


def observe_state(state: SceneState, config: RunConfig,
                  noise: Optional[NoiseConfig] = None, seed: int = 0) -> Observation:
    """Render a formation, perturb and downsample the image, and summarize it.

    Args:
        state: The formation.
        config: Supplies the camera and grain radius.
        noise: Observation noise. Defaults to `config.noise`.
        seed: Combined with the noise seed to draw the pixel noise.
    """
    noise = noise or config.noise
    image = render_depth(state, config.camera, config.grain.radius)
    seen = image
    if not noise.is_identity:
        seen = apply_noise(image, NoiseConfig(noise.blur_sigma, noise.pixel_sigma,
                                              derive_seed(noise.seed, seed)))
    pooled = downsample(seen, config.camera.downsample_factor)
    return Observation(state, image, summarize(pooled, radius=config.grain.radius))


def observe(params: GrainParams, config: RunConfig, seed: int,
            funnel: Optional[FunnelSpec] = None,
            noise: Optional[NoiseConfig] = None) -> Observation:
    """Simulate a pour with the given parameters and observe the formation.

    The result depends only on the arguments: equal inputs give
    bit-identical statistics.

    Args:
        params: The grain parameters; their radius and mass are used as is.
        config: The configuration; the simulator uses the harness grain grid.
        seed: The simulation seed.
        funnel: Overrides `config.funnel`.
        noise: Overrides `config.noise`.

    Raises:
        SimulationDivergedError: If the simulation diverges.
    """
    sim = config.scene_config().replace(seed=seed)
    state = simulate_formation(params, funnel or config.funnel, sim)
    return observe_state(state, config, noise, seed)
