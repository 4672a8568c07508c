"""The grouped configuration document shared by every command."""
import dataclasses
from dataclasses import dataclass, field

from granulab.core.models.camera import CameraConfig, NoiseConfig
from granulab.core.models.experiment import HarnessScale
from granulab.core.models.grain import MATERIALS, FunnelSpec, GrainParams, SimConfig
from granulab.core.models.inference import Prior, RffSettings, TrainingSchedule, default_prior


@dataclass(frozen=True)
class RunConfig:
    """Every configurable section, with built-in defaults.

    Instance Attributes:
        grain: The grain material and geometry.
        funnel: The funnel geometry.
        sim: The simulator configuration.
        camera: The depth camera.
        noise: Observation noise applied to rendered images.
        prior: The parameter prior.
        rff: The random Fourier feature settings.
        training: The model training schedule.
        harness: Experiment scale knobs.
    """

    grain: GrainParams = MATERIALS['couscous']
    funnel: FunnelSpec = field(default_factory=FunnelSpec)
    sim: SimConfig = field(default_factory=SimConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    prior: Prior = field(default_factory=default_prior)
    rff: RffSettings = field(default_factory=RffSettings)
    training: TrainingSchedule = field(default_factory=TrainingSchedule)
    harness: HarnessScale = field(default_factory=HarnessScale)

    def replace(self, **changes: object) -> 'RunConfig':
        """Return a copy with the given sections replaced."""
        return dataclasses.replace(self, **changes)  # type: ignore

    def with_seed(self, seed: int) -> 'RunConfig':
        """Return a copy where every seeded section uses `seed`."""
        return self.replace(
            sim=self.sim.replace(seed=seed),
            noise=dataclasses.replace(self.noise, seed=seed),
            prior=dataclasses.replace(self.prior, seed=seed),
            rff=dataclasses.replace(self.rff, seed=seed),
            training=dataclasses.replace(self.training, seed=seed),
        )

    def scene_config(self) -> SimConfig:
        """The simulator configuration with the harness grain grid applied."""
        return self.sim.replace(grain_grid=self.harness.grain_grid)
