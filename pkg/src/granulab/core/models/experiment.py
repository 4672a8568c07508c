"""Model definitions for experiment specifications and evaluation reports."""
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from granulab.core.errors import ConfigError
from granulab.core.models.common import ExperimentKind
from granulab.core.models.grain import DESK_GRAIN_GRID


@dataclass(frozen=True)
class HarnessScale:
    """The size knobs of an experiment.

    Instance Attributes:
        grain_grid: The initial grain grid `(nx, ny, nz)`.
        n_train: The number of training simulations.
        n_test: The number of test formations.
        repeats: The number of repeats of the repeatability study.
        workers: The number of simulation worker processes.
    """

    grain_grid: tuple[int, int, int] = DESK_GRAIN_GRID
    n_train: int = 200
    n_test: int = 10
    repeats: int = 50
    workers: int = 1

    def __post_init__(self) -> None:
        """Validate the scale knobs."""
        object.__setattr__(self, 'grain_grid', tuple(int(n) for n in self.grain_grid))
        if any(n < 1 for n in self.grain_grid):
            raise ConfigError(f'grain_grid counts must be positive: {self.grain_grid}')
        for name in ('n_train', 'n_test', 'repeats', 'workers'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive')

    @classmethod
    def desk(cls) -> 'HarnessScale':
        """The scale used for everyday runs: 500 grains, 200 training sims."""
        return cls()

    @classmethod
    def full(cls) -> 'HarnessScale':
        """The full scale: 2000 grains, 1000 training sims, 50 tests."""
        return cls(grain_grid=(10, 10, 20), n_train=1000, n_test=50, repeats=1000)

    def replace(self, **changes: Any) -> 'HarnessScale':
        """Return a copy with the given fields replaced."""
        return dataclasses.replace(self, **changes)


# Fields that each experiment kind requires in `ExperimentSpec.options`.
_REQUIRED_OPTIONS: dict[ExperimentKind, tuple[str, ...]] = {
    ExperimentKind.DATASET: (),
    ExperimentKind.SIM2SIM: ('model',),
    ExperimentKind.NOISE_SWEEP: ('model',),
    ExperimentKind.PROPAGATION: ('theta',),
    ExperimentKind.HEIGHT_DEMO: (),
    ExperimentKind.GENERALIZATION: ('theta', 'model'),
    ExperimentKind.REPEATABILITY: (),
    ExperimentKind.SAMPLE_SIZE: ('dataset', 'sizes'),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment.

    Instance Attributes:
        kind: The experiment kind.
        scale: The size knobs.
        seed: The experiment seed.
        output_dir: Where artifacts are written.
        options: Kind-specific settings, e.g. a model path.
    """

    kind: ExperimentKind
    scale: HarnessScale = field(default_factory=HarnessScale)
    seed: int = 0
    output_dir: Path = Path('runs')
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check that the kind-specific options are present."""
        object.__setattr__(self, 'kind', ExperimentKind.parse(self.kind))
        object.__setattr__(self, 'output_dir', Path(self.output_dir))
        missing = [k for k in _REQUIRED_OPTIONS[self.kind] if k not in self.options]  # type: ignore
        if missing:
            raise ConfigError(f'{self.kind} experiment is missing: {", ".join(missing)}')


@dataclass(frozen=True)
class CaseResult:
    """The outcome of inferring parameters for one test formation.

    Instance Attributes:
        theta_true: The true inference-space parameters.
        theta_star: The inferred parameters.
        l2: Standardized L2 distance between the statistics of the test
            formation and its forward re-simulation, or None when forward
            validation was skipped.
    """

    theta_true: tuple[float, ...]
    theta_star: tuple[float, ...]
    l2: Optional[float] = None

    @property
    def errors(self) -> tuple[float, ...]:
        """Signed per-parameter errors `theta_star - theta_true`."""
        return tuple(s - t for s, t in zip(self.theta_star, self.theta_true))


@dataclass
class EvalReport:
    """Per-case results and their aggregates.

    Instance Attributes:
        param_names: Inference-space names of the evaluated parameters.
        rows: One result per test formation.
        label: A short description of the evaluated condition.
    """

    param_names: list[str]
    rows: list[CaseResult] = field(default_factory=list)
    label: str = ''

    def error_matrix(self) -> np.ndarray:
        """Signed errors, shape `(cases, P)`."""
        return np.array([r.errors for r in self.rows], dtype=np.float64).reshape(
            len(self.rows), len(self.param_names))

    def error_mean(self) -> dict[str, float]:
        """Mean signed error per parameter."""
        errors = self.error_matrix()
        return {n: float(errors[:, i].mean()) for i, n in enumerate(self.param_names)}

    def error_std(self) -> dict[str, float]:
        """Population standard deviation of the signed error per parameter."""
        errors = self.error_matrix()
        return {n: float(errors[:, i].std()) for i, n in enumerate(self.param_names)}

    def abs_error_mean(self) -> dict[str, float]:
        """Mean absolute error per parameter."""
        errors = np.abs(self.error_matrix())
        return {n: float(errors[:, i].mean()) for i, n in enumerate(self.param_names)}

    def l2_values(self) -> np.ndarray:
        """The L2 errors of rows that were forward-validated."""
        return np.array([r.l2 for r in self.rows if r.l2 is not None], dtype=np.float64)

    def aggregates(self) -> dict[str, Any]:
        """Return every aggregate, recomputed from the rows."""
        l2 = self.l2_values()
        return {
            'label': self.label,
            'cases': len(self.rows),
            'error_mean': self.error_mean(),
            'error_std': self.error_std(),
            'abs_error_mean': self.abs_error_mean(),
            'l2_mean': float(l2.mean()) if len(l2) else None,
            'l2_std': float(l2.std()) if len(l2) else None,
        }
