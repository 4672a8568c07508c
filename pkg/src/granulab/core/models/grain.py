"""Model definitions for grains, the pouring scene and the simulator state.

All quantities are in SI units (metres, kilograms, seconds).
"""
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from granulab.core.errors import ConfigError
from granulab.core.models.common import ContactOrder

# Valid ranges of the material coefficients.
MU_S_RANGE = (0.0, 1.0)
MU_R_RANGE = (1e-7, 1e-1)
E_RANGE = (0.0, 1.0)

# Names of the material parameters in inference space, where rolling
# friction is handled through its natural logarithm.
THETA_NAMES = ('mu_s', 'ln_mu_r', 'e')

# Pseudo grain indices used by contacts against static colliders.
GROUND_ID = -1
FUNNEL_ID = -2

# Largest allowed penetration after a full step, as a fraction of the radius.
PENETRATION_TOLERANCE = 0.1


def _check_range(name: str, value: float, low: float, high: float) -> None:
    """Raise a ConfigError if `value` lies outside `[low, high]`."""
    if not (low <= value <= high):
        raise ConfigError(f'{name}={value} outside [{low}, {high}]')


@dataclass(frozen=True)
class GrainParams:
    """The material parameters of a grain and its fixed geometry.

    Grain-to-grain and grain-to-ground contacts use the same coefficients.

    Instance Attributes:
        mu_s: The sliding-friction coefficient, in [0, 1].
        mu_r: The rolling-friction coefficient, in [1e-7, 1e-1].
        e: The restitution coefficient, in [0, 1].
        radius: The grain radius in metres.
        mass: The grain mass in kilograms.
    """

    mu_s: float
    mu_r: float
    e: float
    radius: float = 0.002
    mass: float = 3.0e-5

    def __post_init__(self) -> None:
        """Validate the parameter ranges."""
        _check_range('mu_s', self.mu_s, *MU_S_RANGE)
        _check_range('mu_r', self.mu_r, *MU_R_RANGE)
        _check_range('e', self.e, *E_RANGE)
        if not self.radius > 0:
            raise ConfigError(f'radius must be positive, got {self.radius}')
        if not self.mass > 0:
            raise ConfigError(f'mass must be positive, got {self.mass}')

    @property
    def diameter(self) -> float:
        """The grain diameter in metres."""
        return 2.0 * self.radius

    @property
    def inertia(self) -> float:
        """The moment of inertia of a solid sphere about its centre."""
        return 0.4 * self.mass * self.radius ** 2

    def to_theta(self) -> np.ndarray:
        """Return the inference-space vector `(mu_s, ln(mu_r), e)`.

        Examples:
            >>> GrainParams(0.5, 1e-4, 0.25).to_theta().round(4).tolist()
            [0.5, -9.2103, 0.25]
        """
        return np.array([self.mu_s, math.log(self.mu_r), self.e])

    @classmethod
    def from_theta(cls, theta: 'np.ndarray | list[float]',
                   radius: float = 0.002, mass: float = 3.0e-5,
                   clip: bool = False) -> 'GrainParams':
        """Build parameters from an inference-space vector.

        Args:
            theta: The vector `(mu_s, ln(mu_r), e)`.
            radius: The grain radius.
            mass: The grain mass.
            clip: Whether to clip each coefficient into its valid range
                instead of rejecting out-of-range values.
        """
        mu_s, ln_mu_r, e = (float(v) for v in theta)
        mu_r = math.exp(ln_mu_r)
        if clip:
            mu_s = min(max(mu_s, MU_S_RANGE[0]), MU_S_RANGE[1])
            mu_r = min(max(mu_r, MU_R_RANGE[0]), MU_R_RANGE[1])
            e = min(max(e, E_RANGE[0]), E_RANGE[1])
        return cls(mu_s=mu_s, mu_r=mu_r, e=e, radius=radius, mass=mass)

    def replace(self, **changes: float) -> 'GrainParams':
        """Return a copy with the given fields replaced."""
        return dataclasses.replace(self, **changes)


# Parameters inferred from real pours.
MATERIALS: dict[str, GrainParams] = {
    'couscous': GrainParams(mu_s=0.6687, mu_r=8.1506e-7, e=0.7689),
    'barley': GrainParams(mu_s=0.3807, mu_r=1.0613e-6, e=0.4792),
}


@dataclass(frozen=True)
class FunnelSpec:
    """A funnel made of a conical frustum above a cylindrical spout.

    The funnel axis is the vertical line through the origin. The spout
    occupies heights `[tip_height, tip_height + spout_length]` and the cone
    widens from `spout_radius` to `top_radius` over the next `cone_height`.

    Instance Attributes:
        tip_height: Height of the bottom of the spout above the ground.
        top_radius: Radius of the top rim.
        spout_radius: Inner radius of the spout.
        cone_height: Height of the conical section.
        spout_length: Length of the spout.
    """

    tip_height: float = 0.12
    top_radius: float = 0.06
    spout_radius: float = 0.01
    cone_height: float = 0.10
    spout_length: float = 0.02

    def __post_init__(self) -> None:
        """Validate the funnel geometry."""
        for name in ('tip_height', 'top_radius', 'spout_radius',
                     'cone_height', 'spout_length'):
            if not getattr(self, name) > 0:
                raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')
        if not self.top_radius > self.spout_radius:
            raise ConfigError('top_radius must exceed spout_radius')

    @property
    def cone_base_height(self) -> float:
        """Height where the spout meets the cone."""
        return self.tip_height + self.spout_length

    @property
    def rim_height(self) -> float:
        """Height of the top rim."""
        return self.cone_base_height + self.cone_height

    def check_admits(self, grain: GrainParams) -> None:
        """Raise a ConfigError if a grain cannot pass through the spout."""
        if not self.spout_radius > grain.radius:
            raise ConfigError(
                f'spout radius {self.spout_radius} does not admit grains of '
                f'radius {grain.radius}')

    def at_height(self, tip_height: float) -> 'FunnelSpec':
        """Return the same funnel with its tip at a different height."""
        return dataclasses.replace(self, tip_height=tip_height)

    def profile(self) -> np.ndarray:
        """Return the wall profile as `(radius, height)` vertices.

        Examples:
            >>> FunnelSpec().profile().round(3).tolist()
            [[0.01, 0.12], [0.01, 0.14], [0.06, 0.24]]
        """
        return np.array([
            [self.spout_radius, self.tip_height],
            [self.spout_radius, self.cone_base_height],
            [self.top_radius, self.rim_height],
        ])


@dataclass(frozen=True)
class SimConfig:
    """Solver schedule, scene layout and stopping rules of a simulation.

    Instance Attributes:
        dt: The frame time step in seconds.
        substeps: The number of substeps per frame.
        relaxation: The relaxation factor applied to impulse and position
            corrections, in (0, 1].
        solver_iterations: Velocity iterations per substep.
        position_iterations: De-penetration iterations per substep.
        gravity: The gravity vector in m/s^2.
        grain_grid: Grain counts `(nx, ny, nz)` of the initial grid.
        grid_spacing: Centre-to-centre spacing of the initial grid.
        rest_speed_threshold: Speed below which every grain must stay for
            the scene to be at rest.
        rest_hold_time: How long the scene must stay below the threshold.
        max_sim_time: Simulated time after which the run times out.
        restitution_threshold: Approach speed below which restitution is
            treated as zero.
        contact_margin: Speculative contact margin as a fraction of the
            grain radius. Bodies whose surfaces are closer than this gap
            become contacts before they touch.
        contact_order: How the solver orders contacts within a substep.
        lock_rotation: Whether grain rotation is locked.
        angular_damping: Rate in 1/s at which grain spin decays, applied
            implicitly each substep.
        seed: The run seed.
    """

    dt: float = 1.0 / 60.0
    substeps: int = 10
    relaxation: float = 0.75
    solver_iterations: int = 20
    position_iterations: int = 4
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.81)
    grain_grid: tuple[int, int, int] = (10, 10, 20)
    grid_spacing: float = 0.008
    rest_speed_threshold: float = 0.01
    rest_hold_time: float = 0.25
    max_sim_time: float = 10.0
    restitution_threshold: float = 0.01
    contact_margin: float = 0.5
    contact_order: ContactOrder = ContactOrder.SEEDED
    lock_rotation: bool = False
    angular_damping: float = 20.0
    seed: int = 0

    def __post_init__(self) -> None:
        """Validate the configuration and normalize sequence fields."""
        object.__setattr__(self, 'gravity', tuple(float(g) for g in self.gravity))
        object.__setattr__(self, 'grain_grid', tuple(int(n) for n in self.grain_grid))
        object.__setattr__(self, 'contact_order', ContactOrder.parse(self.contact_order))
        if not self.dt > 0:
            raise ConfigError(f'dt must be positive, got {self.dt}')
        if self.substeps < 1:
            raise ConfigError(f'substeps must be at least 1, got {self.substeps}')
        if not 0 < self.relaxation <= 1:
            raise ConfigError(f'relaxation must be in (0, 1], got {self.relaxation}')
        if self.solver_iterations < 1 or self.position_iterations < 0:
            raise ConfigError('solver iteration counts must be positive')
        if len(self.gravity) != 3 or len(self.grain_grid) != 3:
            raise ConfigError('gravity and grain_grid must have three entries')
        if any(n < 0 for n in self.grain_grid):
            raise ConfigError(f'grain_grid counts must be non-negative: {self.grain_grid}')
        if not self.grid_spacing > 0:
            raise ConfigError(f'grid_spacing must be positive, got {self.grid_spacing}')
        if self.contact_margin < 0:
            raise ConfigError(f'contact_margin must be non-negative, got {self.contact_margin}')
        if self.angular_damping < 0:
            raise ConfigError(f'angular_damping must be non-negative, got {self.angular_damping}')
        if self.rest_speed_threshold <= 0 or self.rest_hold_time < 0 \
                or self.max_sim_time <= 0:
            raise ConfigError('rest criteria and max_sim_time must be positive')

    @property
    def grain_count(self) -> int:
        """The total number of grains in the initial grid."""
        nx, ny, nz = self.grain_grid
        return nx * ny * nz

    @property
    def substep_dt(self) -> float:
        """The duration of one substep."""
        return self.dt / self.substeps

    def replace(self, **changes: object) -> 'SimConfig':
        """Return a copy with the given fields replaced."""
        return dataclasses.replace(self, **changes)  # type: ignore


# Grid of the 500-grain scene used for desk-scale experiments.
DESK_GRAIN_GRID = (5, 10, 10)


@dataclass(eq=False)
class SceneState:
    """The dynamic state of every grain.

    Arrays hold one row per grain; their length never changes during a run.

    Instance Attributes:
        positions: Grain centres, shape `(n, 3)`.
        linear_velocities: Linear velocities, shape `(n, 3)`.
        angular_velocities: Angular velocities, shape `(n, 3)`.
        time: The simulated time in seconds.
        steps: The number of frames advanced so far.
    """

    positions: np.ndarray
    linear_velocities: np.ndarray
    angular_velocities: np.ndarray
    time: float = 0.0
    steps: int = 0

    def __post_init__(self) -> None:
        """Coerce the arrays to contiguous float64 and check their shapes."""
        for name in ('positions', 'linear_velocities', 'angular_velocities'):
            array = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, array.reshape(-1, 3))
        n = len(self.positions)
        if len(self.linear_velocities) != n or len(self.angular_velocities) != n:
            raise ValueError('state arrays must have the same length')

    @classmethod
    def at_rest(cls, positions: np.ndarray) -> 'SceneState':
        """Create a state with the given positions and zero velocities."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        return cls(positions, np.zeros_like(positions), np.zeros_like(positions))

    @property
    def grain_count(self) -> int:
        """The number of grains."""
        return len(self.positions)

    def max_speed(self) -> float:
        """The largest linear speed of any grain, or 0 for an empty scene."""
        if self.grain_count == 0:
            return 0.0
        return float(np.sqrt((self.linear_velocities ** 2).sum(axis=1)).max())

    def kinetic_energy(self, grain: GrainParams) -> float:
        """Total translational and rotational kinetic energy in joules."""
        linear = 0.5 * grain.mass * float((self.linear_velocities ** 2).sum())
        angular = 0.5 * grain.inertia * float((self.angular_velocities ** 2).sum())
        return linear + angular

    def copy(self) -> 'SceneState':
        """Return a deep copy of this state."""
        return SceneState(self.positions.copy(), self.linear_velocities.copy(),
                          self.angular_velocities.copy(), self.time, self.steps)


@dataclass(frozen=True)
class ContactEvent:
    """One solved contact.

    Instance Attributes:
        pair: The grain indices in contact. The second index is
            :data:`GROUND_ID` or :data:`FUNNEL_ID` for static colliders.
        normal: Unit normal pointing from the second body to the first.
        penetration_depth: Overlap at contact generation (negative when
            the contact was speculative).
        normal_impulse: Accumulated normal impulse in N*s.
        tangential_impulse: Magnitude of the accumulated tangential
            impulse in N*s.
    """

    pair: tuple[int, int]
    normal: tuple[float, float, float]
    penetration_depth: float
    normal_impulse: float
    tangential_impulse: float


@dataclass
class StepDiagnostics:
    """Solver diagnostics accumulated over the substeps of one or more steps.

    Instance Attributes:
        contact_count: The number of solved contacts.
        max_penetration: The largest overlap after position correction.
        max_cone_excess: The largest value of
            `|tangential| - mu_s * normal` over solved contacts.
        contacts: Solved contacts of the final substep, when recorded.
    """

    contact_count: int = 0
    max_penetration: float = 0.0
    max_cone_excess: float = -math.inf
    contacts: list[ContactEvent] = field(default_factory=list)

    def merge(self, other: 'StepDiagnostics') -> None:
        """Fold the diagnostics of a later step into this one."""
        self.contact_count += other.contact_count
        self.max_penetration = max(self.max_penetration, other.max_penetration)
        self.max_cone_excess = max(self.max_cone_excess, other.max_cone_excess)
        if other.contacts:
            self.contacts = other.contacts


@dataclass
class RunResult:
    """The outcome of running a scene until it settles.

    Instance Attributes:
        state: The final state.
        rested: True if the rest criterion was met, False on timeout.
        diagnostics: Solver diagnostics over the whole run.
    """

    state: SceneState
    rested: bool
    diagnostics: Optional[StepDiagnostics] = None

    @property
    def timed_out(self) -> bool:
        """Whether the run stopped at `max_sim_time`."""
        return not self.rested
