"""Model definitions for grain point clouds and summary statistics."""
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Names of the summary statistics, in their frozen order.
STAT_NAMES: tuple[str, ...] = (
    'max_z', 'mean_z', 'std_z',
    'max_r', 'mean_r',
    'std_x', 'std_y', 'std_r',
    'iqr_x', 'iqr_y', 'iqr_r',
    'kurt_r', 'dcor_rz',
    'chi_df', 'chi_b', 'chi_a',
)


@dataclass(eq=False)
class GrainPointCloud:
    """Grain surface points in a levelled world frame.

    The ground is the plane `z = 0` and the horizontal centroid of the grain
    points is the origin.

    Instance Attributes:
        points: Points of shape `(m, 3)`.
        r: Horizontal distance of each point from the centroid.
        z: Height of each point above the ground.
        rotation: The rotation that levelled the cloud (identity when no
            ground plane was fitted).
    """

    points: np.ndarray
    r: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self) -> None:
        """Derive the radial distances and heights from the points."""
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.z = self.points[:, 2].copy()
        if len(self.points):
            centre = self.points[:, :2].mean(axis=0)
        else:
            centre = np.zeros(2)
        self.r = np.hypot(self.points[:, 0] - centre[0], self.points[:, 1] - centre[1])

    @property
    def size(self) -> int:
        """The number of points."""
        return len(self.points)

    def centred(self) -> 'GrainPointCloud':
        """Return this cloud translated so its horizontal centroid is the origin."""
        points = self.points.copy()
        if len(points):
            points[:, :2] -= points[:, :2].mean(axis=0)
        return GrainPointCloud(points, rotation=self.rotation)


@dataclass(frozen=True)
class ChiFit:
    """A chi distribution fitted to radial distances.

    The density is `chi.pdf((r - b) / A; df) / A`.

    Instance Attributes:
        df: Degrees of freedom.
        b: Shift in metres.
        A: Scale in metres.
        nll: Mean negative log-likelihood at the fitted parameters.
        degenerate: Whether the input had no spread and the fit fell back
            to the lower scale clamp.
    """

    df: float
    b: float
    A: float
    nll: float
    degenerate: bool = False


class SummaryStats:
    """The 16 summary statistics of a depth image.

    Statistics are stored in the order of :data:`STAT_NAMES` and can be
    read by name.

    Examples:
        >>> stats = SummaryStats(range(16))
        >>> stats['mean_r']
        4.0
        >>> len(stats)
        16
    """

    # Private Instance Attributes:
    #     _values: The statistic vector.
    _values: np.ndarray

    def __init__(self, values: Iterable[float]) -> None:
        """Initialize SummaryStats from 16 values in canonical order."""
        self._values = np.asarray(list(values), dtype=np.float64)
        if self._values.shape != (len(STAT_NAMES),):
            raise ValueError(
                f'expected {len(STAT_NAMES)} statistics, got {self._values.shape}')
        if not np.isfinite(self._values).all():
            raise ValueError('summary statistics must be finite')

    @classmethod
    def from_dict(cls, values: dict[str, float]) -> 'SummaryStats':
        """Build statistics from a mapping of name to value."""
        return cls(values[name] for name in STAT_NAMES)

    def as_array(self) -> np.ndarray:
        """Return a copy of the statistic vector."""
        return self._values.copy()

    def as_dict(self) -> dict[str, float]:
        """Return the statistics as an ordered name-to-value mapping."""
        return {name: float(v) for name, v in zip(STAT_NAMES, self._values)}

    def select(self, names: Sequence[str]) -> np.ndarray:
        """Return the values of the named statistics, in the given order."""
        return np.array([self[name] for name in names])

    def __getitem__(self, name: str) -> float:
        """Return the statistic with the given name."""
        return float(self._values[STAT_NAMES.index(name)])

    def __len__(self) -> int:
        """Return the number of statistics."""
        return len(self._values)

    def __eq__(self, other: object) -> bool:
        """Return whether both vectors are exactly equal."""
        if not isinstance(other, SummaryStats):
            return NotImplemented
        return bool(np.array_equal(self._values, other._values))

    def __repr__(self) -> str:
        """Return a string representation of the statistics."""
        body = ', '.join(f'{k}={v:.6g}' for k, v in self.as_dict().items())
        return f'SummaryStats({body})'
