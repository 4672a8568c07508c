"""Shared enums and helpers used by the models."""
from enum import Enum


class SerializableEnum(Enum):
    """An enum that serializes to and parses from its lowercase value.

    Examples:
        >>> ContactOrder.parse('SEEDED')
        <ContactOrder.SEEDED: 'seeded'>
        >>> str(ExperimentKind.NOISE_SWEEP)
        'noise_sweep'
    """

    def __str__(self) -> str:
        """Return the value of the enum."""
        return str(self.value)

    @classmethod
    def parse(cls, value: 'str | SerializableEnum') -> 'SerializableEnum':
        """Return the member whose value matches `value`, ignoring case.

        Raises:
            ValueError: If no member matches.
        """
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ', '.join(m.value for m in cls)
            raise ValueError(f'{value!r} is not one of: {choices}') from None


class ContactOrder(SerializableEnum):
    """The order in which the solver visits contacts within a substep.

    `FIXED` visits contacts in generation order (grain index order).
    `SEEDED` visits them in a permutation drawn from the run seed, which is
    the source of run-to-run variation between seeds.
    """

    FIXED = 'fixed'
    SEEDED = 'seeded'


class ExperimentKind(SerializableEnum):
    """The kinds of experiments the harness can run."""

    DATASET = 'dataset'
    SIM2SIM = 'sim2sim'
    NOISE_SWEEP = 'noise_sweep'
    PROPAGATION = 'propagation'
    HEIGHT_DEMO = 'height_demo'
    GENERALIZATION = 'generalization'
    REPEATABILITY = 'repeatability'
    SAMPLE_SIZE = 'sample_size'
