"""Shared marshmallow fields and base schemas."""
from typing import Any, Optional

import numpy as np
from marshmallow import RAISE, Schema, ValidationError, fields

from granulab.core.models.common import SerializableEnum


class NumpyArray(fields.Field):
    """A field that dumps a numpy array as nested lists of floats."""

    def _serialize(self, value: Any, attr: Optional[str], obj: Any,
                   **kwargs: Any) -> Any:
        if value is None:
            return None
        return np.asarray(value, dtype=np.float64).tolist()

    def _deserialize(self, value: Any, attr: Optional[str], data: Any,
                     **kwargs: Any) -> np.ndarray:
        try:
            array = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ValidationError('Not a numeric array.') from e
        if not np.isfinite(array).all():
            raise ValidationError('Array contains non-finite values.')
        return array


class EnumValue(fields.Field):
    """A field holding a :class:`SerializableEnum` member by its value."""

    def __init__(self, enum: type[SerializableEnum], **kwargs: Any) -> None:
        """Initialize an EnumValue field for the given enum class."""
        super().__init__(**kwargs)
        self.enum = enum

    def _serialize(self, value: Any, attr: Optional[str], obj: Any,
                   **kwargs: Any) -> Any:
        return None if value is None else str(value)

    def _deserialize(self, value: Any, attr: Optional[str], data: Any,
                     **kwargs: Any) -> SerializableEnum:
        try:
            return self.enum.parse(value)
        except ValueError as e:
            raise ValidationError(str(e)) from e


class StrictSchema(Schema):
    """A schema that rejects unknown keys."""

    class Meta:
        """Meta class for StrictSchema."""

        unknown = RAISE
        ordered = True
