"""Marshmallow schemas for the configuration sections.

Every schema rejects unknown keys and loads into the matching frozen
dataclass, whose own validation raises :class:`ConfigError`.
"""
from typing import Any

from marshmallow import ValidationError, fields, post_load, validate

import granulab.core.models.camera as camera
import granulab.core.models.config as config
import granulab.core.models.experiment as experiment
import granulab.core.models.grain as grain
import granulab.core.models.inference as inference
from granulab.core.errors import ConfigError
from granulab.core.models.common import ContactOrder
from granulab.core.schemas.common import EnumValue, StrictSchema


class GrainParamsSchema(StrictSchema):
    """Marshmallow schema for the :class:`GrainParams` model."""

    mu_s = fields.Float(required=True)
    mu_r = fields.Float(required=True)
    e = fields.Float(required=True)
    radius = fields.Float()
    mass = fields.Float()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> grain.GrainParams:
        """Build the model."""
        return grain.GrainParams(**data)


class FunnelSpecSchema(StrictSchema):
    """Marshmallow schema for the :class:`FunnelSpec` model."""

    tip_height = fields.Float()
    top_radius = fields.Float()
    spout_radius = fields.Float()
    cone_height = fields.Float()
    spout_length = fields.Float()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> grain.FunnelSpec:
        """Build the model."""
        return grain.FunnelSpec(**data)


class SimConfigSchema(StrictSchema):
    """Marshmallow schema for the :class:`SimConfig` model."""

    dt = fields.Float()
    substeps = fields.Integer()
    relaxation = fields.Float()
    solver_iterations = fields.Integer()
    position_iterations = fields.Integer()
    gravity = fields.List(fields.Float(), validate=validate.Length(equal=3))
    grain_grid = fields.List(fields.Integer(), validate=validate.Length(equal=3))
    grid_spacing = fields.Float()
    rest_speed_threshold = fields.Float()
    rest_hold_time = fields.Float()
    max_sim_time = fields.Float()
    restitution_threshold = fields.Float()
    contact_margin = fields.Float()
    contact_order = EnumValue(ContactOrder)
    lock_rotation = fields.Boolean()
    angular_damping = fields.Float()
    seed = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> grain.SimConfig:
        """Build the model."""
        return grain.SimConfig(**data)


class IntrinsicsSchema(StrictSchema):
    """Marshmallow schema for the :class:`Intrinsics` model."""

    fx = fields.Float(required=True)
    fy = fields.Float(required=True)
    cx = fields.Float(required=True)
    cy = fields.Float(required=True)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> camera.Intrinsics:
        """Build the model."""
        return camera.Intrinsics(**data)


class CameraConfigSchema(StrictSchema):
    """Marshmallow schema for the :class:`CameraConfig` model."""

    height_above_ground = fields.Float()
    native_resolution = fields.List(fields.Integer(), validate=validate.Length(equal=2))
    footprint = fields.Float()
    downsample_factor = fields.Integer()
    intrinsics = fields.Nested(IntrinsicsSchema, allow_none=True)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> camera.CameraConfig:
        """Build the model."""
        return camera.CameraConfig(**data)


class NoiseConfigSchema(StrictSchema):
    """Marshmallow schema for the :class:`NoiseConfig` model."""

    blur_sigma = fields.Float()
    pixel_sigma = fields.Float()
    seed = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> camera.NoiseConfig:
        """Build the model."""
        return camera.NoiseConfig(**data)


class ParameterRangeSchema(StrictSchema):
    """Marshmallow schema for the :class:`ParameterRange` model."""

    name = fields.String(required=True)
    low = fields.Float(required=True)
    high = fields.Float(required=True)
    log = fields.Boolean()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.ParameterRange:
        """Build the model."""
        return inference.ParameterRange(**data)


class PriorSchema(StrictSchema):
    """Marshmallow schema for the :class:`Prior` model."""

    ranges = fields.List(fields.Nested(ParameterRangeSchema), required=True)
    seed = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.Prior:
        """Build the model."""
        data['ranges'] = tuple(data['ranges'])
        return inference.Prior(**data)


class RffSettingsSchema(StrictSchema):
    """Marshmallow schema for the :class:`RffSettings` model."""

    n_features = fields.Integer()
    lengthscale_factor = fields.Float()
    seed = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.RffSettings:
        """Build the model."""
        return inference.RffSettings(**data)


class TrainingScheduleSchema(StrictSchema):
    """Marshmallow schema for the :class:`TrainingSchedule` model."""

    n_components = fields.Integer()
    epochs = fields.Integer()
    learning_rate = fields.Float()
    plateau_window = fields.Integer()
    plateau_tol = fields.Float()
    weight_decay = fields.Float()
    seed = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.TrainingSchedule:
        """Build the model."""
        return inference.TrainingSchedule(**data)


class HarnessScaleSchema(StrictSchema):
    """Marshmallow schema for the :class:`HarnessScale` model."""

    grain_grid = fields.List(fields.Integer(), validate=validate.Length(equal=3))
    n_train = fields.Integer()
    n_test = fields.Integer()
    repeats = fields.Integer()
    workers = fields.Integer()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> experiment.HarnessScale:
        """Build the model."""
        return experiment.HarnessScale(**data)


class RunConfigSchema(StrictSchema):
    """Marshmallow schema for the :class:`RunConfig` document.

    Missing sections keep their built-in defaults.
    """

    grain = fields.Nested(GrainParamsSchema)
    funnel = fields.Nested(FunnelSpecSchema)
    sim = fields.Nested(SimConfigSchema)
    camera = fields.Nested(CameraConfigSchema)
    noise = fields.Nested(NoiseConfigSchema)
    prior = fields.Nested(PriorSchema)
    rff = fields.Nested(RffSettingsSchema)
    training = fields.Nested(TrainingScheduleSchema)
    harness = fields.Nested(HarnessScaleSchema)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> config.RunConfig:
        """Build the model."""
        return config.RunConfig(**data)


def dump_run_config(run_config: config.RunConfig) -> dict:
    """Return the JSON document of a fully resolved configuration."""
    return RunConfigSchema().dump(run_config)


def load_run_config(document: dict) -> config.RunConfig:
    """Build a configuration from a document; missing sections keep their defaults.

    Raises:
        ConfigError: If the document has unknown keys or invalid values.
    """
    try:
        return RunConfigSchema().load(document)
    except ValidationError as e:
        raise ConfigError(f'invalid configuration: {e.messages}') from e
