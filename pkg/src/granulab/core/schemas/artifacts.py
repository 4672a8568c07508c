"""Marshmallow schemas for persisted artifacts.

Artifacts carry a `format` tag and an integer `version`; loaders reject
documents whose version they do not know.
"""
from typing import Any

from marshmallow import fields, post_load, pre_load, validate

import granulab.core.models.experiment as experiment
import granulab.core.models.inference as inference
from granulab.core.data.utils.serialization import without_keys
from granulab.core.schemas.common import NumpyArray, StrictSchema
from granulab.core.schemas.config import IntrinsicsSchema

DEPTH_FORMAT = 'granulab.depth'
DEPTH_VERSION = 1
MODEL_FORMAT = 'granulab.mdrff'
MODEL_VERSION = 1
MANIFEST_FORMAT = 'granulab.manifest'
MANIFEST_VERSION = 1
POSTERIOR_FORMAT = 'granulab.posterior'
POSTERIOR_VERSION = 1


class DepthSidecarSchema(StrictSchema):
    """Marshmallow schema for the JSON sidecar of a `.depth` grid."""

    format = fields.String(required=True, validate=validate.Equal(DEPTH_FORMAT))
    version = fields.Integer(required=True)
    width = fields.Integer(required=True, validate=validate.Range(min=1))
    height = fields.Integer(required=True, validate=validate.Range(min=1))
    dtype = fields.String(required=True, validate=validate.Equal('float32le'))
    camera_height = fields.Float(required=True)
    intrinsics = fields.Nested(IntrinsicsSchema, required=True)
    tool_version = fields.String(required=True)


class ManifestSchema(StrictSchema):
    """Marshmallow schema for artifact manifests.

    `files` maps paths relative to the manifest to their SHA-256 digests.
    """

    format = fields.String(required=True, validate=validate.Equal(MANIFEST_FORMAT))
    version = fields.Integer(required=True)
    kind = fields.String(required=True)
    tool_version = fields.String(required=True)
    config_digest = fields.String(required=True)
    config = fields.Dict(keys=fields.String(), required=True)
    files = fields.Dict(keys=fields.String(), values=fields.String(), required=True)
    extra = fields.Dict(keys=fields.String(), load_default=dict)


class PosteriorSchema(StrictSchema):
    """Marshmallow schema for the :class:`Posterior` model."""

    weights = NumpyArray(required=True)
    means = NumpyArray(required=True)
    variances = NumpyArray(required=True)
    param_names = fields.List(fields.String(), required=True)
    bounds = NumpyArray(required=True)
    fixed = fields.Dict(keys=fields.String(), values=fields.Float(), load_default=dict)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.Posterior:
        """Build the model."""
        return inference.Posterior(**data)


class PosteriorDocumentSchema(StrictSchema):
    """Marshmallow schema for a posterior written by `infer`.

    `estimate` holds the point estimate in natural units.
    """

    format = fields.String(required=True, validate=validate.Equal(POSTERIOR_FORMAT))
    version = fields.Integer(required=True)
    tool_version = fields.String(required=True)
    posterior = fields.Nested(PosteriorSchema, required=True)
    estimate = fields.Dict(keys=fields.String(), values=fields.Float(), required=True)
    extra = fields.Dict(keys=fields.String(), load_default=dict)


class RffConfigSchema(StrictSchema):
    """Marshmallow schema for the :class:`RffConfig` model."""

    omega = NumpyArray(required=True)
    phase = NumpyArray(required=True)
    lengthscales = NumpyArray(required=True)
    nu = fields.Float(required=True)
    seed = fields.Integer(required=True)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.RffConfig:
        """Build the model."""
        return inference.RffConfig(**data)


class MdrffModelSchema(StrictSchema):
    """Marshmallow schema for the :class:`MdrffModel` model."""

    format = fields.String(required=True, validate=validate.Equal(MODEL_FORMAT))
    version = fields.Integer(required=True)
    tool_version = fields.String(required=True)
    rff = fields.Nested(RffConfigSchema, required=True)
    n_components = fields.Integer(required=True, validate=validate.Range(min=1))
    weight = NumpyArray(required=True)
    bias = NumpyArray(required=True)
    stat_names = fields.List(fields.String(), required=True)
    stat_mean = NumpyArray(required=True)
    stat_std = NumpyArray(required=True)
    param_names = fields.List(fields.String(), required=True)
    theta_mean = NumpyArray(required=True)
    theta_std = NumpyArray(required=True)
    bounds = NumpyArray(required=True)
    fixed = fields.Dict(keys=fields.String(), values=fields.Float(), load_default=dict)
    diagnostics = fields.Dict(keys=fields.String(), load_default=dict)
    provenance = fields.Dict(keys=fields.String(), load_default=dict)

    @post_load
    def make(self, data: dict, **kwargs: Any) -> inference.MdrffModel:
        """Build the model, dropping the envelope fields."""
        for key in ('format', 'version', 'tool_version'):
            data.pop(key)
        return inference.MdrffModel(**data)


class CaseResultSchema(StrictSchema):
    """Marshmallow schema for the :class:`CaseResult` model."""

    theta_true = fields.List(fields.Float(), required=True)
    theta_star = fields.List(fields.Float(), required=True)
    errors = fields.List(fields.Float(), dump_only=True)
    l2 = fields.Float(allow_none=True, load_default=None)

    @pre_load
    def strip_derived(self, data: dict, **kwargs: Any) -> dict:
        """Drop the dumped errors, which are recomputed from the parameters."""
        return without_keys(data, {'errors'})

    @post_load
    def make(self, data: dict, **kwargs: Any) -> experiment.CaseResult:
        """Build the model."""
        return experiment.CaseResult(theta_true=tuple(data['theta_true']),
                                     theta_star=tuple(data['theta_star']),
                                     l2=data['l2'])


class EvalReportSchema(StrictSchema):
    """Marshmallow schema for the :class:`EvalReport` model.

    Aggregates are dumped for convenience and recomputed on load.
    """

    label = fields.String(load_default='')
    param_names = fields.List(fields.String(), required=True)
    rows = fields.List(fields.Nested(CaseResultSchema), required=True)
    aggregates = fields.Method('dump_aggregates', dump_only=True)

    @pre_load
    def strip_derived(self, data: dict, **kwargs: Any) -> dict:
        """Drop the dumped aggregates, which are recomputed from the rows."""
        return without_keys(data, {'aggregates'})

    def dump_aggregates(self, report: experiment.EvalReport) -> dict:
        """Return the aggregates of a report."""
        return report.aggregates()

    @post_load
    def make(self, data: dict, **kwargs: Any) -> experiment.EvalReport:
        """Build the model."""
        return experiment.EvalReport(**data)
