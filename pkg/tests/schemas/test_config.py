"""Test the Marshmallow schemas for the configuration sections."""
import pytest

import granulab.core.models.camera as camera
import granulab.core.schemas.config as schemas
from granulab.core.errors import ConfigError
from granulab.core.models.common import ContactOrder
from granulab.core.models.config import RunConfig
from granulab.core.models.grain import SimConfig


class TestRunConfigSchema:
    """Test the :class:`granulab.core.schemas.config.RunConfigSchema` class."""

    def test_round_trip(self) -> None:
        """Test that a dumped configuration loads back equal."""
        config = RunConfig().with_seed(7)
        assert schemas.load_run_config(schemas.dump_run_config(config)) == config

    def test_dump(self) -> None:
        """Test the JSON form of enum and tuple fields."""
        document = schemas.dump_run_config(RunConfig())
        assert document['sim']['contact_order'] == 'seeded'
        assert document['sim']['grain_grid'] == [10, 10, 20]
        assert document['prior']['ranges'][1] == {
            'name': 'mu_r', 'low': 1e-7, 'high': 1e-1, 'log': True}
        assert document['camera']['intrinsics']['fx'] == pytest.approx(160.0)

    def test_partial(self) -> None:
        """Test that missing sections and fields keep their defaults."""
        config = schemas.load_run_config({'sim': {'substeps': 4, 'contact_order': 'fixed'}})
        assert config.sim == SimConfig(substeps=4, contact_order=ContactOrder.FIXED)
        assert config.camera == camera.CameraConfig()

    @pytest.mark.parametrize('document', [
        {'simulation': {}},
        {'sim': {'dtt': 0.01}},
        {'sim': {'grain_grid': [1, 2]}},
        {'sim': {'contact_order': 'random'}},
        {'noise': {'blur_sigma': 'wide'}},
    ])
    def test_rejects(self, document: dict) -> None:
        """Test that unknown keys and malformed values are rejected."""
        with pytest.raises(ConfigError):
            schemas.load_run_config(document)

    def test_model_validation(self) -> None:
        """Test that values the models reject raise a configuration error."""
        with pytest.raises(ConfigError):
            schemas.load_run_config({'grain': {'mu_s': 2.0, 'mu_r': 1e-4, 'e': 0.5}})
