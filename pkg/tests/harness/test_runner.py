"""Test the :mod:`granulab.core.harness.runner` module."""
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

import granulab.core.harness.experiments as ex
from granulab.core.data.manifest import read_manifest, verify_manifest
from granulab.core.errors import ConfigError
from granulab.core.harness.runner import run_experiment
from granulab.core.models.common import ExperimentKind
from granulab.core.models.config import RunConfig
from granulab.core.models.experiment import ExperimentSpec, HarnessScale
from granulab.core.models.grain import MATERIALS


class TestRunExperiment:
    """Test the :func:`granulab.core.harness.runner.run_experiment` function."""

    SCALE = HarnessScale(grain_grid=(2, 2, 2), n_train=4, n_test=2, repeats=3)

    def test_repeatability(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that results are written with a verifiable manifest."""
        repeat = mocker.patch.object(ex, 'repeatability', return_value=[
            {'statistic': 'max_z', 'mean': 0.02, 'std': 0.001, 'ratio': 0.05}])
        spec = ExperimentSpec(ExperimentKind.REPEATABILITY, self.SCALE, seed=4,
                              output_dir=tmp_path, options={'theta': {'mu_s': 0.4}})
        files = run_experiment(spec, RunConfig())
        assert files == [tmp_path / 'repeatability.csv',
                         tmp_path / 'repeatability.manifest.json']
        params, config, repeats, seed, workers = repeat.call_args.args
        assert params == MATERIALS['couscous'].replace(mu_s=0.4)
        assert (repeats, seed, workers) == (3, 4, 1)
        assert config.harness == self.SCALE
        assert verify_manifest(files[-1]) == ['repeatability.csv']
        manifest = read_manifest(files[-1])
        assert manifest['extra']['seed'] == 4
        assert manifest['extra']['options'] == {'theta': {'mu_s': 0.4}}
        assert manifest['config']['harness']['grain_grid'] == [2, 2, 2]

    def test_dataset(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that datasets are left to carry their own manifest."""
        generate = mocker.patch.object(ex, 'generate_dataset')
        spec = ExperimentSpec(ExperimentKind.DATASET, self.SCALE, output_dir=tmp_path,
                              options={'name': 'train.csv'})
        assert run_experiment(spec, RunConfig()) == [tmp_path / 'train.csv']
        _, n, fp, workers = generate.call_args.args
        assert (n, fp, workers) == (4, tmp_path / 'train.csv', 1)

    def test_propagation(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that propagation rows are written as a table."""
        mocker.patch.object(ex, 'propagation_probe', return_value=[
            {'parameter': 'e', 'delta': 0.01, 'max_z_shift': 0.1, 'mean_r_shift': -0.2}])
        spec = ExperimentSpec(ExperimentKind.PROPAGATION, self.SCALE, output_dir=tmp_path,
                              options={'theta': {}})
        files = run_experiment(spec, RunConfig())
        assert (tmp_path / 'propagation.csv').read_text().startswith(
            'parameter,delta,max_z_shift,mean_r_shift\n')
        assert files[-1].name == 'propagation.manifest.json'

    def test_errors_propagate(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that experiment errors reach the caller and no manifest is written."""
        mocker.patch.object(ex, 'repeatability', side_effect=ConfigError('bad'))
        spec = ExperimentSpec(ExperimentKind.REPEATABILITY, self.SCALE, output_dir=tmp_path)
        with pytest.raises(ConfigError):
            run_experiment(spec, RunConfig())
        assert not (tmp_path / 'repeatability.manifest.json').exists()
