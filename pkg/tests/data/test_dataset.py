"""Test the :mod:`granulab.core.data.dataset` module."""
import json
from pathlib import Path
from typing import Any, Iterator

import numpy as np
import pytest
from pytest_mock import MockerFixture

from granulab.core.data.dataset import Dataset, ProcessedRow, load_training_set, \
    manifest_path, produce, rows_dir
from granulab.core.errors import SchemaMismatchError


class SquaresDataset(Dataset):
    """A dataset whose rows are computed from their index alone."""

    def __init__(self, count: int = 4, offset: float = 0.0) -> None:
        self.count = count
        self.offset = offset

    @property
    def slug(self) -> str:
        return 'squares'

    @property
    def name(self) -> str:
        return 'Squares'

    @property
    def description(self) -> str:
        return 'Squares of the row index.'

    @property
    def param_names(self) -> list[str]:
        return ['a']

    @property
    def stat_names(self) -> list[str]:
        return ['max_z', 'std_r']

    def config_document(self) -> dict:
        return {'offset': self.offset}

    def get(self) -> Iterator[tuple[str, Any]]:
        for i in range(self.count):
            yield f'{i:04d}', i

    def process(self, id: str, data: Any) -> ProcessedRow:
        return ProcessedRow((100 + data, 0.1 * data, data ** 2 + self.offset, -data),
                            attempts=2 if data == 1 else 1)


class TestProduce:
    """Test the :func:`granulab.core.data.dataset.produce` function."""

    def test_rows(self, tmp_path: Path) -> None:
        """Test the returned training set and the written files."""
        fp = tmp_path / 'train.csv'
        data = produce(SquaresDataset(), fp)
        assert data.param_names == ['a'] and data.stat_names == ['max_z', 'std_r']
        assert data.seeds == [100, 101, 102, 103]
        assert data.stats[:, 0].tolist() == [0.0, 1.0, 4.0, 9.0]
        assert fp.read_text().splitlines()[0] == 'seed,a,max_z,std_r'
        manifest = json.loads(manifest_path(fp).read_text())
        assert manifest['extra']['resampled'] == {'0001': 1}
        assert manifest['files'] == {'train.csv': manifest['files']['train.csv']}

    def test_resume(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that finished rows are reused on a second run."""
        fp = tmp_path / 'train.csv'
        produce(SquaresDataset(count=3), fp)
        (rows_dir(fp) / '0002.json').unlink()
        dataset = SquaresDataset(count=3)
        spy = mocker.spy(dataset, 'process')
        again = produce(dataset, fp)
        assert spy.call_count == 1
        assert again.stats[:, 0].tolist() == [0.0, 1.0, 4.0]

    def test_config_change(self, tmp_path: Path, mocker: MockerFixture) -> None:
        """Test that a changed configuration invalidates stored rows."""
        fp = tmp_path / 'train.csv'
        produce(SquaresDataset(count=3), fp)
        dataset = SquaresDataset(count=3, offset=0.5)
        spy = mocker.spy(dataset, 'process')
        data = produce(dataset, fp)
        assert spy.call_count == 3
        assert data.stats[0, 0] == 0.5

    @pytest.mark.parametrize('workers', [2, 3])
    def test_workers(self, tmp_path: Path, workers: int) -> None:
        """Test that rows come out in record order for any worker count."""
        serial = produce(SquaresDataset(count=7), tmp_path / 'serial' / 'train.csv')
        pooled = produce(SquaresDataset(count=7), tmp_path / 'pooled' / 'train.csv',
                         workers=workers)
        assert pooled.seeds == serial.seeds == list(range(100, 107))
        assert np.array_equal(pooled.stats, serial.stats)
        assert (tmp_path / 'pooled' / 'train.csv').read_text() == \
            (tmp_path / 'serial' / 'train.csv').read_text()

    def test_provenance(self, tmp_path: Path) -> None:
        """Test that the configuration digest is recorded on the rows."""
        data = produce(SquaresDataset(), tmp_path / 'train.csv', config={'sim': {}})
        loaded = load_training_set(tmp_path / 'train.csv')
        assert data.provenance['config_digest'] == loaded.provenance['config_digest']


class TestLoadTrainingSet:
    """Test the :func:`granulab.core.data.dataset.load_training_set` function."""

    def test_round_trip(self, tmp_path: Path) -> None:
        """Test that a produced dataset loads back exactly."""
        fp = tmp_path / 'train.csv'
        data = produce(SquaresDataset(), fp)
        loaded = load_training_set(fp)
        assert np.array_equal(loaded.theta, data.theta)
        assert np.array_equal(loaded.stats, data.stats)
        assert loaded.seeds == data.seeds

    def test_without_manifest(self, tmp_path: Path) -> None:
        """Test that column roles follow the statistic names without a manifest."""
        fp = tmp_path / 'train.csv'
        fp.write_text('seed,mu_s,e,max_z\n1,0.5,0.2,0.03\n2,0.4,0.1,0.02\n')
        loaded = load_training_set(fp)
        assert loaded.param_names == ['mu_s', 'e'] and loaded.stat_names == ['max_z']
        assert loaded.seeds == [1, 2]

    @pytest.mark.parametrize('text', [
        'a,max_z\n1,2\n3,4\n',
        'seed,max_z,a\n1,2,3\n4,5,6\n',
    ])
    def test_bad_header(self, tmp_path: Path, text: str) -> None:
        """Test that a missing seed or interleaved columns are rejected."""
        fp = tmp_path / 'train.csv'
        fp.write_text(text)
        with pytest.raises(SchemaMismatchError):
            load_training_set(fp)

    def test_header_mismatch(self, tmp_path: Path) -> None:
        """Test that a header that disagrees with the manifest is rejected."""
        fp = tmp_path / 'train.csv'
        produce(SquaresDataset(), fp)
        lines = fp.read_text().splitlines()
        lines[0] = 'seed,a,std_r,max_z'
        fp.write_text('\n'.join(lines) + '\n')
        with pytest.raises(SchemaMismatchError):
            load_training_set(fp)
