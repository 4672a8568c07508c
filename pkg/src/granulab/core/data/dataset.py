"""Base classes for datasets of simulated formations, and their production."""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional, Union

import numpy as np

from granulab.core.data.manifest import read_manifest, write_manifest
from granulab.core.data.utils.hash import make_hash_sha256
from granulab.core.data.utils.io import read_csv, read_json, write_csv, write_json
from granulab.core.errors import SchemaMismatchError
from granulab.core.models.features import STAT_NAMES
from granulab.core.models.inference import TrainingSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ProcessedRow:
    """One finished dataset row.

    Instance Attributes:
        values: The row's cells in header order; the first is the seed.
        attempts: How many simulations it took to produce the row.
    """

    values: tuple[float, ...]
    attempts: int = 1


class Dataset(ABC):
    """A dataset of `(seed, parameters, statistics)` rows.

    All subclasses should implement functionality for a) enumerating the
    rows to produce as `(id, data)` records via the `get` method, and b)
    computing a record into a :class:`ProcessedRow` via the `process`
    method. The `slug`, `name`, and `description` properties provide
    metadata about the dataset.

    Instances are sent to worker processes, so they must be picklable.
    """

    @property
    @abstractmethod
    def slug(self) -> str:
        """Return the slug of this dataset."""
        raise NotImplementedError()

    @property
    @abstractmethod
    def name(self) -> str:
        """Return the name of this dataset."""
        raise NotImplementedError()

    @property
    @abstractmethod
    def description(self) -> str:
        """Return the description of this dataset."""
        raise NotImplementedError()

    @property
    @abstractmethod
    def param_names(self) -> list[str]:
        """Return the names of the parameter columns."""
        raise NotImplementedError()

    @property
    @abstractmethod
    def stat_names(self) -> list[str]:
        """Return the names of the statistic columns."""
        raise NotImplementedError()

    @property
    def header(self) -> list[str]:
        """Return the CSV header: the seed, the parameters, then the statistics."""
        return ['seed', *self.param_names, *self.stat_names]

    @abstractmethod
    def config_document(self) -> dict:
        """Return the configuration that, with a record, determines its row."""
        raise NotImplementedError()

    @abstractmethod
    def get(self) -> Iterator[tuple[str, Any]]:
        """Return an iterator that lazily yields `(id, data)` records.

        The `id` should be a unique identifier for the record, and the `data`
        can be any hashable object. A hash of the `data` object and of the
        configuration is compared with the hash stored with a previously
        produced row to decide whether the row can be reused.
        """
        raise NotImplementedError()

    @abstractmethod
    def process(self, id: str, data: Any) -> ProcessedRow:
        """Compute the row for the given record.

        Args:
            id: The unique identifier for the record.
            data: The data for the record.
        """
        raise NotImplementedError()


def manifest_path(fp: PathLike) -> Path:
    """Return the manifest path of a dataset CSV, e.g. `train.manifest.json`."""
    fp = Path(fp)
    return fp.with_name(fp.stem + '.manifest.json')


def rows_dir(fp: PathLike) -> Path:
    """Return the directory holding the finished rows of a dataset in progress."""
    fp = Path(fp)
    return fp.with_name(fp.name + '.rows')


def _process(dataset: Dataset, id: str, data: Any) -> ProcessedRow:
    return dataset.process(id, data)


def produce(dataset: Dataset, fp: PathLike, workers: int = 1,
            config: Optional[dict] = None) -> TrainingSet:
    """Produce every row of a dataset and write it as CSV plus manifest.

    Finished rows are kept under :func:`rows_dir` keyed by a digest of the
    record and the configuration, so an interrupted run resumes where it
    stopped. Rows are computed concurrently when `workers > 1`; the output
    is in record order regardless.

    Args:
        dataset: The dataset to produce.
        fp: The CSV path.
        workers: The number of worker processes.
        config: The full configuration document to record in the manifest.
            Defaults to the dataset's own configuration.

    Returns:
        The produced rows as a training set.
    """
    fp = Path(fp)
    cache = rows_dir(fp)
    cache.mkdir(parents=True, exist_ok=True)
    document = dataset.config_document()

    records = list(dataset.get())
    rows: dict[str, ProcessedRow] = {}
    pending = []
    for id, data in records:
        digest = make_hash_sha256([document, data])
        cached = cache / f'{id}.json'
        if cached.is_file():
            stored = read_json(cached)
            if stored.get('digest') == digest:
                rows[id] = ProcessedRow(tuple(stored['values']), stored['attempts'])
                continue
        pending.append((id, data, digest))
    if len(rows):
        logger.info('%s: reusing %d of %d rows', dataset.slug, len(rows), len(records))

    def finish(id: str, digest: str, row: ProcessedRow) -> None:
        rows[id] = row
        write_json(cache / f'{id}.json', {'digest': digest, 'values': list(row.values),
                                          'attempts': row.attempts})
        logger.debug('%s: row %s done', dataset.slug, id)

    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = executor.map(_process, [dataset] * len(pending),
                                   [p[0] for p in pending], [p[1] for p in pending])
            for (id, _, digest), row in zip(pending, results):
                finish(id, digest, row)
    else:
        for id, data, digest in pending:
            finish(id, digest, dataset.process(id, data))

    ordered = [rows[id] for id, _ in records]
    write_csv(fp, dataset.header, ([int(r.values[0]), *r.values[1:]] for r in ordered))
    resampled = {id: rows[id].attempts - 1 for id, _ in records if rows[id].attempts > 1}
    write_manifest(manifest_path(fp), 'dataset', config or document, [fp], extra={
        'slug': dataset.slug,
        'rows': len(ordered),
        'param_names': dataset.param_names,
        'stat_names': dataset.stat_names,
        'resampled': resampled,
    })
    values = np.array([r.values for r in ordered], dtype=np.float64)
    p = len(dataset.param_names)
    return TrainingSet(values[:, 1:1 + p], values[:, 1 + p:], dataset.param_names,
                       dataset.stat_names, [int(v) for v in values[:, 0]],
                       {'config_digest': make_hash_sha256(config or document),
                        'slug': dataset.slug})


def load_training_set(fp: PathLike) -> TrainingSet:
    """Read a dataset CSV written by :func:`produce`.

    Column roles come from the manifest when one exists. Otherwise every
    column after the seed that is not a summary statistic is a parameter.

    Raises:
        SchemaMismatchError: If the header does not match the manifest or
            has no seed column.
    """
    fp = Path(fp)
    header, cells = read_csv(fp)
    if not header or header[0] != 'seed':
        raise SchemaMismatchError(f'{fp}: the first column must be the seed')
    provenance: dict[str, Any] = {}
    if manifest_path(fp).is_file():
        manifest = read_manifest(manifest_path(fp))
        param_names = list(manifest['extra'].get('param_names', []))
        stat_names = list(manifest['extra'].get('stat_names', []))
        provenance['config_digest'] = manifest['config_digest']
        if header != ['seed', *param_names, *stat_names]:
            raise SchemaMismatchError(f'{fp}: header does not match its manifest')
    else:
        param_names = [h for h in header[1:] if h not in STAT_NAMES]
        stat_names = [h for h in header[1:] if h in STAT_NAMES]
        if header != ['seed', *param_names, *stat_names]:
            raise SchemaMismatchError(f'{fp}: parameter and statistic columns are interleaved')
    values = np.array(cells, dtype=np.float64).reshape(len(cells), len(header))
    p = len(param_names)
    return TrainingSet(values[:, 1:1 + p], values[:, 1 + p:], param_names, stat_names,
                       [int(v) for v in values[:, 0]], provenance)
