"""Running an :class:`ExperimentSpec` and recording its artifacts."""
import logging
from pathlib import Path
from typing import Any, Callable

from granulab.core.data.dataset import load_training_set
from granulab.core.data.manifest import write_manifest
from granulab.core.data.utils.io import write_json
from granulab.core.harness import experiments as ex
from granulab.core.harness.report import write_heatmap, write_report, write_table
from granulab.core.inference.mdrff import load_model, save_model
from granulab.core.models.common import ExperimentKind
from granulab.core.models.config import RunConfig
from granulab.core.models.experiment import ExperimentSpec
from granulab.core.models.grain import GrainParams
from granulab.core.schemas.artifacts import EvalReportSchema
from granulab.core.schemas.config import dump_run_config

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentSpec, RunConfig, Path], tuple[list[Path], dict[str, Any]]]
# Training rows of the height demo.
HEIGHT_TRAIN_ROWS = 150


def _material(spec: ExperimentSpec, config: RunConfig, key: str = 'theta') -> GrainParams:
    """The material named by an option holding natural-space values."""
    values = spec.options.get(key) or {}
    return config.grain.replace(**{k: float(v) for k, v in values.items()})


def _dataset(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    fp = out / spec.options.get('name', 'dataset.csv')
    n = int(spec.options.get('n', spec.scale.n_train))
    ex.generate_dataset(config, n, fp, spec.scale.workers)
    return [fp], {'rows': n}


def _sim2sim(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    model = load_model(spec.options['model'])
    report = ex.sim2sim_eval(model, config, spec.scale.n_test, spec.seed,
                             forward=spec.options.get('forward', True),
                             workers=spec.scale.workers)
    return write_report(report, out, 'sim2sim'), report.aggregates()


def _noise_sweep(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    model = load_model(spec.options['model'])
    result = ex.noise_sweep(model, config,
                            spec.options.get('blur_sigmas', ex.BLUR_SIGMAS),
                            spec.options.get('pixel_sigmas', ex.PIXEL_SIGMAS),
                            spec.scale.n_test, spec.seed, workers=spec.scale.workers)
    summary = []
    reports = {}
    for (kind, sigma), report in result.reports.items():
        row: dict[str, Any] = {'kind': kind, 'sigma': sigma}
        row.update({f'{k}_abs_error': v for k, v in report.abs_error_mean().items()})
        row.update({f'{k}_error_std': v for k, v in report.error_std().items()})
        summary.append(row)
        reports[report.label] = EvalReportSchema().dump(report)
    files = [write_table(out / 'noise_sweep.csv', summary),
             write_heatmap(out / 'heatmap.csv', result.target, result.grid, result.curves)]
    write_json(out / 'noise_sweep.json', reports)
    files.append(out / 'noise_sweep.json')
    return files, {'target': result.target}


def _propagation(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    rows = ex.propagation_probe(_material(spec, config), config,
                                spec.options.get('deltas', ex.PROPAGATION_DELTAS),
                                spec.seed, spec.scale.workers)
    return [write_table(out / 'propagation.csv', rows)], {}


def _height_demo(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    low, high = spec.options.get('height_range', (0.01, 0.13))
    result = ex.height_demo(config, _material(spec, config), out,
                            int(spec.options.get('n_train', HEIGHT_TRAIN_ROWS)),
                            spec.scale.n_test, (float(low), float(high)),
                            spec.scale.workers)
    files = [save_model(result.model, out / 'height_model.json')]
    files += write_report(result.report, out, 'height')
    files += [out / 'height_train.csv', out / 'height_test.csv']
    extra: dict[str, Any] = dict(result.report.aggregates())
    targets = spec.options.get('targets')
    if targets:
        inferred = ex.infer_heights(result.model, targets)
        write_json(out / 'heights.json', inferred)
        files.append(out / 'heights.json')
        extra['inferred'] = inferred
    return files, extra


def _generalization(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    model = load_model(spec.options['model'])
    heights = spec.options.get('heights', ex.GENERALIZATION_HEIGHTS)
    observed = ex.simulate_observations(_material(spec, config, 'observed'), config,
                                        heights, spec.seed, spec.scale.workers)
    rows = ex.height_generalization(_material(spec, config), config, observed,
                                    ex.StatReference.from_model(model), spec.seed,
                                    spec.scale.workers)
    return [write_table(out / 'generalization.csv', rows)], {}


def _repeatability(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    rows = ex.repeatability(_material(spec, config), config, spec.scale.repeats,
                            spec.seed, spec.scale.workers)
    return [write_table(out / 'repeatability.csv', rows)], {'repeats': spec.scale.repeats}


def _sample_size(spec: ExperimentSpec, config: RunConfig, out: Path) \
        -> tuple[list[Path], dict[str, Any]]:
    dataset = load_training_set(spec.options['dataset'])
    rows = ex.sample_size_study(dataset, config, spec.options['sizes'], spec.scale.n_test,
                                spec.seed, spec.scale.workers)
    return [write_table(out / 'sample_size.csv', rows)], {}


_HANDLERS: dict[ExperimentKind, Handler] = {
    ExperimentKind.DATASET: _dataset,
    ExperimentKind.SIM2SIM: _sim2sim,
    ExperimentKind.NOISE_SWEEP: _noise_sweep,
    ExperimentKind.PROPAGATION: _propagation,
    ExperimentKind.HEIGHT_DEMO: _height_demo,
    ExperimentKind.GENERALIZATION: _generalization,
    ExperimentKind.REPEATABILITY: _repeatability,
    ExperimentKind.SAMPLE_SIZE: _sample_size,
}


def _plain(value: Any) -> Any:
    """Convert option values to JSON types."""
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def run_experiment(spec: ExperimentSpec, config: RunConfig) -> list[Path]:
    """Run an experiment and write its artifacts under `spec.output_dir`.

    The experiment runs at `spec.scale`. Every kind except datasets,
    which carry their own manifest, gets a `<kind>.manifest.json` listing
    the artifacts with their digests.

    Returns:
        The artifact paths.
    """
    config = config.replace(harness=spec.scale)
    out = spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    logger.info('running %s experiment into %s', spec.kind, out)
    files, extra = _HANDLERS[spec.kind](spec, config, out)  # type: ignore
    if spec.kind is not ExperimentKind.DATASET:
        extra = {'seed': spec.seed, 'options': _plain(spec.options), **_plain(extra)}
        manifest = out / f'{spec.kind}.manifest.json'
        write_manifest(manifest, str(spec.kind), dump_run_config(config), files, extra)
        files.append(manifest)
    return files
