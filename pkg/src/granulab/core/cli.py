"""The `granulab` command-line interface.

Configuration is layered: built-in defaults, then the `--config` file,
then `--set section.key=value` overrides. `--seed` (or the GRANULAB_SEED
environment variable) reseeds every seeded section.

Exit codes: 0 on success, 2 for usage errors, 3 for data, schema and I/O
errors, 4 for numerical failures.
"""
import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from granulab.core.camera.io import import_depth, load_depth, load_mask, save_depth
from granulab.core.camera.noise import apply_noise
from granulab.core.camera.render import downsample, downsample_mask, render_depth
from granulab.core.data.dataset import load_training_set, manifest_path
from granulab.core.data.manifest import verify_manifest, write_manifest
from granulab.core.data.utils.hash import file_sha256, make_hash_sha256
from granulab.core.data.utils.io import read_csv, read_json, write_csv
from granulab.core.data.utils.serialization import merge_documents, parse_override, \
    set_dotted
from granulab.core.errors import GranulabError, SchemaMismatchError
from granulab.core.features.stats import summarize
from granulab.core.harness.experiments import StatReference, forward_validate
from granulab.core.harness.runner import run_experiment
from granulab.core.inference.mdrff import load_model, predict_posterior, save_model, train
from granulab.core.inference.posterior import describe, mixture_mode, natural_values, \
    point_estimate, save_posterior
from granulab.core.models.camera import NoiseConfig
from granulab.core.models.common import ExperimentKind
from granulab.core.models.config import RunConfig
from granulab.core.models.experiment import ExperimentSpec, HarnessScale
from granulab.core.models.grain import GrainParams, SceneState, StepDiagnostics
from granulab.core.schemas.config import dump_run_config, load_run_config
from granulab.core.sim.scene import run_to_rest

logger = logging.getLogger(__name__)

SEED_ENV = 'GRANULAB_SEED'
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _float_list(text: str) -> list[float]:
    """Parse a comma-separated list of floats."""
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'not a list of numbers: {text!r}') from None


def _int_list(text: str) -> list[int]:
    """Parse a comma-separated list of integers."""
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'not a list of integers: {text!r}') from None


def grain_grid_for(count: int) -> tuple[int, int, int]:
    """Lay out `count` grains as square layers of at most 10 by 10.

    Examples:
        >>> grain_grid_for(500), grain_grid_for(1), grain_grid_for(7)
        ((10, 10, 5), (1, 1, 1), (1, 1, 7))
    """
    if count < 1:
        raise ValueError('the grain count must be positive')
    side = max(k for k in range(1, 11) if count % (k * k) == 0)
    return side, side, count // (side * side)


def resolve_config(path: Optional[str], overrides: Sequence[str],
                   seed: Optional[int]) -> RunConfig:
    """Layer the config file and overrides over the defaults.

    Raises:
        KeyError: If an override names an unknown key.
        ConfigError: If the resulting document is invalid.
    """
    defaults = dump_run_config(RunConfig())
    layers = [read_json(path)] if path else []
    override_doc: dict[str, Any] = {}
    for text in overrides:
        keys, value = parse_override(text)
        set_dotted(override_doc, keys, value, known=defaults)
    config = load_run_config(merge_documents(defaults, *layers, override_doc))
    if seed is not None:
        config = config.with_seed(seed)
    return config


def configure_logging(verbosity: int) -> None:
    """Log to stderr: warnings by default, then info, then debug."""
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbosity, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _material(args: argparse.Namespace, config: RunConfig) -> GrainParams:
    values = {k: getattr(args, k) for k in ('mu_s', 'mu_r', 'e')
              if getattr(args, k, None) is not None}
    return config.grain.replace(**values)


def _scale(args: argparse.Namespace, config: RunConfig) -> HarnessScale:
    scale = HarnessScale.full() if getattr(args, 'paper_scale', False) else config.harness
    changes: dict[str, Any] = {}
    if args.workers is not None:
        changes['workers'] = args.workers
    if getattr(args, 'tests', None) is not None:
        changes['n_test'] = args.tests
    if getattr(args, 'repeats', None) is not None:
        changes['repeats'] = args.repeats
    return scale.replace(**changes)


def _seed(config: RunConfig) -> int:
    return config.sim.seed


def cmd_simulate(args: argparse.Namespace, config: RunConfig) -> int:
    """Pour one formation and write the grain positions."""
    params = _material(args, config)
    sim = config.sim
    if args.grains is not None:
        sim = sim.replace(grain_grid=grain_grid_for(args.grains))
    config = config.replace(grain=params, sim=sim)
    diagnostics = StepDiagnostics()
    result = run_to_rest(params, config.funnel, sim, diagnostics=diagnostics)
    out = Path(args.out)
    write_csv(out, ['x', 'y', 'z'], result.state.positions.tolist())
    write_manifest(manifest_path(out), 'scene', dump_run_config(config), [out], extra={
        'grains': result.state.grain_count,
        'rested': result.rested,
        'time': result.state.time,
        'contacts': diagnostics.contact_count,
        'max_penetration': _finite_or_none(diagnostics.max_penetration),
        'max_cone_excess': _finite_or_none(diagnostics.max_cone_excess),
    })
    print(f'{result.state.grain_count} grains, '
          f'{"rested" if result.rested else "timed out"} at {result.state.time:.3f}s -> {out}')
    return EXIT_OK


def _load_scene(fp: Path) -> SceneState:
    header, rows = read_csv(fp)
    if header != ['x', 'y', 'z']:
        raise SchemaMismatchError(f'{fp} is not a scene file')
    return SceneState.at_rest(np.array(rows, dtype=np.float64).reshape(-1, 3))


def cmd_render(args: argparse.Namespace, config: RunConfig) -> int:
    """Render a scene file as a depth image."""
    noise = config.noise
    if args.blur is not None or args.pixel_noise is not None:
        noise = NoiseConfig(args.blur or 0.0, args.pixel_noise or 0.0, noise.seed)
    config = config.replace(noise=noise)
    image = render_depth(_load_scene(Path(args.scene)), config.camera, config.grain.radius)
    if not noise.is_identity:
        image = apply_noise(image, noise)
    if not args.native:
        image = downsample(image, config.camera.downsample_factor)
    out = Path(args.out)
    files = save_depth(image, out)
    write_manifest(manifest_path(out), 'depth', dump_run_config(config), files,
                   extra={'scene': str(args.scene), 'native': args.native})
    print(f'{image.width}x{image.height} depth image -> {out}')
    return EXIT_OK


def _run(spec: ExperimentSpec, config: RunConfig) -> list[Path]:
    files = run_experiment(spec, config)
    for f in files:
        print(f)
    return files


def cmd_gen_dataset(args: argparse.Namespace, config: RunConfig) -> int:
    """Generate a training dataset."""
    out = Path(args.out)
    scale = _scale(args, config)
    options = {'n': args.n if args.n is not None else scale.n_train, 'name': out.name}
    _run(ExperimentSpec(ExperimentKind.DATASET, scale, _seed(config), out.parent, options),
         config)
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    """Train a model on a dataset."""
    dataset = load_training_set(args.dataset)
    if args.stats:
        dataset = dataset.select(stat_names=args.stats.split(','))
    dataset.provenance.update(dataset_sha256=file_sha256(args.dataset),
                              config_digest=make_hash_sha256(dump_run_config(config)))
    prior = config.prior if config.prior.theta_names == dataset.param_names else None
    model = train(dataset, config.rff, config.training, prior)
    out = save_model(model, args.out)
    write_manifest(manifest_path(out), 'model', dump_run_config(config), [out],
                   extra={'dataset': str(args.dataset), 'diagnostics': model.diagnostics})
    print(json.dumps(model.diagnostics, sort_keys=True))
    return EXIT_OK


def cmd_infer(args: argparse.Namespace, config: RunConfig) -> int:
    """Infer the parameters behind one depth image."""
    model = load_model(args.model)
    path = Path(args.image)
    image = load_depth(path) if path.suffix == '.depth' else import_depth(path, config.camera)
    mask = load_mask(args.mask, image.depth.shape) if args.mask else None
    factor = config.camera.downsample_factor
    if image.width == config.camera.native_resolution[0] and factor > 1:
        image = downsample(image, factor)
        mask = downsample_mask(mask, factor) if mask is not None else None
    stats = summarize(image, config.grain.radius, mask)
    posterior = predict_posterior(model, stats)
    estimate = natural_values(posterior, mixture_mode(posterior))
    extra: dict[str, Any] = {'image': str(path), 'stats': stats.as_dict()}
    if args.forward:
        l2, passed = forward_validate(point_estimate(posterior, config.grain), stats, config,
                                      StatReference.from_model(model), _seed(config))
        extra.update(l2=l2, passed=passed)
    out = save_posterior(posterior, args.out, extra)
    write_manifest(manifest_path(out), 'posterior', dump_run_config(config), [out],
                   extra={'model': str(args.model)})
    print(json.dumps({'estimate': estimate, 'posterior': describe(posterior),
                      **{k: v for k, v in extra.items() if k in ('l2', 'passed')}},
                     indent=2, sort_keys=True))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    """Run sim-to-sim recovery and the optional repeatability and sample-size studies."""
    scale = _scale(args, config)
    out = Path(args.out)
    seed = _seed(config)
    if args.model:
        _run(ExperimentSpec(ExperimentKind.SIM2SIM, scale, seed, out,
                            {'model': args.model, 'forward': not args.no_forward}), config)
    if args.repeats is not None:
        _run(ExperimentSpec(ExperimentKind.REPEATABILITY, scale, seed, out), config)
    if args.sizes:
        _run(ExperimentSpec(ExperimentKind.SAMPLE_SIZE, scale, seed, out,
                            {'dataset': args.dataset, 'sizes': args.sizes}), config)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """Sweep observation noise levels."""
    _run(ExperimentSpec(ExperimentKind.NOISE_SWEEP, _scale(args, config), _seed(config),
                        Path(args.out), {'model': args.model, 'blur_sigmas': args.blur,
                                         'pixel_sigmas': args.pixel}), config)
    return EXIT_OK


def cmd_probe(args: argparse.Namespace, config: RunConfig) -> int:
    """Probe how parameter errors propagate into the formation."""
    params = _material(args, config)
    theta = {'mu_s': params.mu_s, 'mu_r': params.mu_r, 'e': params.e}
    deltas = {'mu_s': args.delta_mu_s, 'ln_mu_r': args.delta_ln_mu_r, 'e': args.delta_e}
    scale = _scale(args, config)
    out = Path(args.out)
    _run(ExperimentSpec(ExperimentKind.PROPAGATION, scale, _seed(config), out,
                        {'theta': theta, 'deltas': deltas}), config)
    if args.heights:
        _run(ExperimentSpec(ExperimentKind.GENERALIZATION, scale, _seed(config), out,
                            {'theta': theta, 'model': args.model, 'heights': args.heights}),
             config)
    return EXIT_OK


def cmd_height_demo(args: argparse.Namespace, config: RunConfig) -> int:
    """Train and evaluate funnel-height inference."""
    params = _material(args, config)
    options: dict[str, Any] = {
        'theta': {'mu_s': params.mu_s, 'mu_r': params.mu_r, 'e': params.e},
        'n_train': args.n_train,
        'height_range': [args.low, args.high],
    }
    if args.target:
        options['targets'] = args.target
    _run(ExperimentSpec(ExperimentKind.HEIGHT_DEMO, _scale(args, config), _seed(config),
                        Path(args.out), options), config)
    return EXIT_OK


def _add_material(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--mu-s', type=float, dest='mu_s', help='sliding friction')
    parser.add_argument('--mu-r', type=float, dest='mu_r', help='rolling friction')
    parser.add_argument('--e', type=float, help='restitution')


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser of the `granulab` command."""
    parser = argparse.ArgumentParser(
        prog='granulab', description='Infer granular material parameters from depth images.')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='log more (repeat for debug output)')
    parser.add_argument('--config', help='JSON configuration file')
    parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        dest='overrides', help='override a configuration value')
    parser.add_argument('--seed', type=int, help=f'global seed (default: ${SEED_ENV})')
    parser.add_argument('--workers', type=int, help='simulation worker processes')
    parser.add_argument('--verify', action='append', default=[], metavar='MANIFEST',
                        help='re-check the file digests recorded in a manifest')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')

    experiment = argparse.ArgumentParser(add_help=False)
    experiment.add_argument('--paper-scale', action='store_true',
                            help='2000 grains, 1000 training rows, 50 tests')
    experiment.add_argument('--tests', type=int, help='number of test formations')

    p = sub.add_parser('simulate', help='pour one formation')
    _add_material(p)
    p.add_argument('--grains', type=int, help='number of grains')
    p.add_argument('--out', required=True, help='scene CSV')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('render', help='render a scene as a depth image')
    p.add_argument('--scene', required=True, help='scene CSV')
    p.add_argument('--out', required=True, help='depth image (.depth)')
    p.add_argument('--native', action='store_true', help='skip downsampling')
    p.add_argument('--blur', type=float, help='XY blur sigma in pixels')
    p.add_argument('--pixel-noise', type=float, dest='pixel_noise',
                   help='per-pixel depth noise sigma in metres')
    p.set_defaults(func=cmd_render)

    p = sub.add_parser('gen-dataset', parents=[experiment], help='generate a training dataset')
    p.add_argument('--n', type=int, help='number of rows')
    p.add_argument('--out', required=True, help='dataset CSV')
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser('train', help='train a model on a dataset')
    p.add_argument('--dataset', required=True, help='dataset CSV')
    p.add_argument('--stats', help='comma-separated statistics to train on')
    p.add_argument('--out', required=True, help='model JSON')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('infer', help='infer parameters from a depth image')
    p.add_argument('--image', required=True, help='.depth, 16-bit .png or raw .u16 image')
    p.add_argument('--mask', help='grain mask (.png or .npy)')
    p.add_argument('--model', required=True, help='model JSON')
    p.add_argument('--forward', action='store_true', help='re-simulate the estimate')
    p.add_argument('--out', default='posterior.json', help='posterior JSON')
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser('eval', parents=[experiment], help='sim-to-sim evaluation')
    p.add_argument('--model', help='model JSON')
    p.add_argument('--no-forward', action='store_true', dest='no_forward',
                   help='skip forward re-simulation')
    p.add_argument('--repeats', type=int, help='also repeat one pour this many times')
    p.add_argument('--dataset', help='dataset CSV for the sample-size study')
    p.add_argument('--sizes', type=_int_list, help='training sizes, e.g. 100,500,1000')
    p.add_argument('--out', required=True, help='output directory')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('sweep', parents=[experiment], help='observation noise sweep')
    p.add_argument('--model', required=True, help='model JSON')
    p.add_argument('--blur', type=_float_list, default=[0.0, 2.0, 4.0, 6.0, 8.0])
    p.add_argument('--pixel', type=_float_list, default=[0.0, 0.001, 0.002, 0.003, 0.004])
    p.add_argument('--out', required=True, help='output directory')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('probe', parents=[experiment], help='error propagation probe')
    _add_material(p)
    p.add_argument('--delta-mu-s', type=float, default=0.05, dest='delta_mu_s')
    p.add_argument('--delta-ln-mu-r', type=float, default=3.0, dest='delta_ln_mu_r')
    p.add_argument('--delta-e', type=float, default=0.01, dest='delta_e')
    p.add_argument('--heights', type=_float_list,
                   help='also compare with the configured material poured from these heights')
    p.add_argument('--model', help='model JSON supplying the standardization (with --heights)')
    p.add_argument('--out', required=True, help='output directory')
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser('height-demo', parents=[experiment], help='funnel-height inference')
    _add_material(p)
    p.add_argument('--n-train', type=int, default=150, dest='n_train')
    p.add_argument('--low', type=float, default=0.01, help='lowest tip height in metres')
    p.add_argument('--high', type=float, default=0.13, help='highest tip height in metres')
    p.add_argument('--target', type=_float_list, action='append',
                   help='5th,50th radial percentiles to infer a height for')
    p.add_argument('--out', required=True, help='output directory')
    p.set_defaults(func=cmd_height_demo)
    return parser


def _check_usage(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command is None and not args.verify:
        parser.error('a command or --verify is required')
    if args.config is not None and not Path(args.config).is_file():
        parser.error(f'config file not found: {args.config}')
    if args.workers is not None and args.workers < 1:
        parser.error('--workers must be positive')
    if args.command == 'eval':
        if not (args.model or args.repeats is not None or args.sizes):
            parser.error('eval needs --model, --repeats or --sizes')
        if args.sizes and not args.dataset:
            parser.error('--sizes needs --dataset')
    if args.command == 'probe' and args.heights and not args.model:
        parser.error('--heights needs --model')


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    _check_usage(parser, args)

    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            parser.error(f'{SEED_ENV} must be an integer')
    try:
        for manifest in args.verify:
            checked = verify_manifest(manifest)
            print(f'{manifest}: {len(checked)} files verified')
        if args.command is None:
            return EXIT_OK
        try:
            config = resolve_config(args.config, args.overrides, seed)
        except KeyError as e:
            parser.error(f'unknown configuration key: {e.args[0]}')
        logger.info('resolved config: %s', json.dumps(dump_run_config(config), sort_keys=True))
        return args.func(args, config)
    except GranulabError as e:
        logger.error('%s: %s', type(e).__name__, e)
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error('%s: %s', type(e).__name__, e)
        return EXIT_DATA


if __name__ == '__main__':
    sys.exit(main())
