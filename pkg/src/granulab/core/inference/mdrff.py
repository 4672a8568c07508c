"""Mixture-density regression over random Fourier features.

The model maps standardized summary statistics through a fixed random
feature map and a learned affine readout to the parameters of a diagonal
Gaussian mixture over the (standardized) inference-space parameters.
Only the readout is trained, by full-batch Adam on the mean negative
log-likelihood.
"""
import copy
import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F
from marshmallow import ValidationError
from scipy.special import log_softmax

from granulab.core.data.manifest import tool_version
from granulab.core.data.utils.io import read_json, write_json
from granulab.core.errors import ConfigError, SchemaMismatchError, TrainingError
from granulab.core.inference.rff import median_lengthscales, rff_features, sample_rff
from granulab.core.models.features import STAT_NAMES, SummaryStats
from granulab.core.models.inference import STD_FLOOR, MdrffModel, Posterior, Prior, \
    RffSettings, TrainingSchedule, TrainingSet
from granulab.core.schemas.artifacts import MODEL_FORMAT, MODEL_VERSION, MdrffModelSchema

logger = logging.getLogger(__name__)

# Log-scales are clamped to this range before exponentiation.
LOG_SCALE_RANGE = (-10.0, 5.0)
# Training stops once rejected steps have shrunk the step size this much.
MIN_LR_FRACTION = 1e-6


def _split_outputs(outputs: torch.Tensor, k: int, p: int) \
        -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Split readout outputs into logits `(N, K)`, means and log-scales `(N, K, P)`."""
    logits = outputs[:, :k]
    means = outputs[:, k:k + k * p].reshape(-1, k, p)
    log_scales = outputs[:, k + k * p:].reshape(-1, k, p).clamp(*LOG_SCALE_RANGE)
    return logits, means, log_scales


def mixture_nll(outputs: torch.Tensor, y: torch.Tensor, k: int) -> torch.Tensor:
    """Mean negative log-likelihood of targets `y` under the readout mixtures."""
    p = y.shape[1]
    logits, means, log_scales = _split_outputs(outputs, k, p)
    log_pi = F.log_softmax(logits, dim=-1)
    z = (y.unsqueeze(1) - means) / log_scales.exp()
    log_comp = (-0.5 * z ** 2 - log_scales - 0.5 * math.log(2 * math.pi)).sum(dim=-1)
    return -torch.logsumexp(log_pi + log_comp, dim=-1).mean()


def _fixed_columns(dataset: TrainingSet, prior: Optional[Prior]) -> list[bool]:
    if prior is not None and prior.theta_names == dataset.param_names:
        return [r.is_fixed for r in prior.ranges]
    return [bool(np.ptp(dataset.theta[:, j]) == 0) for j in range(dataset.theta.shape[1])]


def train(dataset: TrainingSet, settings: RffSettings = RffSettings(),
          schedule: TrainingSchedule = TrainingSchedule(),
          prior: Optional[Prior] = None) -> MdrffModel:
    """Fit a mixture-density model to a training set.

    Statistics are standardized by the training mean and std, lengthscales
    are set by the median heuristic and the targets are standardized per
    parameter. Parameters with zero-width prior ranges (or no spread in the
    data when no prior is given) are excluded from the target and recorded
    as fixed.

    Each epoch takes one Adam step. A step that increases the loss is
    undone and the step size halved; accepted steps let it grow back
    towards its initial value. Training stops when the loss improves by
    less than `schedule.plateau_tol` (relative) over `plateau_window`
    accepted epochs, or when the epoch budget is spent.

    Args:
        dataset: The training pairs.
        settings: The feature map settings.
        schedule: The mixture size and optimizer settings.
        prior: The prior the parameters were drawn from. Supplies the box
            used for point estimates; defaults to the data range.

    Raises:
        ConfigError: If there are more components than rows or every
            parameter is fixed.
        TrainingError: If the loss becomes non-finite.
    """
    k = schedule.n_components
    if k > len(dataset):
        raise ConfigError(f'{k} mixture components need at least {k} rows, '
                          f'got {len(dataset)}')
    fixed_mask = _fixed_columns(dataset, prior)
    free = [j for j, f in enumerate(fixed_mask) if not f]
    if not free:
        raise ConfigError('every parameter is fixed; there is nothing to infer')
    fixed = {dataset.param_names[j]: float(dataset.theta[0, j])
             for j, f in enumerate(fixed_mask) if f}
    param_names = [dataset.param_names[j] for j in free]
    if prior is not None and prior.theta_names == dataset.param_names:
        bounds = prior.bounds[free]
    else:
        bounds = np.stack([dataset.theta[:, free].min(axis=0),
                           dataset.theta[:, free].max(axis=0)], axis=1)

    stat_mean, stat_std = dataset.stat_mean, dataset.stat_std
    x = (dataset.stats - stat_mean) / stat_std
    rff = sample_rff(x.shape[1], settings,
                     median_lengthscales(x, settings.lengthscale_factor))
    features = torch.from_numpy(rff_features(x, rff))

    theta = dataset.theta[:, free]
    theta_mean = theta.mean(axis=0)
    theta_std = np.maximum(theta.std(axis=0), STD_FLOOR)
    y = torch.from_numpy((theta - theta_mean) / theta_std)

    p = len(free)
    outputs = k * (1 + 2 * p)
    generator = torch.Generator().manual_seed(schedule.seed)
    weight = (torch.randn(rff.n_features, outputs, generator=generator, dtype=torch.float64)
              * 0.01).requires_grad_()
    bias = torch.zeros(outputs, dtype=torch.float64)
    # Spread the initial component means so components can specialize.
    bias[k:k + k * p] = torch.randn(k * p, generator=generator, dtype=torch.float64)
    bias.requires_grad_()
    optimizer = torch.optim.Adam([weight, bias], lr=schedule.learning_rate,
                                 weight_decay=schedule.weight_decay)

    def closure() -> float:
        optimizer.zero_grad()
        loss = mixture_nll(features @ weight + bias, y, k)
        loss.backward()
        return float(loss.detach())

    loss = closure()
    if not math.isfinite(loss):
        raise TrainingError('initial loss is not finite', {'epoch': 0, 'loss': str(loss)})
    history = [loss]
    lr = schedule.learning_rate
    rejected = 0
    stopped = 'budget'
    epoch = 0
    for epoch in range(1, schedule.epochs + 1):
        saved = (weight.detach().clone(), bias.detach().clone(),
                 copy.deepcopy(optimizer.state_dict()))
        optimizer.step()
        new_loss = closure()
        if not math.isfinite(new_loss):
            raise TrainingError(f'loss became non-finite at epoch {epoch}', {
                'epoch': epoch, 'last_finite_loss': loss, 'learning_rate': lr,
                'max_abs_weight': float(saved[0].abs().max())})
        if new_loss > loss:
            rejected += 1
            with torch.no_grad():
                weight.copy_(saved[0])
                bias.copy_(saved[1])
            optimizer.load_state_dict(saved[2])
            lr *= 0.5
            if lr < MIN_LR_FRACTION * schedule.learning_rate:
                stopped = 'step_size'
                closure()
                break
            for group in optimizer.param_groups:
                group['lr'] = lr
            closure()
            continue
        loss = new_loss
        history.append(loss)
        if lr < schedule.learning_rate:
            lr = min(lr * 1.1, schedule.learning_rate)
            for group in optimizer.param_groups:
                group['lr'] = lr
        window = schedule.plateau_window
        if len(history) > window:
            before = history[-window - 1]
            if (before - loss) / max(abs(before), 1e-12) < schedule.plateau_tol:
                stopped = 'plateau'
                break
    logger.info('training stopped (%s) after %d epochs: loss %.6g, %d rejected steps',
                stopped, epoch, loss, rejected)

    provenance = dict(dataset.provenance)
    provenance['rows'] = len(dataset)
    provenance['stat_min'] = dataset.stats.min(axis=0).tolist()
    provenance['stat_max'] = dataset.stats.max(axis=0).tolist()
    return MdrffModel(
        rff=rff, n_components=k,
        weight=weight.detach().numpy().copy(), bias=bias.detach().numpy().copy(),
        stat_names=list(dataset.stat_names), stat_mean=stat_mean, stat_std=stat_std,
        param_names=param_names, theta_mean=theta_mean, theta_std=theta_std,
        bounds=bounds, fixed=fixed,
        diagnostics={'final_loss': loss, 'epochs': epoch, 'accepted_steps': len(history) - 1,
                     'rejected_steps': rejected, 'stopped': stopped},
        provenance=provenance,
    )


def _statistic_vector(model: MdrffModel,
                      stats: Union[SummaryStats, np.ndarray, Sequence[float]]) -> np.ndarray:
    """Return the statistics the model was trained on, selecting from a full vector."""
    if isinstance(stats, SummaryStats):
        stats = stats.as_array()
    x = np.asarray(stats, dtype=np.float64)
    if x.shape[-1] == model.stat_dim:
        return x
    if x.shape[-1] == len(STAT_NAMES) and all(n in STAT_NAMES for n in model.stat_names):
        return x[..., [STAT_NAMES.index(n) for n in model.stat_names]]
    raise SchemaMismatchError(
        f'model expects {model.stat_dim} statistics, got {x.shape[-1]}')


def predict_posterior(model: MdrffModel,
                      stats: Union[SummaryStats, np.ndarray, Sequence[float]]) -> Posterior:
    """Evaluate the posterior mixture for one statistic vector.

    Component means are mapped back to inference-space units and clipped
    into the prior box.

    Args:
        model: A trained model.
        stats: The observed statistics: either exactly the model's inputs
            or a full statistic vector, from which the inputs are selected
            by name.

    Raises:
        SchemaMismatchError: If the vector length fits neither form.
    """
    x = _statistic_vector(model, stats).ravel()
    features = rff_features((x - model.stat_mean) / model.stat_std, model.rff)
    out = features @ model.weight + model.bias
    k, p = model.n_components, len(model.param_names)
    weights = np.exp(log_softmax(out[:k]))
    means = out[k:k + k * p].reshape(k, p) * model.theta_std + model.theta_mean
    log_scales = np.clip(out[k + k * p:].reshape(k, p), *LOG_SCALE_RANGE)
    variances = (np.exp(log_scales) * model.theta_std) ** 2
    means = np.clip(means, model.bounds[:, 0], model.bounds[:, 1])
    return Posterior(weights / weights.sum(), means, variances,
                     list(model.param_names), model.bounds, dict(model.fixed))


def save_model(model: MdrffModel, fp: Union[str, Path]) -> Path:
    """Write a model as a versioned JSON document."""
    document = MdrffModelSchema().dump(model)
    document.update(format=MODEL_FORMAT, version=MODEL_VERSION, tool_version=tool_version())
    write_json(fp, document)
    return Path(fp)


def load_model(fp: Union[str, Path], stat_dim: Optional[int] = None) -> MdrffModel:
    """Read a model written by :func:`save_model`.

    Args:
        fp: The model file.
        stat_dim: When given, the statistic-vector length the caller will
            supply.

    Raises:
        SchemaMismatchError: If the document is not a model of a supported
            version, or its input length differs from `stat_dim`.
    """
    document = read_json(fp)
    version = document.get('version') if isinstance(document, dict) else None
    if version != MODEL_VERSION:
        raise SchemaMismatchError(f'{fp}: unsupported model version {version!r}')
    try:
        model = MdrffModelSchema().load(document)
    except (ValidationError, ConfigError) as e:
        raise SchemaMismatchError(f'{fp} is not a valid model: {e}') from e
    if stat_dim is not None and model.stat_dim != stat_dim:
        raise SchemaMismatchError(
            f'{fp} expects {model.stat_dim} statistics, got {stat_dim}')
    return model


def is_extrapolation(model: MdrffModel,
                     stats: Union[SummaryStats, np.ndarray, Sequence[float]]) -> bool:
    """Whether a statistic vector lies outside the range seen in training.

    Models without a recorded range never report extrapolation.
    """
    low, high = model.provenance.get('stat_min'), model.provenance.get('stat_max')
    if low is None or high is None:
        return False
    x = _statistic_vector(model, stats).ravel()
    return bool((x < np.asarray(low)).any() or (x > np.asarray(high)).any())
