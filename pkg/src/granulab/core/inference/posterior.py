"""Point estimates from posterior mixtures, and posterior files."""
import logging
import math
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from marshmallow import ValidationError
from scipy import optimize

from granulab.core.data.manifest import tool_version
from granulab.core.data.utils.io import read_json, write_json
from granulab.core.errors import SchemaMismatchError
from granulab.core.models.grain import MATERIALS, GrainParams
from granulab.core.models.inference import Posterior
from granulab.core.schemas.artifacts import POSTERIOR_FORMAT, POSTERIOR_VERSION, \
    PosteriorDocumentSchema

logger = logging.getLogger(__name__)

LOG_PREFIX = 'ln_'


def _project(theta: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    return np.clip(theta, bounds[:, 0], bounds[:, 1])


def mixture_mode(posterior: Posterior) -> np.ndarray:
    """Locate the mode of a posterior mixture inside the prior box.

    A Nelder-Mead ascent on the log density starts from the mean of the
    highest-weight component; the result is projected into the box. The
    returned point is never less dense than any (projected) component
    mean.

    Examples:
        >>> p = Posterior([1.0], [[0.3, -2.0]], [[0.01, 0.04]], ['a', 'b'],
        ...               [[0.0, 1.0], [-5.0, 0.0]])
        >>> mixture_mode(p).round(6).tolist()
        [0.3, -2.0]
    """
    bounds = posterior.bounds
    best = int(np.argmax(posterior.weights))
    start = posterior.means[best]
    scale = np.sqrt(posterior.variances[best])

    def objective(u: np.ndarray) -> float:
        value = float(posterior.log_density(start + u * scale))
        return -value if math.isfinite(value) else 1e300

    result = optimize.minimize(objective, np.zeros(posterior.dim), method='Nelder-Mead',
                               options={'xatol': 1e-8, 'fatol': 1e-12, 'maxiter': 2000})
    candidates = [_project(start + result.x * scale, bounds)]
    candidates.extend(_project(m, bounds) for m in posterior.means)
    density = posterior.log_density(np.array(candidates))
    choice = int(np.argmax(density))
    if choice != 0:
        logger.debug('mode ascent fell back to component mean %d', choice - 1)
    return candidates[choice]


def natural_values(posterior: Posterior, theta: np.ndarray) -> dict[str, float]:
    """Complete `theta` with the fixed values and undo log scaling.

    Examples:
        >>> p = Posterior([1.0], [[0.0]], [[1.0]], ['ln_mu_r'], [[-16.0, -2.0]],
        ...               fixed={'mu_s': 0.5})
        >>> natural_values(p, np.array([0.0]))
        {'mu_r': 1.0, 'mu_s': 0.5}
    """
    values = {}
    for name, value in posterior.complete(theta).items():
        if name.startswith(LOG_PREFIX):
            values[name[len(LOG_PREFIX):]] = math.exp(value)
        else:
            values[name] = value
    return values


def point_estimate(posterior: Posterior, base: Optional[GrainParams] = None) -> GrainParams:
    """Return the material parameters at the posterior mode.

    Parameters the posterior does not cover are taken from `base`, which
    defaults to the couscous preset; so are the radius and mass.
    """
    base = base or MATERIALS['couscous']
    values = natural_values(posterior, mixture_mode(posterior))
    return base.replace(**{k: v for k, v in values.items() if k in ('mu_s', 'mu_r', 'e')})


def describe(posterior: Posterior) -> dict[str, Any]:
    """Summarize a posterior for display."""
    return {
        'weights': posterior.weights.tolist(),
        'means': {n: posterior.means[:, i].tolist()
                  for i, n in enumerate(posterior.param_names)},
        'mean': dict(zip(posterior.param_names, posterior.mean().tolist())),
        'std': dict(zip(posterior.param_names, posterior.std().tolist())),
        'mass_in_box': posterior.mass_in_box(),
    }


def save_posterior(posterior: Posterior, fp: Union[str, Path],
                   extra: Optional[dict] = None) -> Path:
    """Write a posterior with its point estimate in natural units."""
    document = {
        'format': POSTERIOR_FORMAT,
        'version': POSTERIOR_VERSION,
        'tool_version': tool_version(),
        'posterior': posterior,
        'estimate': natural_values(posterior, mixture_mode(posterior)),
        'extra': extra or {},
    }
    write_json(fp, PosteriorDocumentSchema().dump(document))
    return Path(fp)


def load_posterior(fp: Union[str, Path]) -> Posterior:
    """Read a posterior written by :func:`save_posterior`.

    Raises:
        SchemaMismatchError: If the document is not a supported posterior.
    """
    try:
        document = PosteriorDocumentSchema().load(read_json(fp))
    except (ValidationError, ValueError) as e:
        raise SchemaMismatchError(f'{fp} is not a valid posterior: {e}') from e
    if document['version'] != POSTERIOR_VERSION:
        raise SchemaMismatchError(f'{fp}: unsupported posterior version {document["version"]}')
    return document['posterior']
