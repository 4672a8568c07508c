"""Maximum-likelihood fitting of a shifted and scaled chi distribution.

The fitted density is `chi.pdf((r - b) / A; df) / A`. Fits are done on
data divided by its standard deviation, which makes the optimizer's
tolerances independent of the physical scale; `b` and `A` are mapped
back to metres afterwards.
"""
import logging
import math
import warnings

import numpy as np
from scipy import optimize, stats

from granulab.core.models.features import ChiFit

logger = logging.getLogger(__name__)

DF_MIN = 0.5
DF_MAX = 50.0
# Lower clamp of the scale, in metres.
SCALE_MIN = 1e-9
# Fewest points for a non-degenerate fit.
MIN_POINTS = 16


def _df_from_free(s: float) -> float:
    return DF_MIN + (DF_MAX - DF_MIN) / (1.0 + math.exp(-s))


def _free_from_df(df: float) -> float:
    p = (df - DF_MIN) / (DF_MAX - DF_MIN)
    p = min(max(p, 1e-9), 1.0 - 1e-9)
    return math.log(p / (1.0 - p))


def method_of_moments(r: np.ndarray) -> tuple[float, float, float]:
    """Match the sample mean, standard deviation and skewness.

    The degrees of freedom are chosen so that the chi skewness equals the
    sample skewness, clamped to `[DF_MIN, DF_MAX]`; shift and scale then
    follow from the mean and standard deviation. The shift is kept below
    the smallest sample so the likelihood is finite.

    Returns:
        `(df, b, A)`.
    """
    r = np.asarray(r, dtype=np.float64)
    skew = float(stats.skew(r))

    def gap(df: float) -> float:
        return float(stats.chi.stats(df, moments='s')) - skew

    lo, hi = gap(DF_MIN), gap(DF_MAX)
    if lo * hi < 0:
        df = optimize.brentq(gap, DF_MIN, DF_MAX, xtol=1e-6)
    else:
        df = DF_MIN if abs(lo) < abs(hi) else DF_MAX
    mean, var = (float(m) for m in stats.chi.stats(df, moments='mv'))
    scale = max(float(r.std()) / math.sqrt(var), SCALE_MIN)
    shift = float(r.mean()) - scale * mean
    shift = min(shift, float(r.min()) - 1e-3 * scale)
    return float(df), shift, scale


def chi_nll(r: np.ndarray, df: float, b: float, A: float) -> float:
    """Mean negative log-likelihood of `r` under the chi density."""
    return float(-stats.chi.logpdf(r, df, loc=b, scale=A).mean())


def degenerate_fit(r: np.ndarray) -> ChiFit:
    """Return the flagged fit used when `r` has no spread or too few points."""
    r = np.asarray(r, dtype=np.float64)
    return ChiFit(df=1.0, b=float(r.mean()) if len(r) else 0.0, A=SCALE_MIN,
                  nll=float('nan'), degenerate=True)


def fit_chi(r: np.ndarray) -> ChiFit:
    """Fit `(df, b, A)` by maximum likelihood.

    The fit starts at the method-of-moments estimate and is refined with a
    Nelder-Mead simplex over `(logit(df), b, log(A))`. The better of the
    start and the refined point is returned, so the likelihood never gets
    worse than at the start.

    Raises:
        ValueError: If fewer than 16 points are given.

    Examples:
        >>> import warnings
        >>> with warnings.catch_warnings():
        ...     warnings.simplefilter('ignore')
        ...     fit = fit_chi(np.full(20, 0.05))
        >>> fit.degenerate, fit.A
        (True, 1e-09)
    """
    r = np.asarray(r, dtype=np.float64).ravel()
    if len(r) < MIN_POINTS:
        raise ValueError(f'fit_chi needs at least {MIN_POINTS} points, got {len(r)}')
    spread = float(r.std())
    if not spread > 1e-12 * max(1.0, float(np.abs(r).max())):
        warnings.warn('chi fit on data without spread; returning a degenerate fit',
                      RuntimeWarning, stacklevel=2)
        return degenerate_fit(r)

    u = r / spread
    df0, b0, a0 = method_of_moments(u)
    x0 = np.array([_free_from_df(df0), b0, math.log(a0)])

    def objective(x: np.ndarray) -> float:
        value = chi_nll(u, _df_from_free(x[0]), x[1], math.exp(x[2]))
        return value if math.isfinite(value) else 1e300

    start = objective(x0)
    result = optimize.minimize(objective, x0, method='Nelder-Mead',
                               options={'xatol': 1e-8, 'fatol': 1e-12,
                                        'maxiter': 4000, 'maxfev': 8000})
    x = result.x if result.fun <= start else x0
    if not result.success:
        logger.debug('chi fit stopped early: %s', result.message)

    df = _df_from_free(x[0])
    b = float(x[1]) * spread
    scale = max(math.exp(x[2]) * spread, SCALE_MIN)
    return ChiFit(df=df, b=b, A=scale, nll=chi_nll(r, df, b, scale))
