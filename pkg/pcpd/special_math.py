"""
Modified Bessel function of the second kind in log scale, GIG moments and the
gamma-family helpers used by the updates and the ELBO.

The variational GIG posteriors run with orders around -(sum of dims)/2, where
K_nu underflows or overflows double precision long before the VI is done, so
everything here stays in log scale. ``ln K_nu(x)`` is built from the
exponentially scaled ``scipy.special.kve`` at the fractional base order
``mu = |nu| - floor(|nu|)`` and then carried up the integer ladder with the
ratio recurrence

    r_{m+1} = 1 / r_m + 2 (mu + m + 1) / x,    r_m = K_{mu+m+1}(x) / K_{mu+m}(x),

whose terms are all positive, so no cancellation occurs at any order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError

logger = logging.getLogger(__name__)

VALIDATED_X = (1e-6, 1e4)
VALIDATED_ORDER = 200.0


@dataclass(frozen=True)
class GigParams:
    """GIG(z | a, b, lambda) with density proportional to z^(lambda-1) exp(-(a z + b/z)/2)."""

    a: float
    b: float
    lam: float

    def __post_init__(self):
        if not (np.all(np.asarray(self.a) > 0) and np.all(np.asarray(self.b) > 0)):
            raise DomainError(f'GIG needs a > 0 and b > 0, got a={self.a!r}, b={self.b!r}')


@dataclass(frozen=True)
class GigMoments:
    mean_z: np.ndarray | float
    mean_inv_z: np.ndarray | float
    mean_log_z: np.ndarray | float

    def __iter__(self):
        return iter((self.mean_z, self.mean_inv_z, self.mean_log_z))


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError('Bessel K needs x > 0')
    return x


def _log_k_small_x(nu: float, x: np.ndarray) -> np.ndarray:
    """Leading small-argument term of ln K_nu(x)."""
    if nu == 0:
        return np.log(-np.log(0.5 * x) - np.euler_gamma)
    return special.gammaln(nu) - math.log(2.0) + nu * np.log(2.0 / x)


def _log_k(nu: float, x: np.ndarray) -> np.ndarray:
    with np.errstate(over='ignore', divide='ignore'):
        out = np.log(special.kve(nu, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        # kve overflows only for tiny x
        out[bad] = _log_k_small_x(nu, x[bad])
    if not np.all(np.isfinite(out)):
        raise DomainError(f'ln K of order {nu} is not representable for some x')
    return out


def _log_k_ladder(mu: float, x: np.ndarray, steps: int) -> np.ndarray:
    """ln K_{mu+m}(x) for m = 0..steps, stacked along the first axis."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((steps + 1,) + x.shape)
    out[0] = _log_k(mu, np.atleast_1d(x)).reshape(x.shape)
    if steps == 0:
        return out
    out[1] = _log_k(mu + 1.0, np.atleast_1d(x)).reshape(x.shape)
    with np.errstate(over='ignore'):
        ratio = np.exp(out[1] - out[0])
        for m in range(1, steps):
            ratio = 1.0 / ratio + 2.0 * (mu + m) / x
            out[m + 1] = out[m] + np.log(ratio)
    return out


def _split_order(nu: float):
    order = abs(float(nu))
    steps = int(math.floor(order))
    return order - steps, steps


def _log_bessel_k_scalar_order(nu: float, x: np.ndarray) -> np.ndarray:
    if not math.isfinite(nu):
        raise DomainError(f'Bessel order must be finite, got {nu!r}')
    mu, steps = _split_order(nu)
    return _log_k_ladder(mu, x, steps)[-1]


def log_bessel_k(nu, x):
    """ln K_nu(x) for real order and x > 0; broadcasts over arrays."""
    x = _check_x(x)
    nu_arr = np.asarray(nu, dtype=np.float64)
    if nu_arr.ndim == 0:
        result = _log_bessel_k_scalar_order(float(nu_arr), x)
    else:
        nu_b, x_b = np.broadcast_arrays(nu_arr, x)
        result = np.empty(x_b.shape)
        uniques, inverse = np.unique(nu_b, return_inverse=True)
        inverse = inverse.reshape(x_b.shape)
        for i, order in enumerate(uniques):
            mask = inverse == i
            result[mask] = _log_bessel_k_scalar_order(float(order), x_b[mask])
    if np.any(np.isinf(result)):
        raise DomainError('ln K overflowed the double range')
    return result.item() if result.ndim == 0 else result


def bessel_k_log_ratio(nu, x, shift):
    """ln(K_{nu+shift}(x) / K_nu(x)).

    Integer shifts whose endpoints share a fractional base order are read off
    one ladder; anything else falls back to two evaluations.
    """
    x = _check_x(x)
    nu = float(nu)
    shift = float(shift)
    if shift == 0.0:
        return np.zeros_like(x).item() if x.ndim == 0 else np.zeros_like(x)
    target = nu + shift
    mu_a, steps_a = _split_order(nu)
    mu_b, steps_b = _split_order(target)
    if shift.is_integer() and mu_a == mu_b:
        ladder = _log_k_ladder(mu_a, x, max(steps_a, steps_b))
        result = ladder[steps_b] - ladder[steps_a]
    else:
        result = np.asarray(log_bessel_k(target, x)) - np.asarray(log_bessel_k(nu, x))
    return result.item() if np.ndim(result) == 0 else result


def log_bessel_k_order_derivative(nu, x):
    """d/dnu ln K_nu(x) by central difference with step 1e-5 * max(1, |nu|)."""
    x = _check_x(x)
    nu = float(nu)
    h = 1e-5 * max(1.0, abs(nu))
    upper = np.asarray(log_bessel_k(nu + h, x))
    lower = np.asarray(log_bessel_k(nu - h, x))
    result = (upper - lower) / (2.0 * h)
    return result.item() if result.ndim == 0 else result


def gig_moments(params: GigParams) -> GigMoments:
    """E[z], E[1/z] and E[ln z] under GIG(a, b, lambda); vectorised over a and b.

    The order ``lam`` must be a scalar shared by every entry.
    """
    a = np.asarray(params.a, dtype=np.float64)
    b = np.asarray(params.b, dtype=np.float64)
    lam = float(params.lam)
    x = np.sqrt(a * b)
    log_scale = 0.5 * (np.log(b) - np.log(a))
    mean_z = np.exp(log_scale + bessel_k_log_ratio(lam, x, 1.0))
    mean_inv_z = np.exp(-log_scale + bessel_k_log_ratio(lam, x, -1.0))
    mean_log_z = log_scale + log_bessel_k_order_derivative(lam, x)
    if np.ndim(mean_z) == 0:
        return GigMoments(float(mean_z), float(mean_inv_z), float(mean_log_z))
    return GigMoments(mean_z, mean_inv_z, mean_log_z)


def gig_log_normalizer(params: GigParams):
    """ln of (a/b)^(lambda/2) / (2 K_lambda(sqrt(ab)))."""
    a = np.asarray(params.a, dtype=np.float64)
    b = np.asarray(params.b, dtype=np.float64)
    lam = float(params.lam)
    return 0.5 * lam * (np.log(a) - np.log(b)) - math.log(2.0) - log_bessel_k(lam, np.sqrt(a * b))


def gig_entropy(params: GigParams, moments: GigMoments = None):
    """Differential entropy -E[ln GIG(z)] under the same GIG."""
    moments = moments or gig_moments(params)
    a = np.asarray(params.a, dtype=np.float64)
    b = np.asarray(params.b, dtype=np.float64)
    lam = float(params.lam)
    return -(gig_log_normalizer(params) + (lam - 1.0) * moments.mean_log_z
             - 0.5 * a * moments.mean_z - 0.5 * b * moments.mean_inv_z)


def _check_positive(x, name):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~(x > 0)):
        raise DomainError(f'{name} needs x > 0')
    return x


def digamma(x):
    x = _check_positive(x, 'digamma')
    result = special.digamma(x)
    return result.item() if result.ndim == 0 else result


def log_gamma(x):
    x = _check_positive(x, 'log_gamma')
    result = special.gammaln(x)
    return result.item() if result.ndim == 0 else result


def gamma_entropy(shape, rate):
    """Entropy of gamma(shape, rate): ln G(e) - (e-1) psi(e) - ln f + e."""
    shape = np.asarray(shape, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    return log_gamma(shape) - (shape - 1.0) * digamma(shape) - np.log(rate) + shape


def gamma_mean_log(shape, rate):
    """E[ln x] under gamma(shape, rate)."""
    return digamma(shape) - np.log(rate)
