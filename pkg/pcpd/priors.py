"""
Log-densities of the column priors: GIG mixing density, the generalized
hyperbolic (GH) prior on a column group and the Gaussian-gamma marginal.

The GH density is defined by its Gaussian scale mixture

    GH(v | a0, b0, lambda0) = integral of N(v | 0, z I) GIG(z | a0, b0, lambda0) dz,

which :func:`gh_logpdf` evaluates by adaptive quadrature. The Bessel closed
form of the same integral (``gh_logpdf_closed_form``) and the two limiting
families (student-t for a0 -> 0, generalized Laplacian for b0 -> 0) are kept
for cross-checking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import DomainError
from .special_math import GigParams, gig_log_normalizer, log_bessel_k, log_gamma

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class GhHyper:
    """GH hyper-parameters; scalars or one entry per column."""

    a0: np.ndarray | float
    b0: np.ndarray | float
    lambda0: np.ndarray | float

    def __post_init__(self):
        if np.any(~(np.asarray(self.a0) > 0)):
            raise DomainError(f'a0 must be positive, got {self.a0!r}')
        if np.any(~(np.asarray(self.b0) >= 0)):
            raise DomainError(f'b0 must be nonnegative, got {self.b0!r}')

    def select(self, keep) -> 'GhHyper':
        return GhHyper(np.asarray(self.a0)[keep], np.asarray(self.b0)[keep],
                       np.asarray(self.lambda0)[keep])


@dataclass
class GgHyper:
    """Gamma hyper-parameters (shape c0, rate d0) of the column precisions."""

    c0: float
    d0: float

    def __post_init__(self):
        if not (self.c0 > 0 and self.d0 > 0):
            raise DomainError(f'c0 and d0 must be positive, got c0={self.c0!r}, d0={self.d0!r}')


def _sq_norm(v) -> tuple[float, int]:
    v = np.ravel(np.asarray(v, dtype=np.float64))
    if v.size == 0:
        raise DomainError('empty column group')
    return float(np.dot(v, v)), v.size


def gig_logpdf(z, p: GigParams):
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise DomainError('GIG density needs z > 0')
    result = gig_log_normalizer(p) + (p.lam - 1.0) * np.log(z) - 0.5 * (p.a * z + p.b / z)
    return result.item() if np.ndim(result) == 0 else result


def gig_mode(p: GigParams) -> float:
    shifted = p.lam - 1.0
    root = math.sqrt(shifted * shifted + p.a * p.b)
    if shifted >= 0:
        return (shifted + root) / p.a
    return p.b / (root - shifted)


def _log_mixture_peak(order, a, big_b):
    """Maximiser t* of order*t - (a e^t + B e^-t)/2 and the curvature there."""
    root = math.sqrt(order * order + a * big_b)
    peak = (order + root) / a if order >= 0 else big_b / (root - order)
    t_star = math.log(peak)
    curvature = 0.5 * (a * peak + big_b / peak)
    return t_star, curvature


def gh_logpdf(v, h: GhHyper) -> float:
    """Log GH density of one column group by quadrature of the scale mixture."""
    s, size = _sq_norm(v)
    a, b, lam = float(h.a0), float(h.b0), float(h.lambda0)
    if b <= 0:
        raise DomainError('the quadrature route needs b0 > 0; use gh_laplace_limit_logpdf for b0 -> 0')
    order = lam - 0.5 * size
    big_b = b + s
    t_star, curvature = _log_mixture_peak(order, a, big_b)
    sigma = 1.0 / math.sqrt(curvature)
    e_star = math.exp(t_star)

    def shifted(u):
        t = t_star + sigma * u
        with np.errstate(over='ignore'):
            log_val = (order * sigma * u
                       - 0.5 * (a * (np.exp(t) - e_star) + big_b * (np.exp(-t) - 1.0 / e_star)))
            return float(np.exp(log_val))

    left, _ = integrate.quad(shifted, -np.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=200)
    right, _ = integrate.quad(shifted, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    log_peak = order * t_star - 0.5 * (a * e_star + big_b / e_star)
    normalizer = gig_log_normalizer(GigParams(a, b, lam))
    return (-0.5 * size * LOG_2PI + normalizer + log_peak
            + math.log(sigma) + math.log(left + right))


def gh_logpdf_closed_form(v, h: GhHyper) -> float:
    """Bessel closed form of the scale mixture; the (b0 + |v|^2) term carries exponent order/2."""
    s, size = _sq_norm(v)
    a, b, lam = float(h.a0), float(h.b0), float(h.lambda0)
    if b <= 0:
        raise DomainError('closed form needs b0 > 0')
    order = lam - 0.5 * size
    big_b = b + s
    return (-0.5 * size * LOG_2PI
            + 0.5 * lam * (math.log(a) - math.log(b)) - log_bessel_k(lam, math.sqrt(a * b))
            + log_bessel_k(order, math.sqrt(a * big_b))
            + 0.5 * order * (math.log(big_b) - math.log(a)))


def gh_student_t_limit_logpdf(v, b0: float, lambda0: float) -> float:
    """GH density in the a0 -> 0 limit (lambda0 < 0): a multivariate student-t."""
    if not (lambda0 < 0 and b0 > 0):
        raise DomainError('student-t limit needs lambda0 < 0 and b0 > 0')
    s, size = _sq_norm(v)
    half = 0.5 * size
    return (-half * math.log(math.pi) + log_gamma(half - lambda0) - log_gamma(-lambda0)
            - lambda0 * math.log(b0) + (lambda0 - half) * math.log(b0 + s))


def gh_laplace_limit_logpdf(v, a0: float, lambda0: float) -> float:
    """GH density in the b0 -> 0 limit (lambda0 > 0): a generalized Laplacian.

    For lambda0 = (Z + 1)/2 it is proportional to exp(-sqrt(a0) |v|).
    """
    if not (lambda0 > 0 and a0 > 0):
        raise DomainError('Laplacian limit needs lambda0 > 0 and a0 > 0')
    s, size = _sq_norm(v)
    order = lambda0 - 0.5 * size
    head = -0.5 * size * LOG_2PI + lambda0 * math.log(0.5 * a0) - log_gamma(lambda0) + math.log(2.0)
    if s == 0.0:
        if order <= 0:
            return math.inf
        # (s/a)^(c/2) K_c(sqrt(a s)) -> Gamma(c) 2^(c-1) a^(-c)
        return head + log_gamma(order) + (order - 1.0) * math.log(2.0) - order * math.log(a0)
    return head + 0.5 * order * (math.log(s) - math.log(a0)) + log_bessel_k(order, math.sqrt(a0 * s))


def student_t_marginal_logpdf(v, h: GgHyper) -> float:
    """Gaussian-gamma marginal of a column group (gamma precision integrated out)."""
    s, size = _sq_norm(v)
    half = 0.5 * size
    return (-half * math.log(math.pi) + log_gamma(h.c0 + half) - log_gamma(h.c0)
            + h.c0 * math.log(2.0 * h.d0) - (h.c0 + half) * math.log(2.0 * h.d0 + s))
