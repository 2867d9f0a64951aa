"""
Reference computations for the test suite: extended-precision integrals
(mpmath), a brute-force one-sweep GH implementation that builds every
Khatri-Rao product and expectation explicitly, and a Monte-Carlo estimate of
the expected residual.
"""
import itertools
import math

import mpmath
import numpy as np

from pcpd.special_math import GigParams, gig_moments

mpmath.mp.dps = 40


def log_bessel_k_integral(nu, x):
    """ln of the integral of exp(-x cosh t) cosh(nu t) over t > 0."""
    nu, x = mpmath.mpf(nu), mpmath.mpf(x)
    # the integrand peaks near sinh t = |nu| / x
    peak = mpmath.asinh(abs(nu) / x)
    points = [0, peak / 2, peak, 2 * peak + 1, mpmath.inf] if peak > 0 else [0, 1, mpmath.inf]
    value = mpmath.quad(lambda t: mpmath.exp(-x * mpmath.cosh(t)) * mpmath.cosh(nu * t), points)
    return float(mpmath.log(value))


def log_bessel_k_mp(nu, x):
    return float(mpmath.log(mpmath.besselk(nu, x)))


def gig_moments_quad(a, b, lam):
    """(E[z], E[1/z], E[ln z]) of GIG(a, b, lam) by quadrature in t = ln z."""
    a, b, lam = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(lam)
    shifted = lam - 1
    mode = (shifted + mpmath.sqrt(shifted ** 2 + a * b)) / a
    t0 = mpmath.log(mode)

    def log_density(t):
        return lam * t - (a * mpmath.exp(t) + b * mpmath.exp(-t)) / 2

    base = log_density(t0)
    width = 1 / mpmath.sqrt((a * mode + b / mode) / 2)
    points = [-mpmath.inf] + [t0 + k * width for k in (-20, -5, 0, 5, 20)] + [mpmath.inf]

    def integral(weight):
        return mpmath.quad(lambda t: weight(t) * mpmath.exp(log_density(t) - base), points)

    norm = integral(lambda t: 1)
    return (float(integral(mpmath.exp) / norm),
            float(integral(lambda t: mpmath.exp(-t)) / norm),
            float(integral(lambda t: t) / norm))


def gig_total_mass(a, b, lam):
    """Integral over z > 0 of the normalised GIG density."""
    from pcpd.priors import gig_logpdf
    p = GigParams(a, b, lam)
    return float(mpmath.quad(lambda z: mpmath.exp(gig_logpdf(float(z), p)), [0, 1, 10, mpmath.inf]))


def _gamma_points(shape, rate):
    mean, sd = shape / rate, mpmath.sqrt(shape) / rate
    inner = sorted({float(p) for p in (mean - 20 * sd, mean - 5 * sd, mean, mean + 5 * sd, mean + 20 * sd)
                    if p > 0})
    return [0] + [mpmath.mpf(p) for p in inner] + [mpmath.inf]


def gamma_entropy_quad(shape, rate):
    shape, rate = mpmath.mpf(shape), mpmath.mpf(rate)
    log_norm = shape * mpmath.log(rate) - mpmath.loggamma(shape)

    def log_pdf(x):
        return log_norm + (shape - 1) * mpmath.log(x) - rate * x

    return float(mpmath.quad(lambda x: -mpmath.exp(log_pdf(x)) * log_pdf(x), _gamma_points(shape, rate)))


def gamma_mean_quad(shape, rate):
    shape, rate = mpmath.mpf(shape), mpmath.mpf(rate)
    log_norm = shape * mpmath.log(rate) - mpmath.loggamma(shape)
    return float(mpmath.quad(lambda x: x * mpmath.exp(log_norm + (shape - 1) * mpmath.log(x) - rate * x),
                             _gamma_points(shape, rate)))


def gig_entropy_quad(a, b, lam):
    """-E[ln p(z)] of GIG(a, b, lam) with the normaliser from mpmath's Bessel K."""
    a, b, lam = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(lam)
    log_norm = lam / 2 * mpmath.log(a / b) - mpmath.log(2 * mpmath.besselk(lam, mpmath.sqrt(a * b)))
    shifted = lam - 1
    t0 = mpmath.log((shifted + mpmath.sqrt(shifted ** 2 + a * b)) / a)

    def log_pdf_z(t):
        return log_norm + (lam - 1) * t - (a * mpmath.exp(t) + b * mpmath.exp(-t)) / 2

    # integrate in t = ln z, so dz = e^t dt
    points = [-mpmath.inf] + [t0 + k for k in (-10, -2, 0, 2, 10)] + [mpmath.inf]
    return float(mpmath.quad(lambda t: -mpmath.exp(log_pdf_z(t) + t) * log_pdf_z(t), points))


def student_t_marginal_quad(v, c0, d0):
    """ln of the integral of N(v | 0, I/g) gamma(g | c0, d0) over g."""
    v = np.asarray(v, dtype=np.float64)
    size, s = v.size, mpmath.mpf(float(np.dot(v, v)))
    c0, d0 = mpmath.mpf(c0), mpmath.mpf(d0)

    def integrand(g):
        log_normal = size / 2 * mpmath.log(g / (2 * mpmath.pi)) - g * s / 2
        log_gamma_pdf = c0 * mpmath.log(d0) - mpmath.loggamma(c0) + (c0 - 1) * mpmath.log(g) - d0 * g
        return mpmath.exp(log_normal + log_gamma_pdf)

    peak = (c0 + mpmath.mpf(size) / 2) / (d0 + s / 2)
    return float(mpmath.log(mpmath.quad(integrand, [0, peak / 10, peak, 10 * peak, mpmath.inf])))


# brute-force reference sweep

def naive_unfold(tensor, mode):
    """Explicit index loop; remaining modes enumerated lowest first."""
    dims = tensor.shape
    rest = [n for n in range(len(dims)) if n != mode]
    out = np.zeros((dims[mode], int(np.prod([dims[n] for n in rest]))))
    for index in itertools.product(*(range(d) for d in dims)):
        column, stride = 0, 1
        for n in rest:
            column += index[n] * stride
            stride *= dims[n]
        out[index[mode], column] = tensor[index]
    return out


def naive_khatri_rao(factors, skip):
    """Column l = kron over the retained factors, highest mode first."""
    kept = [f for n, f in enumerate(factors) if n != skip]
    columns = []
    for l in range(kept[0].shape[1]):
        column = np.ones(1)
        for factor in reversed(kept):
            column = np.kron(column, factor[:, l])
        columns.append(column)
    return np.stack(columns, axis=1)


def naive_expected_kr_gram(means, covs, skip):
    """E[(KR)^T (KR)] summed row by row of the chain from second moments of the entries."""
    rank = means[0].shape[1]
    kept = [n for n in range(len(means)) if n != skip]
    out = np.zeros((rank, rank))
    for index in itertools.product(*(range(means[n].shape[0]) for n in kept)):
        for l, m in itertools.product(range(rank), repeat=2):
            term = 1.0
            for n, i in zip(kept, index):
                term *= means[n][i, l] * means[n][i, m] + covs[n][l, m]
            out[l, m] += term
    return out


def naive_reconstruct(factors):
    dims = tuple(f.shape[0] for f in factors)
    out = np.zeros(dims)
    for index in itertools.product(*(range(d) for d in dims)):
        out[index] = sum(np.prod([f[i, l] for f, i in zip(factors, index)])
                         for l in range(factors[0].shape[1]))
    return out


def naive_expected_residual(y, means, covs):
    """Sum over entries of E[(y_i - sum_l prod_n U_n[i_n, l])^2]."""
    rank = means[0].shape[1]
    total = 0.0
    for index in itertools.product(*(range(d) for d in y.shape)):
        first = sum(np.prod([m[i, l] for m, i in zip(means, index)]) for l in range(rank))
        second = 0.0
        for l, k in itertools.product(range(rank), repeat=2):
            second += np.prod([m[i, l] * m[i, k] + s[l, k] for m, s, i in zip(means, covs, index)])
        total += y[index] ** 2 - 2.0 * y[index] * first + second
    return total


def naive_gh_sweep(y, means, covs, mean_inv_z, beta, noise_eps, a0, b0, lambda0, kappa1, kappa2):
    """One GH sweep with explicit products; returns a dict of every updated quantity."""
    means = [m.copy() for m in means]
    covs = [s.copy() for s in covs]
    for k in range(y.ndim):
        precision = beta * naive_expected_kr_gram(means, covs, k) + np.diag(mean_inv_z)
        cov = np.linalg.inv(precision)
        cov = 0.5 * (cov + cov.T)
        covs[k] = cov
        means[k] = beta * naive_unfold(y, k) @ naive_khatri_rao(means, k) @ cov
    rank = means[0].shape[1]
    b = np.array([
        b0[l] + sum(m[:, l] @ m[:, l] + m.shape[0] * s[l, l] for m, s in zip(means, covs))
        for l in range(rank)
    ])
    a = np.array(a0, dtype=np.float64)
    lam = np.asarray(lambda0, dtype=np.float64) - 0.5 * sum(y.shape)
    mean_z = np.array([gig_moments(GigParams(a[l], b[l], lam[l])).mean_z for l in range(rank)])
    e = noise_eps + 0.5 * y.size
    f = noise_eps + 0.5 * naive_expected_residual(y, means, covs)
    new_a0 = (kappa1 + np.asarray(lambda0) / 2.0 - 1.0) / (kappa2 + mean_z / 2.0)
    return {'means': means, 'covs': covs, 'a': a, 'b': b, 'lam': lam, 'e': e, 'f': f, 'a0': new_a0}


def monte_carlo_residual(y, means, covs, samples, rng, batch=100_000):
    """Sample mean and standard error of ||y - [[U]]||^2 with U_n rows ~ N(M_n row, Sigma_n)."""
    chols = [np.linalg.cholesky(s) for s in covs]
    letters = 'abcdefgh'[:y.ndim]
    spec = ','.join(f's{c}z' for c in letters) + '->s' + letters
    total = total_sq = 0.0
    done = 0
    while done < samples:
        size = min(batch, samples - done)
        draws = [m[None] + rng.standard_normal((size,) + m.shape) @ c.T for m, c in zip(means, chols)]
        recon = np.einsum(spec, *draws, optimize='greedy')
        values = np.sum((y[None] - recon) ** 2, axis=tuple(range(1, y.ndim + 1)))
        total += values.sum()
        total_sq += np.dot(values, values)
        done += size
    mean = total / samples
    var = total_sq / samples - mean * mean
    return mean, math.sqrt(max(var, 0.0) / samples)
