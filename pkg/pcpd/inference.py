"""
Machinery shared by the GH and GG engines.

Both engines place a zero-mean Gaussian prior on every column of every factor
and differ only in how that column precision is modelled (E[1/z_l] under the
GH prior, E[gamma_l] under the GG prior). Everything that only needs the
precision diagonal lives here: the matrix-normal factor update, the noise
update, pruning, the ELBO terms of the likelihood and the factors, and the
outer fit loop.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import linalg

from .conf import pcpd_settings
from .exceptions import ConfigurationError, NumericalError
from .special_math import gamma_entropy, gamma_mean_log, log_gamma
from .tensor_core import (KruskalModel, as_dense_tensor, frob_norm_sq, hadamard_gram_excluding,
                          mttkrp, reconstruct, unfold)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def _setting(name):
    return field(default_factory=lambda: getattr(pcpd_settings, name))


@dataclass
class FitOptions:
    """Knobs of one fit.

    ``rank_bound`` wins over ``rank_bound_factor`` when both are given; the
    factor resolves to ``ceil(factor * max(dims))``.
    """

    rank_bound: Optional[int] = None
    rank_bound_factor: float = 1.0
    max_iters: int = _setting('MAX_ITERS')
    tol: float = _setting('TOL')
    prune_rel_threshold: float = _setting('PRUNE_THRESHOLD')
    prune: bool = True
    noise_update_period: int = _setting('NOISE_UPDATE_PERIOD')
    fixed_beta: Optional[float] = None
    seed: int = 0
    compute_elbo: bool = False
    epsilon: float = _setting('EPSILON')
    lambda0: Optional[float] = None

    def __post_init__(self):
        if self.rank_bound is not None and self.rank_bound < 2:
            raise ConfigurationError(f'rank_bound must be at least 2, got {self.rank_bound}')
        if not self.rank_bound_factor > 0:
            raise ConfigurationError(f'rank_bound_factor must be positive, got {self.rank_bound_factor}')
        if self.max_iters < 1:
            raise ConfigurationError(f'max_iters must be at least 1, got {self.max_iters}')
        if not self.tol > 0:
            raise ConfigurationError(f'tol must be positive, got {self.tol}')
        if not 0 < self.prune_rel_threshold < 1:
            raise ConfigurationError(
                f'prune_rel_threshold must lie in (0, 1), got {self.prune_rel_threshold}')
        if self.noise_update_period < 1:
            raise ConfigurationError(
                f'noise_update_period must be at least 1, got {self.noise_update_period}')
        if self.fixed_beta is not None and not self.fixed_beta > 0:
            raise ConfigurationError(f'fixed_beta must be positive, got {self.fixed_beta}')
        if not self.epsilon > 0:
            raise ConfigurationError(f'epsilon must be positive, got {self.epsilon}')

    def resolve_rank_bound(self, dims) -> int:
        if self.rank_bound is not None:
            return int(self.rank_bound)
        bound = int(math.ceil(self.rank_bound_factor * max(dims)))
        if bound < 2:
            raise ConfigurationError(
                f'rank bound {bound} from factor {self.rank_bound_factor} is below 2')
        return bound


@dataclass
class NoisePosterior:
    """Q(beta) = gamma(e, f), or a point mass when ``fixed`` is set."""

    e: float
    f: float
    epsilon: float
    fixed: Optional[float] = None

    @property
    def mean(self) -> float:
        return self.fixed if self.fixed is not None else self.e / self.f

    @property
    def mean_log(self) -> float:
        if self.fixed is not None:
            return math.log(self.fixed)
        return float(gamma_mean_log(self.e, self.f))


@dataclass
class CpdState:
    """Matrix-normal factor posteriors plus the noise posterior.

    Subclasses add the column prior and implement :meth:`prior_precision`
    and :meth:`_select_prior`.
    """

    factor_means: List[np.ndarray]
    factor_covs: List[np.ndarray]
    noise: NoisePosterior
    iteration: int = 0
    elbo_trace: List[float] = field(default_factory=list)

    @property
    def dims(self) -> tuple:
        return tuple(m.shape[0] for m in self.factor_means)

    @property
    def rank(self) -> int:
        return self.factor_means[0].shape[1]

    @property
    def model(self) -> KruskalModel:
        return KruskalModel(list(self.factor_means))

    def prior_precision(self) -> np.ndarray:
        raise NotImplementedError

    def _select_prior(self, keep: np.ndarray):
        raise NotImplementedError

    def select_columns(self, keep):
        """Keep only the columns indexed by ``keep`` in every per-column quantity."""
        keep = np.asarray(keep)
        self.factor_means = [m[:, keep] for m in self.factor_means]
        self.factor_covs = [s[np.ix_(keep, keep)] for s in self.factor_covs]
        self._select_prior(keep)


def init_factor_means(y: np.ndarray, rank_bound: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Truncated-SVD means U S^(1/2) per mode, padded with N(0, 1) columns."""
    means = []
    for mode, size in enumerate(y.shape):
        u, s, _ = np.linalg.svd(unfold(y, mode), full_matrices=False)
        used = min(rank_bound, s.size)
        mean = u[:, :used] * np.sqrt(s[:used])
        if used < rank_bound:
            mean = np.hstack([mean, rng.standard_normal((size, rank_bound - used))])
        means.append(mean)
    return means


def init_common(y: np.ndarray, opts: FitOptions, rank_bound: int):
    """Factor means, identity covariances and the vague noise posterior."""
    if rank_bound < 1:
        raise ConfigurationError(f'rank bound must be at least 1, got {rank_bound}')
    total = int(np.prod(y.shape))
    for mode, size in enumerate(y.shape):
        if rank_bound > total // size:
            logger.warning('rank bound %d exceeds the %d columns of the mode-%d unfolding',
                           rank_bound, total // size, mode)
    rng = np.random.default_rng(opts.seed)
    means = init_factor_means(y, rank_bound, rng)
    covs = [np.eye(rank_bound) for _ in y.shape]
    noise = NoisePosterior(e=opts.epsilon, f=opts.epsilon, epsilon=opts.epsilon, fixed=opts.fixed_beta)
    return means, covs, noise


def mode_grams(state: CpdState) -> List[np.ndarray]:
    """E[U^(n)T U^(n)] = M^T M + J_n Sigma for every mode."""
    return [m.T @ m + m.shape[0] * s for m, s in zip(state.factor_means, state.factor_covs)]


def column_sq_magnitudes(state: CpdState) -> np.ndarray:
    """E||U^(n)_{:,l}||^2 summed over modes, posterior covariance included."""
    total = np.zeros(state.rank)
    for m, s in zip(state.factor_means, state.factor_covs):
        total += np.einsum('jl,jl->l', m, m) + m.shape[0] * np.diag(s)
    return total


def column_magnitudes(state: CpdState) -> np.ndarray:
    """Posterior-mean column magnitudes (sum over modes of ||M^(n)_{:,l}||^2)^(1/2).

    The covariance term is left out: once a column's means have collapsed,
    J_n Sigma_ll is the same for every dead column and would keep them alive.
    """
    total = np.zeros(state.rank)
    for m in state.factor_means:
        total += np.einsum('jl,jl->l', m, m)
    return np.sqrt(total)


def component_norms(state: CpdState) -> np.ndarray:
    """||M^(1)_{:,l} o ... o M^(N)_{:,l}||_F, the norm of each rank-1 term."""
    norms = np.ones(state.rank)
    for m in state.factor_means:
        norms *= np.sqrt(np.einsum('jl,jl->l', m, m))
    return norms


def update_factor(state: CpdState, y: np.ndarray, k: int) -> CpdState:
    """Matrix-normal update of mode ``k`` from the current values of every other mode."""
    beta = state.noise.mean
    grams = mode_grams(state)
    precision = beta * hadamard_gram_excluding(grams, k) + np.diag(state.prior_precision())
    try:
        chol = linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f'precision of mode {k} is not positive definite',
            diagnostics={'mode': k, 'beta': beta,
                         'min_diag': float(np.min(np.diag(precision)))},
        ) from exc
    cov = linalg.cho_solve(chol, np.eye(state.rank))
    cov = 0.5 * (cov + cov.T)
    if pcpd_settings.CHECK_SPD:
        smallest = float(np.linalg.eigvalsh(cov)[0])
        if smallest <= 0:
            raise NumericalError(f'covariance of mode {k} lost definiteness',
                                 diagnostics={'mode': k, 'min_eig': smallest})
    state.factor_covs[k] = cov
    state.factor_means[k] = beta * mttkrp(y, state.factor_means, k) @ cov
    return state


def expected_residual(state: CpdState, y: np.ndarray) -> float:
    """E||y - [[U]]||^2 under the factor posteriors."""
    grams = mode_grams(state)
    cross = float(np.sum(state.factor_means[0] * mttkrp(y, state.factor_means, 0)))
    return frob_norm_sq(y) + float(np.sum(hadamard_gram_excluding(grams))) - 2.0 * cross


def update_noise(state: CpdState, y: np.ndarray) -> CpdState:
    noise = state.noise
    if noise.fixed is not None:
        return state
    residual = expected_residual(state, y)
    e = noise.epsilon + 0.5 * y.size
    f = noise.epsilon + 0.5 * residual
    if not f > 0:
        raise NumericalError('noise rate is not positive',
                             diagnostics={'f': f, 'residual': residual})
    noise.e, noise.f = e, f
    return state


def prune(state: CpdState, threshold: float, data_norm: Optional[float] = None) -> int:
    """Drop negligible columns; returns how many went.

    A column goes when its magnitude is below ``threshold`` times the largest
    one or, given ``data_norm`` = ||y||_F, when its rank-1 term is below
    ``threshold * data_norm``. The largest column always survives.
    """
    magnitudes = column_magnitudes(state)
    alive = magnitudes >= threshold * magnitudes.max()
    if data_norm is not None:
        alive &= component_norms(state) >= threshold * data_norm
    alive[np.argmax(magnitudes)] = True
    keep = np.flatnonzero(alive)
    removed = state.rank - keep.size
    if removed:
        state.select_columns(keep)
    return removed


def likelihood_elbo(state: CpdState, y: np.ndarray) -> float:
    """E[ln p(y | U, beta)] plus, for a learned beta, its prior and entropy."""
    noise = state.noise
    mean_log = noise.mean_log
    total = 0.5 * y.size * (mean_log - LOG_2PI) - 0.5 * noise.mean * expected_residual(state, y)
    if noise.fixed is None:
        eps = noise.epsilon
        total += (eps * math.log(eps) - log_gamma(eps) + (eps - 1.0) * mean_log - eps * noise.mean)
        total += float(gamma_entropy(noise.e, noise.f))
    return total


def factor_elbo(state: CpdState, mean_precision: np.ndarray, mean_log_precision: np.ndarray) -> float:
    """E[ln p(U | precision)] + H[Q(U)] summed over modes."""
    total = 0.0
    rank = state.rank
    for m, s in zip(state.factor_means, state.factor_covs):
        size = m.shape[0]
        sq = np.einsum('jl,jl->l', m, m) + size * np.diag(s)
        total += (-0.5 * size * rank * LOG_2PI + 0.5 * size * np.sum(mean_log_precision)
                  - 0.5 * np.dot(mean_precision, sq))
        _, logdet = np.linalg.slogdet(s)
        total += 0.5 * size * logdet + 0.5 * size * rank * (1.0 + LOG_2PI)
    return float(total)


@dataclass
class FitReport:
    algorithm: str
    estimated_rank: int
    model: KruskalModel
    z_powers: np.ndarray
    elbo_trace: List[float]
    rank_trace: List[int]
    prune_iterations: List[int]
    iterations_run: int
    converged: bool
    wall_time_seconds: float
    noise_precision: float
    component_magnitudes: np.ndarray

    @property
    def reconstruction(self) -> np.ndarray:
        return reconstruct(self.model)


def _relative_change(current: np.ndarray, previous: np.ndarray) -> float:
    scale = math.sqrt(frob_norm_sq(previous))
    diff = math.sqrt(frob_norm_sq(current - previous))
    if scale > 0:
        return diff / scale
    # collapsed reconstruction: settled only if it stays at zero
    return 0.0 if diff == 0 else math.inf


def run_fit(state: CpdState, y: np.ndarray, opts: FitOptions, *, algorithm: str,
            update_prior: Callable, update_hyper: Callable, elbo: Callable,
            z_powers: Callable) -> FitReport:
    """Coordinate-ascent sweeps until the reconstruction settles or ``max_iters`` runs out.

    One sweep: factors in mode order, column prior, noise (every
    ``noise_update_period`` sweeps), hyper-parameters, pruning, ELBO and the
    convergence check. A sweep that pruned anything never counts as converged.
    With pruning on, the column magnitudes must also have settled (largest
    change below ``tol`` times the largest magnitude), so a column still
    shrinking towards the prune threshold keeps the fit going.
    """
    y = as_dense_tensor(y)
    started = time.perf_counter()
    data_norm = math.sqrt(frob_norm_sq(y))
    rank_trace, prune_iterations = [], []
    previous = reconstruct(state.factor_means)
    previous_magnitudes = column_magnitudes(state)
    converged = False
    for iteration in range(1, opts.max_iters + 1):
        state.iteration = iteration
        try:
            for k in range(y.ndim):
                update_factor(state, y, k)
            update_prior(state)
            if iteration % opts.noise_update_period == 0:
                update_noise(state, y)
            update_hyper(state)
            removed = prune(state, opts.prune_rel_threshold, data_norm) if opts.prune else 0
            if removed:
                prune_iterations.append(iteration)
                logger.info('%s sweep %d pruned %d columns, rank now %d',
                            algorithm, iteration, removed, state.rank)
            if opts.compute_elbo:
                state.elbo_trace.append(elbo(state, y))
        except NumericalError as exc:
            exc.iteration = iteration
            raise
        rank_trace.append(state.rank)
        current = reconstruct(state.factor_means)
        change = _relative_change(current, previous)
        previous = current
        magnitudes = column_magnitudes(state)
        settled = True
        if opts.prune and not removed:
            top = magnitudes.max()
            drift = float(np.max(np.abs(magnitudes - previous_magnitudes)))
            settled = drift <= opts.tol * top if top > 0 else True
        previous_magnitudes = magnitudes
        logger.debug('%s sweep %d: rank %d, change %.3e, beta %.4g%s', algorithm, iteration,
                     state.rank, change, state.noise.mean,
                     f', elbo {state.elbo_trace[-1]:.6f}' if opts.compute_elbo else '')
        if not removed and settled and change < opts.tol:
            converged = True
            break
    if converged:
        logger.info('%s converged after %d sweeps at rank %d', algorithm, state.iteration, state.rank)
    else:
        logger.warning('%s stopped at max_iters=%d without converging (rank %d)',
                       algorithm, opts.max_iters, state.rank)
    return FitReport(
        algorithm=algorithm,
        estimated_rank=state.rank,
        model=state.model,
        z_powers=np.asarray(z_powers(state), dtype=np.float64),
        elbo_trace=list(state.elbo_trace),
        rank_trace=rank_trace,
        prune_iterations=prune_iterations,
        iterations_run=state.iteration,
        converged=converged,
        wall_time_seconds=time.perf_counter() - started,
        noise_precision=float(state.noise.mean),
        component_magnitudes=column_magnitudes(state),
    )
