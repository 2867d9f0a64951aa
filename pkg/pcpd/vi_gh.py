"""
PCPD-GH: tensor CPD with a generalized hyperbolic prior on every column group.

Column l of every factor shares a GIG-distributed variance z_l. The
variational posterior of z_l is again GIG with a fixed order, so the engine
only has to carry (a_l, b_l) and the three moments E[z_l], E[1/z_l] and
E[ln z_l]. The prior rate a_l^0 is itself learned under a gamma hyper-prior.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .inference import (CpdState, FitOptions, FitReport, column_sq_magnitudes, factor_elbo,
                        init_common, likelihood_elbo, prune, run_fit, update_factor, update_noise)
from .priors import GhHyper
from .special_math import GigMoments, GigParams, gig_entropy, gig_log_normalizer, gig_moments
from .tensor_core import as_dense_tensor

logger = logging.getLogger(__name__)

__all__ = ['ColumnScalePosterior', 'GhState', 'init', 'update_factor', 'update_scales',
           'update_noise', 'update_hyper_a0', 'prune', 'elbo', 'fit']

B_FLOOR = 1e-12
KAPPA_A2 = 1e-6


@dataclass
class ColumnScalePosterior:
    """Q(z_l) = GIG(a_l, b_l, lam_l) for every surviving column, with cached moments."""

    a: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    mean_z: np.ndarray
    mean_inv_z: np.ndarray
    mean_log_z: np.ndarray

    def select(self, keep) -> 'ColumnScalePosterior':
        return ColumnScalePosterior(*(np.asarray(v)[keep] for v in (
            self.a, self.b, self.lam, self.mean_z, self.mean_inv_z, self.mean_log_z)))


@dataclass
class GhState(CpdState):
    col_scales: ColumnScalePosterior = None
    hyper: GhHyper = None
    kappa1: float = 0.0
    kappa2: float = KAPPA_A2

    def prior_precision(self) -> np.ndarray:
        return self.col_scales.mean_inv_z

    def _select_prior(self, keep):
        self.col_scales = self.col_scales.select(keep)
        self.hyper = self.hyper.select(keep)


def init(y, opts: FitOptions) -> GhState:
    """SVD means, identity covariances, E[1/z_l] = 1 and the default GH hyper-parameters."""
    y = as_dense_tensor(y)
    rank_bound = opts.resolve_rank_bound(y.shape)
    means, covs, noise = init_common(y, opts, rank_bound)
    lambda0 = float(-min(y.shape) if opts.lambda0 is None else opts.lambda0)
    kappa1 = 2.0 - lambda0 / 2.0
    if not kappa1 + lambda0 / 2.0 - 1.0 > 0:
        raise ConfigurationError(f'kappa1={kappa1} gives a nonpositive a0 numerator')
    ones = np.ones(rank_bound)
    hyper = GhHyper(a0=ones.copy(), b0=np.zeros(rank_bound), lambda0=np.full(rank_bound, lambda0))
    scales = ColumnScalePosterior(
        a=ones.copy(), b=ones.copy(),
        lam=np.full(rank_bound, lambda0 - 0.5 * sum(y.shape)),
        mean_z=ones.copy(), mean_inv_z=ones.copy(), mean_log_z=np.zeros(rank_bound),
    )
    logger.debug('GH init: rank bound %d, lambda0 %g, kappa1 %g', rank_bound, lambda0, kappa1)
    return GhState(factor_means=means, factor_covs=covs, noise=noise,
                   col_scales=scales, hyper=hyper, kappa1=kappa1, kappa2=KAPPA_A2)


def update_scales(state: GhState) -> GhState:
    """GIG posterior of every z_l from the current factor posteriors."""
    hyper = state.hyper
    b = np.maximum(np.asarray(hyper.b0) + column_sq_magnitudes(state), B_FLOOR)
    a = np.array(hyper.a0, dtype=np.float64)
    lam = np.asarray(hyper.lambda0, dtype=np.float64) - 0.5 * sum(state.dims)
    mean_z, mean_inv_z, mean_log_z = (np.empty(state.rank) for _ in range(3))
    for order in np.unique(lam):
        mask = lam == order
        moments = gig_moments(GigParams(a[mask], b[mask], float(order)))
        mean_z[mask], mean_inv_z[mask], mean_log_z[mask] = moments
    state.col_scales = ColumnScalePosterior(a, b, lam, mean_z, mean_inv_z, mean_log_z)
    return state


def update_hyper_a0(state: GhState) -> GhState:
    numerator = state.kappa1 + np.asarray(state.hyper.lambda0) / 2.0 - 1.0
    state.hyper.a0 = numerator / (state.kappa2 + state.col_scales.mean_z / 2.0)
    return state


def scale_prior_terms(state: GhState) -> np.ndarray:
    """E[ln p(z_l | a0, b0, lambda0)] per column.

    With b0 = 0 the GIG prior is improper; only its a0-dependent part
    (lambda0/2) ln a0 is kept, which is what the a0 update maximises.
    """
    scales, hyper = state.col_scales, state.hyper
    a0 = np.asarray(hyper.a0, dtype=np.float64)
    b0 = np.asarray(hyper.b0, dtype=np.float64)
    lambda0 = np.asarray(hyper.lambda0, dtype=np.float64)
    normalizer = 0.5 * lambda0 * np.log(a0)
    proper = b0 > 0
    for index in np.flatnonzero(proper):
        normalizer[index] = gig_log_normalizer(GigParams(a0[index], b0[index], lambda0[index]))
    return (normalizer + (lambda0 - 1.0) * scales.mean_log_z
            - 0.5 * a0 * scales.mean_z - 0.5 * b0 * scales.mean_inv_z)


def scale_entropies(state: GhState) -> np.ndarray:
    scales = state.col_scales
    out = np.empty(state.rank)
    for order in np.unique(scales.lam):
        mask = scales.lam == order
        params = GigParams(scales.a[mask], scales.b[mask], float(order))
        moments = GigMoments(scales.mean_z[mask], scales.mean_inv_z[mask], scales.mean_log_z[mask])
        out[mask] = gig_entropy(params, moments)
    return out


def elbo(state: GhState, y) -> float:
    scales = state.col_scales
    a0 = np.asarray(state.hyper.a0, dtype=np.float64)
    total = likelihood_elbo(state, y)
    total += factor_elbo(state, scales.mean_inv_z, -scales.mean_log_z)
    total += float(np.sum(scale_prior_terms(state)) + np.sum(scale_entropies(state)))
    total += float(np.sum((state.kappa1 - 1.0) * np.log(a0) - state.kappa2 * a0))
    return total


def fit(y, opts: FitOptions) -> FitReport:
    y = as_dense_tensor(y)
    state = init(y, opts)
    return run_fit(state, y, opts, algorithm='gh', update_prior=update_scales,
                   update_hyper=update_hyper_a0, elbo=elbo,
                   z_powers=lambda s: s.col_scales.mean_z)
