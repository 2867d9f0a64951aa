"""
PCPD-GG: the Gaussian-gamma baseline on the same engine.

Column l carries a gamma-distributed precision gamma_l with prior
gamma(c0, d0). With ``hyper_prior`` set (the GG-HO variant) every column also
gets its own rate d_l^0 ~ gamma(epsilon, epsilon), learned alongside.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conf import pcpd_settings
from .inference import (CpdState, FitOptions, FitReport, column_sq_magnitudes, factor_elbo,
                        init_common, likelihood_elbo, run_fit)
from .priors import GgHyper
from .special_math import gamma_entropy, gamma_mean_log, log_gamma
from .tensor_core import as_dense_tensor

logger = logging.getLogger(__name__)


@dataclass
class GgState(CpdState):
    hyper: GgHyper = None
    gamma_shape: np.ndarray = None
    gamma_rate: np.ndarray = None
    hyper_prior: bool = False
    epsilon: float = 1e-6
    # Q(d_l^0) = gamma(d0_shape, d0_rate); only used with hyper_prior
    d0_shape: Optional[np.ndarray] = None
    d0_rate: Optional[np.ndarray] = None

    @property
    def mean_gamma(self) -> np.ndarray:
        return self.gamma_shape / self.gamma_rate

    @property
    def mean_d0(self) -> np.ndarray:
        if self.hyper_prior:
            return self.d0_shape / self.d0_rate
        return np.full(self.rank, self.hyper.d0)

    def prior_precision(self) -> np.ndarray:
        return self.mean_gamma

    def _select_prior(self, keep):
        self.gamma_shape = self.gamma_shape[keep]
        self.gamma_rate = self.gamma_rate[keep]
        if self.hyper_prior:
            self.d0_shape = self.d0_shape[keep]
            self.d0_rate = self.d0_rate[keep]


def init_gg(y, opts: FitOptions, hyper: GgHyper = None, hyper_prior: bool = False) -> GgState:
    y = as_dense_tensor(y)
    hyper = hyper or GgHyper(pcpd_settings.GG_C0, pcpd_settings.GG_D0)
    rank_bound = opts.resolve_rank_bound(y.shape)
    means, covs, noise = init_common(y, opts, rank_bound)
    state = GgState(factor_means=means, factor_covs=covs, noise=noise, hyper=hyper,
                    gamma_shape=np.ones(rank_bound), gamma_rate=np.ones(rank_bound),
                    hyper_prior=hyper_prior, epsilon=opts.epsilon)
    if hyper_prior:
        state.d0_shape = np.full(rank_bound, hyper.c0 + opts.epsilon)
        state.d0_rate = state.d0_shape / hyper.d0
    return state


def update_gamma(state: GgState) -> GgState:
    state.gamma_shape = np.full(state.rank, state.hyper.c0 + 0.5 * sum(state.dims))
    state.gamma_rate = state.mean_d0 + 0.5 * column_sq_magnitudes(state)
    return state


def update_hyper_d0(state: GgState) -> GgState:
    """Gamma posterior of each d_l^0; a no-op unless the hyper-prior is enabled."""
    if not state.hyper_prior:
        return state
    state.d0_shape = np.full(state.rank, state.hyper.c0 + state.epsilon)
    state.d0_rate = state.epsilon + state.mean_gamma
    return state


def elbo_gg(state: GgState, y) -> float:
    c0 = state.hyper.c0
    mean_gamma = state.mean_gamma
    mean_log_gamma = gamma_mean_log(state.gamma_shape, state.gamma_rate)
    total = likelihood_elbo(state, y)
    total += factor_elbo(state, mean_gamma, mean_log_gamma)
    if state.hyper_prior:
        mean_d0 = state.mean_d0
        mean_log_d0 = gamma_mean_log(state.d0_shape, state.d0_rate)
        eps = state.epsilon
        total += np.sum(eps * math.log(eps) - log_gamma(eps) + (eps - 1.0) * mean_log_d0 - eps * mean_d0)
        total += np.sum(gamma_entropy(state.d0_shape, state.d0_rate))
    else:
        mean_d0 = state.mean_d0
        mean_log_d0 = np.log(mean_d0)
    total += np.sum(c0 * mean_log_d0 - log_gamma(c0) + (c0 - 1.0) * mean_log_gamma
                    - mean_d0 * mean_gamma)
    total += np.sum(gamma_entropy(state.gamma_shape, state.gamma_rate))
    return float(total)


def fit_gg(y, opts: FitOptions, hyper: GgHyper = None, hyper_prior: bool = False) -> FitReport:
    y = as_dense_tensor(y)
    state = init_gg(y, opts, hyper=hyper, hyper_prior=hyper_prior)
    # reported powers are the inverse expected precisions
    return run_fit(state, y, opts, algorithm='gg_ho' if hyper_prior else 'gg',
                   update_prior=update_gamma, update_hyper=update_hyper_d0, elbo=elbo_gg,
                   z_powers=lambda s: 1.0 / s.mean_gamma)
