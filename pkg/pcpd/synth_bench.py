"""
Synthetic CPD data, recovery metrics and the Monte-Carlo rank-recovery harness.

Every trial draws its own seeds from ``numpy.random.SeedSequence`` keyed on
(base_seed, grid cell, trial, stream), so a report does not depend on how
many workers ran it or in which order the trials finished.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError, DomainError
from .inference import FitOptions
from .tensor_core import KruskalModel, frob_norm_sq, reconstruct
from .vi_gg import fit_gg
from .vi_gh import fit

logger = logging.getLogger(__name__)

ALGORITHMS = {
    'gh': fit,
    'gg': fit_gg,
    'gg_ho': partial(fit_gg, hyper_prior=True),
}
FACTOR_CORRELATIONS = ('iid', 'correlated')

DATA_STREAM = 0
NOISE_STREAM = 1


@dataclass
class SynthSpec:
    dims: Sequence[int]
    true_rank: int
    snr_db: Optional[float] = None
    factor_correlation: str = 'iid'
    seed: int = 0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise ConfigurationError(f'dims must list at least 2 positive sizes, got {self.dims}')
        if self.true_rank < 1:
            raise ConfigurationError(f'true_rank must be at least 1, got {self.true_rank}')
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ConfigurationError(f'snr_db must be finite, got {self.snr_db}')
        if self.factor_correlation not in FACTOR_CORRELATIONS:
            raise ConfigurationError(f'unknown factor_correlation {self.factor_correlation!r}')


def gen_cpd(spec: SynthSpec):
    """Random rank-R model and its reconstruction.

    ``iid`` draws every factor entry from N(0, 1). ``correlated`` draws a mixing
    matrix F per mode and gives every factor row the covariance F F^T.
    """
    rng = np.random.default_rng(spec.seed)
    factors = []
    for size in spec.dims:
        draws = rng.standard_normal((size, spec.true_rank))
        if spec.factor_correlation == 'correlated':
            mixing = rng.standard_normal((spec.true_rank, spec.true_rank))
            draws = draws @ mixing.T
        factors.append(draws)
    model = KruskalModel(factors)
    return reconstruct(model), model


def add_noise(x, snr_db: float, seed: int) -> np.ndarray:
    """x plus white Gaussian noise at ``snr_db`` relative to the population variance of x."""
    x = np.asarray(x, dtype=np.float64)
    signal_var = float(np.var(x))
    if signal_var == 0:
        raise DomainError('cannot set an SNR for a constant tensor')
    noise_var = signal_var / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    return x + rng.normal(0.0, math.sqrt(noise_var), size=x.shape)


def rmse(x_true, x_hat) -> float:
    diff = np.asarray(x_true, dtype=np.float64) - np.asarray(x_hat, dtype=np.float64)
    return math.sqrt(frob_norm_sq(diff) / diff.size)


def fit_value(x_ref, x_hat) -> float:
    """(1 - ||x_hat - x|| / ||x||) * 100; the reference must not be all zero."""
    x_ref = np.asarray(x_ref, dtype=np.float64)
    scale = math.sqrt(frob_norm_sq(x_ref))
    if scale == 0:
        raise DomainError('Fit needs a nonzero reference tensor')
    error = math.sqrt(frob_norm_sq(np.asarray(x_hat) - x_ref))
    return (1.0 - error / scale) * 100.0


def snr_output(y_in, x_hat) -> float:
    """10 log10(||x_hat||^2 / ||y - x_hat||^2).

    ``math.inf`` when x_hat reproduces y exactly, ``-math.inf`` when x_hat is
    all zero but y is not.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    residual = frob_norm_sq(np.asarray(y_in, dtype=np.float64) - x_hat)
    if residual == 0:
        return math.inf
    power = frob_norm_sq(x_hat)
    if power == 0:
        return -math.inf
    return 10.0 * math.log10(power / residual)


def derive_seed(base_seed: int, cell: int, trial: int, stream: int = DATA_STREAM) -> int:
    sequence = np.random.SeedSequence(entropy=base_seed, spawn_key=(cell, trial, stream))
    return int(sequence.generate_state(1)[0])


@dataclass
class BenchConfig:
    """``grid`` holds SynthSpec cells; their seeds are ignored in favour of derived ones."""

    grid: List[SynthSpec]
    algorithms: List[str] = field(default_factory=lambda: ['gh'])
    rank_bound_factors: List[float] = field(default_factory=lambda: [1.0])
    trials: int = 1
    base_seed: int = 0
    parallelism: int = 1
    fit: Dict = field(default_factory=dict)
    record_timings: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f'trials must be at least 1, got {self.trials}')
        if self.parallelism < 1:
            raise ConfigurationError(f'parallelism must be at least 1, got {self.parallelism}')
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigurationError(f'unknown algorithms {sorted(unknown)}')
        if not self.grid:
            raise ConfigurationError('grid is empty')


@dataclass
class TrialRow:
    algo: str
    R: int
    snr_db: Optional[float]
    L: Optional[int]
    trial: int
    seed: int
    est_rank: Optional[int] = None
    rmse: Optional[float] = None
    iters: Optional[int] = None
    seconds: Optional[float] = None
    converged: Optional[bool] = None
    error: str = ''


@dataclass
class CellSummary:
    algo: str
    R: int
    snr_db: Optional[float]
    L: Optional[int]
    trials: int
    failures: int
    accuracy: float
    mean_rank: Optional[float]
    std_rank: Optional[float]
    mean_rmse: Optional[float]
    mean_seconds: Optional[float]


@dataclass
class BenchReport:
    rows: List[TrialRow]
    cells: List[CellSummary]

    def cell(self, algo: str, true_rank: int, snr_db, rank_bound: int) -> CellSummary:
        for summary in self.cells:
            if (summary.algo, summary.R, summary.snr_db, summary.L) == (algo, true_rank, snr_db, rank_bound):
                return summary
        raise KeyError((algo, true_rank, snr_db, rank_bound))


@dataclass(frozen=True)
class _Task:
    cell: int
    spec: SynthSpec
    algo: str
    factor: float
    trial: int


def _run_trial(cfg: BenchConfig, task: _Task) -> TrialRow:
    spec = task.spec
    seed = derive_seed(cfg.base_seed, task.cell, task.trial, DATA_STREAM)
    row = TrialRow(algo=task.algo, R=spec.true_rank, snr_db=spec.snr_db, L=None,
                   trial=task.trial, seed=seed)
    data_spec = SynthSpec(spec.dims, spec.true_rank, spec.snr_db, spec.factor_correlation, seed)
    try:
        opts = FitOptions(**{**cfg.fit, 'rank_bound_factor': task.factor, 'seed': seed})
        row.L = opts.resolve_rank_bound(spec.dims)
        x, _ = gen_cpd(data_spec)
        y = x if spec.snr_db is None else add_noise(
            x, spec.snr_db, derive_seed(cfg.base_seed, task.cell, task.trial, NOISE_STREAM))
        started = time.perf_counter()
        report = ALGORITHMS[task.algo](y, opts)
        elapsed = time.perf_counter() - started
    except Exception as exc:
        logger.warning('trial %d of %s R=%d snr=%s L=%s failed: %s', task.trial, task.algo,
                       spec.true_rank, spec.snr_db, row.L, exc)
        row.error = f'{type(exc).__name__}: {exc}'
        return row
    row.est_rank = report.estimated_rank
    row.rmse = rmse(x, report.reconstruction)
    row.iters = report.iterations_run
    row.converged = report.converged
    if cfg.record_timings:
        row.seconds = elapsed
    return row


def _summarize(rows: List[TrialRow]) -> CellSummary:
    first = rows[0]
    good = [r for r in rows if not r.error]
    ranks = np.array([r.est_rank for r in good], dtype=np.float64)
    hits = sum(1 for r in good if r.est_rank == r.R)
    timed = [r.seconds for r in good if r.seconds is not None]
    return CellSummary(
        algo=first.algo, R=first.R, snr_db=first.snr_db, L=first.L,
        trials=len(rows), failures=len(rows) - len(good),
        accuracy=hits / len(rows),
        mean_rank=float(ranks.mean()) if good else None,
        std_rank=float(ranks.std()) if good else None,
        mean_rmse=float(np.mean([r.rmse for r in good])) if good else None,
        mean_seconds=float(np.mean(timed)) if timed else None,
    )


def run_bench(cfg: BenchConfig) -> BenchReport:
    tasks = [
        _Task(cell, spec, algo, factor, trial)
        for cell, spec in enumerate(cfg.grid)
        for algo in cfg.algorithms
        for factor in cfg.rank_bound_factors
        for trial in range(cfg.trials)
    ]
    logger.info('running %d trials on %d workers', len(tasks), cfg.parallelism)
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        rows = list(pool.map(partial(_run_trial, cfg), tasks))
    cells = []
    for start in range(0, len(rows), cfg.trials):
        summary = _summarize(rows[start:start + cfg.trials])
        logger.info('cell %s R=%d snr=%s L=%s: accuracy %.2f', summary.algo, summary.R,
                    summary.snr_db, summary.L, summary.accuracy)
        cells.append(summary)
    return BenchReport(rows=rows, cells=cells)


def _csv_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return value


def _write_csv(records, record_type, stream):
    writer = csv.writer(stream, lineterminator='\n')
    names = [f.name for f in fields(record_type)]
    writer.writerow(names)
    for record in records:
        values = asdict(record)
        writer.writerow([_csv_value(values[name]) for name in names])


def write_trials_csv(report: BenchReport, stream):
    _write_csv(report.rows, TrialRow, stream)


def write_summary_csv(report: BenchReport, stream):
    _write_csv(report.cells, CellSummary, stream)
