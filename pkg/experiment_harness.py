"""
Experiment Harness Module

Monte Carlo protocols comparing the basic and energy tests:

- Power sweeps over a resolution grid (random signals or the worst-case
  polynomial signal), with reject probabilities per test and rho_*
- Near-minimal detectable shifts against eps-set nuisances, with the resulting
  uniform resolution and signal-to-noise ratio
- Risk bookkeeping, resolution laws and scale references
- Experiment configuration with named presets

Every number produced here is a pure function of the configuration and its
seed; trials draw from per-index Philox substreams, so worker count does not
change any result.
"""

import logging
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np
import pandas as pd

from detection_algorithms import (
    create_detection_algorithms,
    basic_test,
    energy_test,
)
from harmonics.errors import BisectionFailed, DomainError, NotConverged
from harmonics.frequencies import (
    make_frequency_collection,
    random_eps_signal,
    random_spec,
    sample_signal,
    window_basis,
)
from harmonics.nuisance import EPS_SET, NuisanceSpec
from minimax_solver import solve_uniform
from utils.noise import substream
from utils.persistence import load_json
from utils.quantiles import MONTE_CARLO, ThresholdTable

logger = logging.getLogger(__name__)

PROBLEMS = ("P1", "P2", "N1", "N2")
SIGNAL_MODES = ("random", "bad")
PRESETS_FILE = "experiment_presets.json"

DEFAULT_PARAMS = {
    'problem': 'P1',
    'N': 256,
    'd_s': 4,
    'd_n': 4,
    'eps_n': 0.01,
    'eps_s': 0.0,
    'alpha': 0.01,
    'trials': 2000,
    'rho_min': 0.0,
    'rho_max': 4.0,
    'rho_step': 0.05,
    'rho_grid': None,  # explicit grid overrides min/max/step
    'seed': 1,
    'threshold_method': MONTE_CARLO,
    'threshold_trials': 100000,
    'signal_mode': 'random',
    'energy_dof': 'full',
    'experiments': 10,
    'rejections_required': 15,
    'lambda_start': 0.1,
    'lambda_growth': 2.0,
    'lambda_max': 1e4,
    'bisection_steps': 12,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment; see DEFAULT_PARAMS for the defaults."""

    problem: str = DEFAULT_PARAMS['problem']
    N: int = DEFAULT_PARAMS['N']
    d_s: int = DEFAULT_PARAMS['d_s']
    d_n: int = DEFAULT_PARAMS['d_n']
    eps_n: float = DEFAULT_PARAMS['eps_n']
    eps_s: float = DEFAULT_PARAMS['eps_s']
    alpha: float = DEFAULT_PARAMS['alpha']
    trials: int = DEFAULT_PARAMS['trials']
    rho_min: float = DEFAULT_PARAMS['rho_min']
    rho_max: float = DEFAULT_PARAMS['rho_max']
    rho_step: float = DEFAULT_PARAMS['rho_step']
    rho_grid: Optional[tuple] = DEFAULT_PARAMS['rho_grid']
    seed: int = DEFAULT_PARAMS['seed']
    threshold_method: str = DEFAULT_PARAMS['threshold_method']
    threshold_trials: int = DEFAULT_PARAMS['threshold_trials']
    signal_mode: str = DEFAULT_PARAMS['signal_mode']
    energy_dof: str = DEFAULT_PARAMS['energy_dof']
    experiments: int = DEFAULT_PARAMS['experiments']
    rejections_required: int = DEFAULT_PARAMS['rejections_required']
    lambda_start: float = DEFAULT_PARAMS['lambda_start']
    lambda_growth: float = DEFAULT_PARAMS['lambda_growth']
    lambda_max: float = DEFAULT_PARAMS['lambda_max']
    bisection_steps: int = DEFAULT_PARAMS['bisection_steps']
    threshold: Optional[float] = None  # user-supplied basic-test threshold

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"Unknown problem: {self.problem}")
        if self.signal_mode not in SIGNAL_MODES:
            raise ValueError(f"Unknown signal mode: {self.signal_mode}")
        if not 0.0 < self.alpha < 0.5:
            raise DomainError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.trials < 1:
            raise DomainError(f"trials must be at least 1, got {self.trials}")
        if self.N < 2:
            raise DomainError(f"N must be at least 2, got {self.N}")
        if self.eps_n < 0 or self.eps_s < 0:
            raise DomainError("Residual bounds must be nonnegative")
        if self.rho_grid is not None:
            object.__setattr__(self, 'rho_grid', tuple(float(r) for r in self.rho_grid))
        grid = self.grid()
        if len(grid) == 0 or np.any(np.diff(grid) <= 0):
            raise DomainError("The resolution grid must be non-empty and strictly increasing")

    def grid(self):
        """Resolution grid as an array."""
        if self.rho_grid is not None:
            return np.array(self.rho_grid, dtype=float)
        count = int(math.floor((self.rho_max - self.rho_min) / self.rho_step + 1e-9)) + 1
        return np.round(self.rho_min + self.rho_step * np.arange(count), 10)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        data = asdict(self)
        if data['rho_grid'] is not None:
            data['rho_grid'] = list(data['rho_grid'])
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown configuration keys: {sorted(unknown)}")
        return cls(**data)


def load_presets(path=PRESETS_FILE):
    """Named configurations from the presets file, with a built-in fallback."""
    fallback = {
        'table1-128': {'problem': 'N1', 'N': 128, 'rejections_required': 15},
        'table1-512': {'problem': 'N1', 'N': 512, 'rejections_required': 15},
        'table1-1024': {'problem': 'N1', 'N': 1024, 'rejections_required': 15},
        'table2-256': {'problem': 'P1', 'N': 256, 'trials': 2000},
        'table2-256-bad': {'problem': 'P1', 'N': 256, 'trials': 2000, 'signal_mode': 'bad'},
        'table2-1024': {'problem': 'P1', 'N': 1024, 'trials': 2000},
        'table2-4096': {'problem': 'P1', 'N': 4096, 'trials': 500, 'rho_step': 0.1},
    }
    try:
        return load_json(path, fallback=fallback)
    except ValueError as e:
        logger.error("Error reading %s: %s. Using built-in presets.", path, e)
        return fallback


def get_preset(name, path=PRESETS_FILE, **overrides):
    presets = load_presets(path)
    if name not in presets:
        raise ValueError(f"Unknown preset: {name}")
    data = dict(presets[name])
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def nuisance_for_problem(problem, w_bar, eps_n):
    """Nuisance set of a problem: P1 -> Zero, P2 -> Subspace, N1/N2 -> EpsSet."""
    if problem == "P1":
        return NuisanceSpec.zero()
    if problem == "P2":
        return NuisanceSpec.subspace(w_bar)
    if problem in ("N1", "N2"):
        return NuisanceSpec.eps_set(w_bar, eps_n)
    raise ValueError(f"Unknown problem: {problem}")


def make_observation(x, seed, *index):
    """y = x + xi with xi standard normal from the substream of `index`."""
    x = np.asarray(x, dtype=float)
    return x + substream(seed, "noise", *index).standard_normal(len(x))


def bad_signal(N, degree):
    """
    Polynomial window of the given degree with the largest ||z||_inf / ||z||_2.

    For an orthonormal basis Phi of the polynomials on the grid, the ratio is
    maximized by z = Phi phi(t*) at the grid point t* with the largest
    phi(t*)^T phi(t*); ties go to the latest t*. The result has ||z||_inf = 1.
    """
    if int(degree) != degree or degree < 0:
        raise DomainError(f"degree must be a nonnegative integer, got {degree}")
    if N <= degree:
        raise DomainError(f"N={N} must exceed the degree {degree}")
    basis = window_basis(make_frequency_collection([0.0] * (int(degree) + 1)), N)
    leverage = np.einsum("ij,ij->i", basis, basis)
    top = float(np.max(leverage))
    peak = int(np.nonzero(leverage >= top * (1.0 - 1e-12))[0][-1])
    z = basis @ basis[peak]
    return z / z[peak]


def resolution_law(N, alpha):
    """Empirical resolution law 6 sqrt(ln(N/alpha) / N) of the eps-set experiments."""
    return 6.0 * math.sqrt(math.log(N / alpha) / N)


def basic_resolution_scale(N, alpha):
    return math.sqrt(math.log(N / alpha) / N)


def energy_resolution_scale(N, d_s, alpha):
    return d_s * (math.log(1.0 / alpha) / N) ** 0.25


def eps_condition(N, d_n, eps_n, d_s, eps_s, q):
    """Size of N^(d_n+1/2) eps_n + N^(d_s+1/2) eps_s and its ratio to the threshold q."""
    value = N ** (d_n + 0.5) * eps_n + N ** (d_s + 0.5) * eps_s
    return {'value': value, 'ratio_to_threshold': value / q}


def rho_star(records, column, alpha):
    """Smallest grid resolution whose reject probability reaches 1 - alpha, or None."""
    reached = records.loc[records[column] >= 1.0 - alpha, 'rho']
    return None if reached.empty else float(reached.min())


def format_rho_star(value):
    return "not reached" if value is None else f"{value:.2f}"


def empirical_risk(records, alpha):
    """
    Error probabilities per grid point.

    eps0 is the false-alarm rate at rho = 0, eps1(rho) = 1 - p(rho) and
    risk(rho) = max(eps0, eps1(rho)).
    """
    out = records[['rho']].copy()
    for test in ('basic', 'energy'):
        column = f'p_{test}'
        null_rows = records.loc[records['rho'] == 0.0, column]
        eps0 = float(null_rows.iloc[0]) if not null_rows.empty else float('nan')
        out[f'eps0_{test}'] = eps0
        out[f'eps1_{test}'] = 1.0 - records[column]
        out[f'risk_{test}'] = np.maximum(eps0, out[f'eps1_{test}'])
    out.attrs['rho_star_basic'] = rho_star(records, 'p_basic', alpha)
    out.attrs['rho_star_energy'] = rho_star(records, 'p_energy', alpha)
    return out


def thresholds_for(cfg, table=None, Z=None):
    """Basic and energy thresholds of a configuration."""
    detectors = create_detection_algorithms(table)
    params = {
        'alpha': cfg.alpha,
        'threshold_method': cfg.threshold_method,
        'threshold_trials': cfg.threshold_trials,
        'threshold_seed': cfg.seed,
        'energy_dof': cfg.energy_dof,
        'threshold': cfg.threshold,
    }
    Z = Z if Z is not None else NuisanceSpec.zero()
    basic = detectors.basic_threshold(cfg.N, params)
    energy = None
    if Z.effective_kind() != EPS_SET:
        energy = detectors.energy_threshold(cfg.N, Z, params)
    return basic, energy


def _map(function, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(function, jobs))
    return [function(job) for job in jobs]


def _chunks(total, workers):
    size = max(1, math.ceil(total / max(1, workers or 1)))
    return [(start, min(total, start + size)) for start in range(0, total, size)]


# ---------------------------------------------------------------------------
# Power sweep
# ---------------------------------------------------------------------------

def _sweep_signal(cfg, trial, fixed):
    if fixed is not None:
        return fixed
    spec = random_spec(cfg.d_s, substream(cfg.seed, "sweep-signal", trial))
    return sample_signal(spec, cfg.N)


def _sweep_chunk(job):
    """Reject counts of both tests for trials [start, stop) at every grid point."""
    cfg_data, start, stop, basic_threshold, energy_threshold = job
    cfg = ExperimentConfig.from_dict(cfg_data)
    grid = cfg.grid()
    Z = NuisanceSpec.zero()
    fixed = bad_signal(cfg.N, cfg.d_s - 1) if cfg.signal_mode == "bad" else None
    basic_counts = np.zeros(len(grid), dtype=np.int64)
    energy_counts = np.zeros(len(grid), dtype=np.int64)
    for trial in range(start, stop):
        z = _sweep_signal(cfg, trial, fixed)
        peak = float(np.max(np.abs(z)))
        direction = z / peak if peak > 0 else z
        noise = make_observation(np.zeros(cfg.N), cfg.seed, trial)
        for j, rho in enumerate(grid):
            y = rho * direction + noise
            basic_counts[j] += basic_test(y, Z, basic_threshold).rejected
            energy_counts[j] += energy_test(y, Z, energy_threshold).rejected
    return basic_counts, energy_counts


def table2_sweep(cfg, workers=1, table=None):
    """
    Reject probabilities of both tests along the resolution grid.

    Each trial draws a signal z (a fresh random member of S_{d_s}, or the
    fixed worst-case polynomial in "bad" mode), scales it to ||x||_inf = rho
    and adds noise; trial i uses the same signal and noise at every rho.

    Args:
        cfg: ExperimentConfig with problem "P1"
        workers: Number of worker processes
        table: Optional ThresholdTable cache

    Returns:
        DataFrame with columns rho, p_basic, p_energy; summary values in .attrs
    """
    if cfg.problem != "P1":
        raise ValueError(f"The power sweep runs problem P1, got {cfg.problem}")
    table = table if table is not None else ThresholdTable()
    basic_threshold, energy_threshold = thresholds_for(cfg, table)
    logger.info("Sweep N=%d trials=%d: thresholds basic %.6f, energy %.4f",
                cfg.N, cfg.trials, basic_threshold, energy_threshold)

    started = time.perf_counter()
    jobs = [(cfg.to_dict(), start, stop, basic_threshold, energy_threshold)
            for start, stop in _chunks(cfg.trials, workers)]
    results = _map(_sweep_chunk, jobs, workers)
    basic_counts = sum(r[0] for r in results)
    energy_counts = sum(r[1] for r in results)

    records = pd.DataFrame({
        'rho': cfg.grid(),
        'p_basic': basic_counts / cfg.trials,
        'p_energy': energy_counts / cfg.trials,
    })
    records.attrs.update(summarize_sweep(records, cfg, basic_threshold, energy_threshold))
    records.attrs['runtime_s'] = time.perf_counter() - started
    return records


def summarize_sweep(records, cfg, basic_threshold=None, energy_threshold=None):
    return {
        'N': cfg.N,
        'trials': cfg.trials,
        'signal_mode': cfg.signal_mode,
        'rho_star_basic': rho_star(records, 'p_basic', cfg.alpha),
        'rho_star_energy': rho_star(records, 'p_energy', cfg.alpha),
        'basic_threshold': basic_threshold,
        'energy_threshold': energy_threshold,
        'basic_scale': basic_resolution_scale(cfg.N, cfg.alpha),
        'energy_scale': energy_resolution_scale(cfg.N, cfg.d_s, cfg.alpha),
    }


# ---------------------------------------------------------------------------
# Near-minimal detectable shifts
# ---------------------------------------------------------------------------

def _shift_problem(cfg, experiment):
    """Random shift direction (||s||_inf = 1), nuisance member and nuisance set."""
    rng = substream(cfg.seed, "shift", experiment)
    w_bar = random_spec(cfg.d_n, rng).collection()
    if cfg.problem == "N2" and cfg.eps_s > 0:
        w = random_spec(cfg.d_s, rng).collection()
        shift = random_eps_signal(w, cfg.N, cfg.eps_s, rng)[w.d:]
    else:
        shift = sample_signal(random_spec(cfg.d_s, rng), cfg.N)
    shift = shift / float(np.max(np.abs(shift)))
    nuisance = random_eps_signal(w_bar, cfg.N, cfg.eps_n, rng)[w_bar.d:]
    Z = nuisance_for_problem(cfg.problem, w_bar, cfg.eps_n)
    return shift, nuisance, Z


def _rejects_every_time(cfg, experiment, x, Z, threshold, tally):
    """True when every noise draw of x is rejected; uncertified draws are counted in tally."""
    for i in range(cfg.rejections_required):
        y = make_observation(x, cfg.seed, experiment, i)
        try:
            outcome = basic_test(y, Z, threshold)
            rejected, certified = outcome.rejected, outcome.certified
        except NotConverged as e:
            if e.report is None:
                raise
            rejected, certified = e.report.value > threshold, False
        if not certified:
            tally['uncertified'] += 1
            logger.warning("Uncertified decision in experiment %d, draw %d (%s)",
                           experiment, i, "reject" if rejected else "accept")
        if not rejected:
            return False
    return True


def _minimal_shift(cfg, experiment, shift, nuisance, Z, threshold, tally):
    """Exponential bracket on lambda, then bisection; returns the upper endpoint."""
    lam = cfg.lambda_start
    lower = 0.0
    while not _rejects_every_time(cfg, experiment, lam * shift + nuisance, Z, threshold, tally):
        lower = lam
        lam *= cfg.lambda_growth
        if lam > cfg.lambda_max:
            raise BisectionFailed(
                f"No shift up to {cfg.lambda_max:g} rejected in all "
                f"{cfg.rejections_required} draws (experiment {experiment})",
                bracket=(lower, lam),
            )
    upper = lam
    for _ in range(cfg.bisection_steps):
        middle = 0.5 * (lower + upper)
        if _rejects_every_time(cfg, experiment, middle * shift + nuisance, Z, threshold, tally):
            upper = middle
        else:
            lower = middle
    return upper


def _shift_experiment(job):
    cfg_data, experiment, threshold = job
    cfg = ExperimentConfig.from_dict(cfg_data)
    started = time.perf_counter()
    shift, nuisance, Z = _shift_problem(cfg, experiment)
    tally = Counter()
    lam = _minimal_shift(cfg, experiment, shift, nuisance, Z, threshold, tally)
    x = lam * shift + nuisance
    distance = solve_uniform(x, Z)
    closest = distance.minimizer
    snr = float(np.linalg.norm(x - closest)) / math.sqrt(cfg.N)
    logger.info("Experiment %d: lambda %.5f, resolution %.5f, snr %.5f",
                experiment, lam, distance.value, snr)
    return {
        'experiment': experiment,
        'resolution': distance.value,
        'snr': snr,
        'lambda': lam,
        'uncertified': tally['uncertified'],
        'runtime_s': time.perf_counter() - started,
    }


def table1_experiment(cfg, workers=1, table=None):
    """
    Near-minimal detectable shifts against eps-set nuisances.

    Per experiment: draw a shift direction s in S[w] and a nuisance
    u in S^{eps_n}[w_bar], find (bracket plus bisection on lambda) the
    smallest lambda for which the basic test rejects in every one of
    `rejections_required` noise draws of x = lambda s + u (the same draws for
    every lambda), and report the uniform distance rho from x to the nuisance
    set together with the signal-to-noise ratio ||x - u_x||_2 / sqrt(N).

    Returns:
        DataFrame with columns experiment, resolution, snr, lambda, uncertified
        (draws whose decision the solver could not certify), runtime_s;
        summary values in .attrs
    """
    if cfg.problem not in ("N1", "N2"):
        raise ValueError(f"Shift experiments run problems N1/N2, got {cfg.problem}")
    table = table if table is not None else ThresholdTable()
    threshold, _ = thresholds_for(cfg, table)
    jobs = [(cfg.to_dict(), e, threshold) for e in range(cfg.experiments)]
    rows = _map(_shift_experiment, jobs, workers)

    records = pd.DataFrame(rows, columns=['experiment', 'resolution', 'snr', 'lambda', 'uncertified', 'runtime_s'])
    records.attrs.update(summarize_shifts(records, cfg, threshold))
    return records


def summarize_shifts(records, cfg, threshold):
    root_n = math.sqrt(cfg.N)
    mean_resolution = float(records['resolution'].mean())
    law = resolution_law(cfg.N, cfg.alpha)
    return {
        'N': cfg.N,
        'experiments': int(len(records)),
        'mean_resolution': mean_resolution,
        'mean_resolution_x_sqrtN': mean_resolution * root_n,
        'mean_snr_x_sqrtN': float(records['snr'].mean()) * root_n,
        'resolution_law': law,
        'mean_to_law': mean_resolution / law,
        'uncertified_draws': int(records['uncertified'].sum()),
        'threshold': threshold,
        'eps_condition': eps_condition(cfg.N, cfg.d_n, cfg.eps_n, cfg.d_s, cfg.eps_s, threshold),
    }


TABLE1_COLUMNS = ['experiment', 'resolution', 'snr']
TABLE2_COLUMNS = ['rho', 'p_basic', 'p_energy']
