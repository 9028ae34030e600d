"""
Detection Thresholds

This module provides the thresholds both detectors compare against:

- Upper-tail inverse of the standard normal law (ErfInv)
- The closed-form bound q_N(alpha) on the (1-alpha)-quantile of ||F_N xi||_inf
- Monte Carlo estimates of that quantile with an order-statistic safety margin
- The chi-square quantile p_N(alpha) used by the energy test
- A cache of computed thresholds keyed by (N, alpha, method, trials, seed)
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as spfft
from scipy import special
from scipy import stats
from scipy.optimize import minimize_scalar

from harmonics.errors import DomainError, InsufficientTrials
from utils.noise import substream

logger = logging.getLogger(__name__)

FORMULA_BOUND = "bound"
MONTE_CARLO = "mc"
USER_SUPPLIED = "user"
METHODS = (FORMULA_BOUND, MONTE_CARLO, USER_SUPPLIED)

MC_CONFIDENCE = 0.99  # probability that the Monte Carlo value upper-bounds the true quantile
MC_CHUNK = 2048  # trials per batched FFT


def _check_alpha(alpha, upper=1.0):
    if not (0.0 < alpha < upper):
        raise DomainError(f"alpha must lie in (0, {upper:g}), got {alpha}")


def erfinv_tail(alpha):
    """
    Point x with upper-tail standard normal probability alpha.

    Starts from scipy's ndtri and applies one Newton correction against the
    complementary normal CDF.

    Args:
        alpha: Tail probability in (0, 1)

    Returns:
        x such that P(N(0,1) > x) = alpha
    """
    _check_alpha(alpha)
    x = -float(special.ndtri(alpha))
    density = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if density > 0:
        x += (float(special.ndtr(-x)) - alpha) / density
    return x


def _bound_objective(N, alpha):
    if N % 2 == 0:
        divisor, numerator = 4.0, N - 2.0
    else:
        divisor, numerator = 2.0, N - 1.0

    def objective(s):
        return max(erfinv_tail(s * alpha / divisor),
                   math.sqrt(numerator / (2.0 * (1.0 - s) * alpha)))

    return objective


def q_bound(N, alpha):
    """
    Closed-form upper bound on the (1-alpha)-quantile of ||F_N xi||_inf.

    For even N this is inf over s in [0, 1] of
    max[ErfInv(s*alpha/4), sqrt((N-2) / (2(1-s)alpha))]; odd N uses
    ErfInv(s*alpha/2) and sqrt((N-1) / (2(1-s)alpha)). The first term falls
    and the second rises in s, so a bounded scalar search finds the infimum.

    Args:
        N: Window length (>= 2)
        alpha: Level in (0, 1/2)

    Returns:
        Threshold value
    """
    if int(N) != N or N < 2:
        raise DomainError(f"N must be an integer >= 2, got {N}")
    _check_alpha(alpha, 0.5)
    objective = _bound_objective(int(N), alpha)
    edge = 1e-12
    result = minimize_scalar(objective, bounds=(edge, 1.0 - edge), method="bounded",
                             options={"xatol": 1e-10})
    return float(min(result.fun, objective(1.0 - edge)))


@dataclass(frozen=True)
class QuantileEstimate:
    """Monte Carlo quantile together with the order statistic it came from."""

    value: float
    N: int
    alpha: float
    trials: int
    seed: int
    order: int
    delta_safety: float


def noise_sup_statistics(N, trials, seed, start=0):
    """||F_N xi||_inf for trials start..start+trials-1, one Philox substream each."""
    values = np.empty(int(trials))
    for offset in range(0, int(trials), MC_CHUNK):
        count = min(MC_CHUNK, int(trials) - offset)
        block = np.stack([
            substream(seed, "quantile", int(N), start + offset + i).standard_normal(int(N))
            for i in range(count)
        ])
        values[offset:offset + count] = np.max(np.abs(spfft.ifft(block, norm="ortho", axis=1)), axis=1)
    return values


def safety_order(trials, alpha):
    """1-based order statistic that upper-bounds the (1-alpha)-quantile with probability MC_CONFIDENCE."""
    return int(stats.binom.ppf(MC_CONFIDENCE, int(trials), 1.0 - alpha)) + 1


def monte_carlo_quantile(N, alpha, trials, seed):
    """
    Monte Carlo upper estimate of the (1-alpha)-quantile of ||F_N xi||_inf.

    The statistic is simulated `trials` times and the k-th smallest value is
    returned, with k the smallest order such that the number of draws below
    the true quantile (Binomial(trials, 1-alpha)) stays below k with
    probability MC_CONFIDENCE.

    Returns:
        QuantileEstimate; delta_safety = k / (trials * (1 - alpha)) - 1
    """
    if int(N) < 1:
        raise DomainError(f"N must be positive, got {N}")
    _check_alpha(alpha)
    needed = math.ceil(10.0 / alpha)
    if trials < needed:
        raise InsufficientTrials(f"Need at least {needed} trials for alpha={alpha}, got {trials}")
    order = safety_order(trials, alpha)
    if order > trials:
        raise InsufficientTrials(
            f"{trials} trials cannot bound the {1 - alpha:.4g}-quantile at confidence {MC_CONFIDENCE}"
        )

    statistics = np.sort(noise_sup_statistics(N, trials, seed))
    value = float(statistics[order - 1])
    delta = order / (trials * (1.0 - alpha)) - 1.0
    logger.debug("q_mc N=%d alpha=%g trials=%d -> %.6f (order %d)", N, alpha, trials, value, order)
    return QuantileEstimate(value, int(N), float(alpha), int(trials), int(seed), order, delta)


def q_mc(N, alpha, trials, seed):
    """Monte Carlo threshold; see monte_carlo_quantile."""
    return monte_carlo_quantile(N, alpha, trials, seed).value


def chi2_quantile(N, alpha):
    """
    (1-alpha)-quantile p_N(alpha) of the chi-square law with N degrees of freedom.

    Inverts the regularized upper incomplete gamma function through
    scipy.special.chdtri and polishes with one Newton step.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"Degrees of freedom must be a positive integer, got {N}")
    _check_alpha(alpha)
    x = float(special.chdtri(N, alpha))
    density = float(stats.chi2.pdf(x, N))
    if density > 0:
        x += (float(special.chdtrc(N, x)) - alpha) / density
    return x


def threshold_key(N, alpha, method, trials=None, seed=None):
    return f"{int(N)}:{float(alpha)!r}:{method}:{'-' if trials is None else int(trials)}:{'-' if seed is None else int(seed)}"


class ThresholdTable:
    """
    Cache of basic-test thresholds.

    Monte Carlo entries are keyed by their trial count and seed, so a cached
    value is exactly the one q_mc would recompute.
    """

    def __init__(self, entries=None):
        self.entries = dict(entries or {})

    def get(self, N, alpha, method=MONTE_CARLO, trials=None, seed=None):
        return self.entries.get(threshold_key(N, alpha, method, trials, seed))

    def put(self, N, alpha, method, value, trials=None, seed=None):
        if method not in METHODS:
            raise ValueError(f"Unknown threshold method: {method}")
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"Thresholds must be positive and finite, got {value}")
        self.entries[threshold_key(N, alpha, method, trials, seed)] = float(value)
        return float(value)

    def get_or_compute(self, N, alpha, method=MONTE_CARLO, trials=None, seed=None):
        """Return the cached threshold or compute and store it."""
        if method == MONTE_CARLO and (trials is None or seed is None):
            raise ValueError("Monte Carlo thresholds need trials and seed")
        key_trials, key_seed = (trials, seed) if method == MONTE_CARLO else (None, None)
        cached = self.get(N, alpha, method, key_trials, key_seed)
        if cached is not None:
            return cached
        if method == FORMULA_BOUND:
            value = q_bound(N, alpha)
        elif method == MONTE_CARLO:
            value = q_mc(N, alpha, trials, seed)
        elif method == USER_SUPPLIED:
            raise KeyError(f"No user-supplied threshold for N={N}, alpha={alpha}")
        else:
            raise ValueError(f"Unknown threshold method: {method}")
        return self.put(N, alpha, method, value, key_trials, key_seed)

    def to_dict(self):
        return dict(sorted(self.entries.items()))

    @classmethod
    def from_dict(cls, data):
        return cls({str(k): float(v) for k, v in data.items()})

    def __len__(self):
        return len(self.entries)
