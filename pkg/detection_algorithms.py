"""
Detection Algorithms Module

This module provides the two decision procedures for harmonic oscillations
observed in white Gaussian noise:

- The basic test: the certified minimax statistic min_z ||F_N(y - z)||_inf
  compared with a noise quantile
- The energy test: the least-squares residual min_u ||y - u||_2^2 compared
  with a chi-square quantile
- Threshold selection (formula bound, Monte Carlo, user supplied) with caching

Author: Harmonic Detection Toolkit
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from harmonics.errors import DomainError, NotConverged, UnsupportedNuisance
from harmonics.nuisance import EPS_SET, SUBSPACE, ZERO
from minimax_solver import solve
from utils.quantiles import (
    FORMULA_BOUND,
    MONTE_CARLO,
    USER_SUPPLIED,
    ThresholdTable,
    chi2_quantile,
)

logger = logging.getLogger(__name__)

ACCEPT_H0 = "accept_h0"
REJECT_H0 = "reject_h0"
BASIC = "basic"
ENERGY = "energy"


@dataclass(frozen=True)
class TestOutcome:
    """Statistic, threshold and decision of one test run."""

    __test__ = False  # not a pytest class

    statistic: float
    threshold: float
    decision: str
    test_kind: str
    solver_gap: Optional[float] = None
    certified: bool = True

    @property
    def rejected(self):
        return self.decision == REJECT_H0

    def to_dict(self):
        return {
            'test_kind': self.test_kind,
            'statistic': self.statistic,
            'threshold': self.threshold,
            'decision': self.decision,
            'solver_gap': self.solver_gap,
            'certified': self.certified,
        }


def _decide(statistic, threshold):
    # ties accept H0
    return REJECT_H0 if statistic > threshold else ACCEPT_H0


def _check_threshold(threshold):
    if not threshold > 0:
        raise DomainError(f"Threshold must be positive, got {threshold}")


def basic_test(y, Z, threshold, early_stop=True, **solver_params):
    """
    Run the basic test on one observation.

    Args:
        y: Observation window
        Z: NuisanceSpec
        threshold: Positive threshold, typically a (1-alpha)-quantile bound
        early_stop: Let the solver stop once the comparison is certified
        **solver_params: tol_abs, tol_rel, max_iter for the solver

    Returns:
        TestOutcome; certified is False when the duality gap straddles the
        threshold

    Raises:
        NotConverged: only if the solver ran out of budget and its gap still
            straddles the threshold
    """
    _check_threshold(threshold)
    try:
        report = solve(y, Z, decision_threshold=threshold if early_stop else None, **solver_params)
    except NotConverged as exc:
        if exc.report is None or not exc.report.certifies(threshold):
            raise
        logger.info("Solver not converged but decision is certified (gap %.3e)", exc.report.gap)
        report = exc.report

    certified = report.certifies(threshold)
    if not certified:
        logger.warning("Basic test decision uncertified: statistic %.6f, threshold %.6f, gap %.3e",
                       report.value, threshold, report.gap)
    return TestOutcome(
        statistic=report.value,
        threshold=float(threshold),
        decision=_decide(report.value, threshold),
        test_kind=BASIC,
        solver_gap=report.gap,
        certified=certified,
    )


def energy_statistic(y, Z):
    """Squared Euclidean distance from y to the nuisance set (Zero or Subspace)."""
    y = np.asarray(y, dtype=float)
    kind = Z.effective_kind()
    if kind == EPS_SET:
        raise UnsupportedNuisance(f"The energy test is not defined for {Z.describe()}")
    if kind == ZERO:
        return float(np.dot(y, y))
    B = Z.basis(len(y))
    residual = y - B @ (B.T @ y)
    return float(np.dot(residual, residual))


def energy_test(y, Z, threshold):
    """
    Run the energy test on one observation.

    Args:
        y: Observation window
        Z: NuisanceSpec of kind zero or subspace
        threshold: Positive threshold, typically chi2_quantile(N, alpha)

    Returns:
        TestOutcome with test_kind "energy"
    """
    _check_threshold(threshold)
    statistic = energy_statistic(y, Z)
    return TestOutcome(statistic, float(threshold), _decide(statistic, threshold), ENERGY)


def energy_dof(N, Z, dof="full"):
    """Degrees of freedom of the energy threshold: N, or N - d_n with dof="reduced"."""
    if dof == "full":
        return int(N)
    if dof == "reduced":
        rank = Z.basis(N).shape[1] if Z.effective_kind() == SUBSPACE else 0
        return int(N) - rank
    raise ValueError(f"Unknown degrees-of-freedom rule: {dof}")


class DetectionAlgorithms:
    """
    Both tests with threshold bookkeeping.

    Thresholds are looked up in (and written to) a ThresholdTable so sweeps
    over many observations of one length compute each quantile once.
    """

    def __init__(self, table=None):
        """Initialize with default parameters and an optional threshold cache."""
        self.default_params = {
            'alpha': 0.01,
            'threshold_method': MONTE_CARLO,  # 'mc', 'bound' or 'user'
            'threshold_trials': 100000,
            'threshold_seed': 0,
            'energy_dof': 'full',  # 'full' (N) or 'reduced' (N - d_n)
        }
        self.table = table if table is not None else ThresholdTable()

    def _params(self, params):
        merged = dict(self.default_params)
        merged.update({k: v for k, v in (params or {}).items() if v is not None})
        return merged

    def basic_threshold(self, N, params=None):
        p = self._params(params)
        method = p['threshold_method']
        if method == MONTE_CARLO:
            return self.table.get_or_compute(N, p['alpha'], MONTE_CARLO,
                                             p['threshold_trials'], p['threshold_seed'])
        if method == FORMULA_BOUND:
            return self.table.get_or_compute(N, p['alpha'], FORMULA_BOUND)
        if method == USER_SUPPLIED:
            if p.get('threshold') is None:
                raise ValueError("User-supplied threshold method needs a 'threshold' value")
            return self.table.put(N, p['alpha'], USER_SUPPLIED, p['threshold'])
        raise ValueError(f"Unknown threshold method: {method}")

    def energy_threshold(self, N, Z, params=None):
        p = self._params(params)
        if p.get('energy_threshold') is not None:
            return float(p['energy_threshold'])
        return chi2_quantile(energy_dof(N, Z, p['energy_dof']), p['alpha'])

    def run_tests(self, y, Z, tests=(BASIC, ENERGY), params=None, **solver_params):
        """
        Run the requested tests on one observation.

        Returns:
            Dictionary test_kind -> TestOutcome; the energy test is skipped
            for epsilon-set nuisances
        """
        N = len(y)
        outcomes = {}
        if BASIC in tests:
            outcomes[BASIC] = basic_test(y, Z, self.basic_threshold(N, params), **solver_params)
        if ENERGY in tests:
            if Z.effective_kind() == EPS_SET:
                logger.info("Skipping energy test for %s", Z.describe())
            else:
                outcomes[ENERGY] = energy_test(y, Z, self.energy_threshold(N, Z, params))
        return outcomes


def create_detection_algorithms(table=None):
    """Factory function to create a DetectionAlgorithms instance."""
    return DetectionAlgorithms(table)
