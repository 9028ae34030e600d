"""Tests for the basic and energy tests and the DetectionAlgorithms wrapper."""

import math

import numpy as np
import pytest

from detection_algorithms import (
    ACCEPT_H0,
    BASIC,
    ENERGY,
    REJECT_H0,
    TestOutcome as Outcome,
    basic_test,
    create_detection_algorithms,
    energy_dof,
    energy_statistic,
    energy_test,
)
from harmonics.errors import DomainError, UnsupportedNuisance
from harmonics.frequencies import ModulatedSpec, ModulatedTerm, random_eps_signal, random_spec, sample_signal
from harmonics.nuisance import EPS_SET, SUBSPACE, ZERO, NuisanceSpec
from utils.noise import gaussian_noise, substream
from utils.quantiles import FORMULA_BOUND, MONTE_CARLO, USER_SUPPLIED, ThresholdTable, chi2_quantile, q_mc


def binomial_slack(p, n):
    return 3.0 * math.sqrt(p * (1.0 - p) / n)


class TestBasicTest:
    def test_ties_accept(self):
        y = np.ones(16)  # statistic is exactly 4
        outcome = basic_test(y, NuisanceSpec.zero(), 4.0)
        assert outcome.decision == ACCEPT_H0
        assert outcome.test_kind == BASIC

    def test_strict_rejection(self):
        outcome = basic_test(np.ones(16), NuisanceSpec.zero(), 3.99)
        assert outcome.decision == REJECT_H0
        assert outcome.rejected

    def test_nuisance_member_accepted(self):
        spec = ModulatedSpec((ModulatedTerm(1.3, (5.0,), (2.0,)),))
        y = sample_signal(spec, 128)
        outcome = basic_test(y, NuisanceSpec.subspace(spec.collection()), 3.0)
        assert outcome.decision == ACCEPT_H0
        assert outcome.certified

    def test_gap_certifies_decision(self):
        y = gaussian_noise(64, 3, 0)
        outcome = basic_test(y, NuisanceSpec.subspace([0.0, 0.0]), 3.0)
        assert outcome.solver_gap < abs(outcome.statistic - outcome.threshold)

    def test_threshold_must_be_positive(self):
        with pytest.raises(DomainError):
            basic_test(np.ones(8), NuisanceSpec.zero(), 0.0)

    def test_deterministic(self):
        y = gaussian_noise(48, 4, 0)
        Z = NuisanceSpec.eps_set([0.0], 0.01)
        assert basic_test(y, Z, 3.0) == basic_test(y, Z, 3.0)

    def test_false_alarm_rate_zero_nuisance(self):
        N, alpha, trials = 128, 0.05, 2000
        threshold = q_mc(N, alpha, 2000, seed=21)
        rejections = sum(
            basic_test(gaussian_noise(N, 22, i), NuisanceSpec.zero(), threshold).rejected
            for i in range(trials)
        )
        assert rejections / trials <= alpha + binomial_slack(alpha, trials)

    def test_false_alarm_rate_subspace_nuisance(self):
        N, alpha, trials = 64, 0.1, 300
        threshold = q_mc(N, alpha, 1000, seed=23)
        rejections = 0
        for i in range(trials):
            spec = random_spec(4, substream(24, "test-nuisance", i))
            Z = NuisanceSpec.subspace(spec.collection())
            y = 3.0 * sample_signal(spec, N) + gaussian_noise(N, 25, i)
            rejections += basic_test(y, Z, threshold).rejected
        assert rejections / trials <= alpha + binomial_slack(alpha, trials)

    def test_strong_signal_detected(self):
        N = 256
        threshold = q_mc(N, 0.01, 2000, seed=26)
        level = 6.0 * math.sqrt(math.log(N / 0.01) / N)
        detected = 0
        for i in range(20):
            x = sample_signal(random_spec(4, substream(27, "test-power", i)), N)
            x = 2.0 * level * x / np.max(np.abs(x))
            detected += basic_test(x + gaussian_noise(N, 28, i), NuisanceSpec.zero(), threshold).rejected
        assert detected >= 18

    @pytest.mark.slow
    def test_power_at_resolution_law(self):
        N, alpha = 512, 0.01
        threshold = q_mc(N, alpha, 100000, seed=1)
        level = 6.0 * math.sqrt(math.log(N / alpha) / N)
        trials = 500
        detected = 0
        for i in range(trials):
            x = sample_signal(random_spec(4, substream(2, "test-power-slow", i)), N)
            x = level * x / np.max(np.abs(x))
            detected += basic_test(x + gaussian_noise(N, 3, i), NuisanceSpec.zero(), threshold).rejected
        assert detected / trials >= 0.99 - binomial_slack(0.99, trials)

    @pytest.mark.slow
    @pytest.mark.parametrize("N", [128, 512])
    @pytest.mark.parametrize("kind", [ZERO, SUBSPACE, EPS_SET])
    def test_size_at_one_percent(self, N, kind):
        alpha, trials = 0.01, 2000
        threshold = q_mc(N, alpha, 100000, seed=4)
        kind_index = [ZERO, SUBSPACE, EPS_SET].index(kind)
        rejections = 0
        for i in range(trials):
            rng = substream(5, "test-size", kind_index, N, i)
            spec = random_spec(4, rng)
            w = spec.collection()
            if kind == ZERO:
                Z, u = NuisanceSpec.zero(), np.zeros(N)
            elif kind == SUBSPACE:
                Z, u = NuisanceSpec.subspace(w), sample_signal(spec, N)
            else:
                Z, u = NuisanceSpec.eps_set(w, 0.01), random_eps_signal(w, N, 0.01, rng)[w.d:]
            rejections += basic_test(u + gaussian_noise(N, 6, kind_index, N, i), Z, threshold).rejected
        assert rejections / trials <= 0.014


class TestEnergyTest:
    def test_zero_observation(self):
        outcome = energy_test(np.zeros(32), NuisanceSpec.zero(), chi2_quantile(32, 0.01))
        assert outcome.statistic == 0.0
        assert outcome.decision == ACCEPT_H0
        assert outcome.test_kind == ENERGY

    def test_subspace_statistic_is_projection_residual(self):
        spec = ModulatedSpec((ModulatedTerm(0.0, (4.0,), (0.0,)),))
        y = sample_signal(spec, 20) + gaussian_noise(20, 7, 0)
        Z = NuisanceSpec.subspace([0.0])
        expected = float(np.sum((y - y.mean()) ** 2))
        assert energy_statistic(y, Z) == pytest.approx(expected, rel=1e-10)

    def test_eps_set_unsupported(self):
        with pytest.raises(UnsupportedNuisance):
            energy_test(np.ones(8), NuisanceSpec.eps_set([0.0], 0.1), 10.0)

    def test_zero_width_eps_set_allowed(self):
        outcome = energy_test(np.ones(8), NuisanceSpec.eps_set([0.0], 0.0), 1.0)
        assert outcome.statistic == pytest.approx(0.0, abs=1e-20)

    def test_false_alarm_rate(self):
        N, alpha, trials = 256, 0.01, 4000
        threshold = chi2_quantile(N, alpha)
        rejections = sum(energy_test(gaussian_noise(N, 8, i), NuisanceSpec.zero(), threshold).rejected
                         for i in range(trials))
        assert rejections / trials <= alpha + binomial_slack(alpha, trials)

    def test_reduced_degrees_of_freedom(self):
        N, alpha, trials = 64, 0.05, 2000
        Z = NuisanceSpec.subspace([0.3, -0.3])
        threshold = chi2_quantile(energy_dof(N, Z, "reduced"), alpha)
        rejections = 0
        for i in range(trials):
            nuisance = 5.0 * np.cos(0.3 * np.arange(N) + i)
            rejections += energy_test(nuisance + gaussian_noise(N, 9, i), Z, threshold).rejected
        assert rejections / trials <= alpha + binomial_slack(alpha, trials)

    def test_dof_rules(self):
        Z = NuisanceSpec.subspace([0.3, -0.3, 0.0])
        assert energy_dof(100, Z) == 100
        assert energy_dof(100, Z, "reduced") == 97
        assert energy_dof(100, NuisanceSpec.zero(), "reduced") == 100
        with pytest.raises(ValueError):
            energy_dof(100, Z, "half")


class TestDetectionAlgorithms:
    def test_default_params(self):
        detectors = create_detection_algorithms()
        assert detectors.default_params['alpha'] == 0.01
        assert detectors.default_params['threshold_method'] == MONTE_CARLO
        assert isinstance(detectors.table, ThresholdTable)

    def test_thresholds_are_cached(self):
        table = ThresholdTable()
        detectors = create_detection_algorithms(table)
        params = {'alpha': 0.1, 'threshold_trials': 500, 'threshold_seed': 3}
        first = detectors.basic_threshold(64, params)
        assert len(table) == 1
        assert detectors.basic_threshold(64, params) == first

    def test_user_threshold(self):
        detectors = create_detection_algorithms()
        params = {'threshold_method': USER_SUPPLIED, 'threshold': 2.5}
        assert detectors.basic_threshold(64, params) == 2.5
        with pytest.raises(ValueError):
            detectors.basic_threshold(64, {'threshold_method': USER_SUPPLIED})

    def test_run_tests_both(self):
        detectors = create_detection_algorithms()
        y = gaussian_noise(64, 10, 0)
        outcomes = detectors.run_tests(y, NuisanceSpec.zero(), params={'threshold_method': FORMULA_BOUND})
        assert set(outcomes) == {BASIC, ENERGY}
        assert all(isinstance(o, Outcome) for o in outcomes.values())
        assert outcomes[ENERGY].threshold == pytest.approx(chi2_quantile(64, 0.01))

    def test_run_tests_skips_energy_for_eps_sets(self):
        detectors = create_detection_algorithms()
        y = gaussian_noise(32, 11, 0)
        outcomes = detectors.run_tests(y, NuisanceSpec.eps_set([0.0], 0.01),
                                       params={'threshold_method': FORMULA_BOUND})
        assert set(outcomes) == {BASIC}

    def test_outcome_dict(self):
        outcome = energy_test(np.ones(4), NuisanceSpec.zero(), 10.0)
        data = outcome.to_dict()
        assert data['decision'] == ACCEPT_H0
        assert data['statistic'] == 4.0
        assert data['solver_gap'] is None
