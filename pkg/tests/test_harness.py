"""Tests for experiment configuration, the power sweep and the shift experiments.

The default suite runs both protocols at toy scale; the acceptance-scale runs
are marked slow.
"""

import math
from collections import Counter
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

import experiment_harness
from experiment_harness import (
    TABLE1_COLUMNS,
    TABLE2_COLUMNS,
    ExperimentConfig,
    bad_signal,
    empirical_risk,
    eps_condition,
    format_rho_star,
    get_preset,
    load_presets,
    make_observation,
    nuisance_for_problem,
    resolution_law,
    rho_star,
    table1_experiment,
    table2_sweep,
    thresholds_for,
)
from harmonics.errors import BisectionFailed, DomainError, NotConverged
from harmonics.frequencies import make_frequency_collection, window_basis
from harmonics.nuisance import EPS_SET, SUBSPACE, ZERO, NuisanceSpec
from utils.persistence import records_to_csv
from utils.quantiles import FORMULA_BOUND, USER_SUPPLIED, ThresholdTable


def toy_sweep_config(**overrides):
    data = {'problem': 'P1', 'N': 32, 'trials': 20, 'alpha': 0.1, 'rho_max': 2.0, 'rho_step': 0.5,
            'threshold_trials': 1000, 'seed': 3}
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


def toy_shift_config(**overrides):
    data = {'problem': 'N1', 'N': 32, 'd_s': 2, 'd_n': 2, 'eps_n': 0.001, 'alpha': 0.1,
            'experiments': 2, 'rejections_required': 3, 'bisection_steps': 4,
            'threshold_trials': 1000, 'seed': 5}
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


class TestConfig:
    def test_default_grid(self):
        grid = ExperimentConfig().grid()
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(4.0)
        assert len(grid) == 81

    def test_explicit_grid(self):
        cfg = ExperimentConfig(rho_grid=[0.0, 0.5, 1.5])
        np.testing.assert_array_equal(cfg.grid(), [0.0, 0.5, 1.5])

    @pytest.mark.parametrize("changes", [
        {'alpha': 0.5}, {'alpha': 0.0}, {'trials': 0}, {'N': 1}, {'eps_n': -1.0},
        {'rho_grid': [0.0, 0.0]},
    ])
    def test_invalid(self, changes):
        with pytest.raises(DomainError):
            ExperimentConfig(**changes)

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            ExperimentConfig(problem="P3")

    def test_unknown_keys(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({'problem': 'P1', 'colour': 'red'})

    def test_dict_round_trip(self):
        cfg = toy_sweep_config(rho_grid=[0.0, 1.0])
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_presets(self):
        presets = load_presets()
        assert 'table2-256' in presets
        cfg = get_preset('table1-128', trials=None, seed=9)
        assert cfg.problem == 'N1'
        assert cfg.N == 128
        assert cfg.seed == 9

    def test_missing_presets_file_falls_back(self, tmp_path):
        presets = load_presets(tmp_path / "missing.json")
        assert 'table1-512' in presets
        assert presets['table1-512']['rejections_required'] == 15

    def test_shift_presets_set_rejection_count(self):
        for name, preset in load_presets().items():
            if preset['problem'] == 'N1':
                assert 'trials' not in preset, name
                assert get_preset(name).rejections_required == 15

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            get_preset('table3')


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


class TestBuildingBlocks:
    def test_nuisance_per_problem(self):
        w = make_frequency_collection([0.2, -0.2])
        assert nuisance_for_problem('P1', w, 0.1).kind == ZERO
        assert nuisance_for_problem('P2', w, 0.1).kind == SUBSPACE
        assert nuisance_for_problem('N1', w, 0.1).kind == EPS_SET

    def test_observation_noise_is_reproducible(self):
        x = np.zeros(16)
        np.testing.assert_array_equal(make_observation(x, 1, 2), make_observation(x, 1, 2))
        assert not np.array_equal(make_observation(x, 1, 2), make_observation(x, 1, 3))

    def test_resolution_law(self):
        assert resolution_law(128, 0.01) == pytest.approx(6 * math.sqrt(math.log(12800) / 128))

    def test_eps_condition(self):
        value = eps_condition(4, 1, 0.1, 1, 0.0, 2.0)
        assert value['value'] == pytest.approx(0.8)
        assert value['ratio_to_threshold'] == pytest.approx(0.4)

    def test_thresholds(self):
        cfg = toy_sweep_config(threshold_method=FORMULA_BOUND)
        basic, energy = thresholds_for(cfg, ThresholdTable())
        assert basic > 0 and energy > 0

    def test_user_threshold(self):
        cfg = toy_sweep_config(threshold_method=USER_SUPPLIED, threshold=2.0)
        assert thresholds_for(cfg)[0] == 2.0


class TestBadSignal:
    def test_constant(self):
        np.testing.assert_allclose(bad_signal(10, 0), np.ones(10))

    def test_cubic_peak_at_last_index(self):
        z = bad_signal(1024, 3)
        assert np.argmax(np.abs(z)) == 1023
        assert z[-1] == pytest.approx(1.0)
        assert np.max(np.abs(z)) == pytest.approx(1.0)

    def test_ratio_matches_exhaustive_search(self):
        N, degree = 1024, 3
        basis = window_basis(make_frequency_collection([0.0] * (degree + 1)), N)
        best = 0.0
        for t in range(N):
            z = basis @ basis[t]
            best = max(best, np.max(np.abs(z)) / np.linalg.norm(z))
        z = bad_signal(N, degree)
        assert np.max(np.abs(z)) / np.linalg.norm(z) == pytest.approx(best, rel=1e-10)

    def test_is_polynomial(self):
        z = bad_signal(200, 2)
        t = np.linspace(-1, 1, 200)
        fit = np.polynomial.polynomial.polyfit(t, z, 2)
        np.testing.assert_allclose(np.polynomial.polynomial.polyval(t, fit), z, atol=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            bad_signal(3, 3)


class TestSummaries:
    def test_rho_star(self):
        records = pd.DataFrame({'rho': [0.0, 0.5, 1.0], 'p_basic': [0.01, 0.995, 1.0]})
        assert rho_star(records, 'p_basic', 0.01) == 0.5
        assert rho_star(records.iloc[:1], 'p_basic', 0.01) is None

    def test_rho_star_label(self):
        assert format_rho_star(0.0) == "0.00"
        assert format_rho_star(1.1) == "1.10"
        assert format_rho_star(None) == "not reached"

    def test_empirical_risk(self):
        records = pd.DataFrame({'rho': [0.0, 1.0], 'p_basic': [0.02, 0.9], 'p_energy': [0.01, 0.5]})
        risk = empirical_risk(records, 0.01)
        assert risk['risk_basic'].tolist() == pytest.approx([0.98, 0.1])
        assert risk['eps0_energy'].tolist() == [0.01, 0.01]


# ---------------------------------------------------------------------------
# Power sweep
# ---------------------------------------------------------------------------


class TestPowerSweep:
    def test_output_format(self):
        cfg = toy_sweep_config()
        records = table2_sweep(cfg)
        assert list(records.columns) == TABLE2_COLUMNS
        assert len(records) == len(cfg.grid())
        assert records['p_basic'].between(0, 1).all()
        assert records_to_csv(records).splitlines()[0] == "rho,p_basic,p_energy"

    def test_reproducible(self):
        cfg = toy_sweep_config()
        assert records_to_csv(table2_sweep(cfg)) == records_to_csv(table2_sweep(cfg))

    def test_workers_do_not_change_results(self):
        cfg = toy_sweep_config(trials=8)
        serial = table2_sweep(cfg, workers=1)
        parallel = table2_sweep(cfg, workers=2)
        pd.testing.assert_frame_equal(serial[TABLE2_COLUMNS], parallel[TABLE2_COLUMNS])

    def test_power_grows_with_rho(self):
        records = table2_sweep(toy_sweep_config(trials=40, rho_max=6.0, rho_step=3.0))
        assert records['p_energy'].iloc[-1] >= records['p_energy'].iloc[0]
        assert records['p_basic'].iloc[-1] > records['p_basic'].iloc[0]

    def test_bad_signal_mode(self):
        records = table2_sweep(toy_sweep_config(signal_mode="bad", trials=10))
        assert records.attrs['signal_mode'] == "bad"

    def test_wrong_problem(self):
        with pytest.raises(ValueError):
            table2_sweep(toy_shift_config())

    @pytest.mark.slow
    def test_resolution_at_256(self):
        cfg = get_preset('table2-256', seed=1)
        records = table2_sweep(cfg, workers=4)
        assert records.attrs['rho_star_basic'] == pytest.approx(1.10, abs=0.10)
        assert records.attrs['rho_star_energy'] == pytest.approx(1.35, abs=0.10)
        slack = 3 * math.sqrt(0.01 * 0.99 / cfg.trials)
        assert records['p_basic'].iloc[0] <= 0.01 + slack
        assert records['p_energy'].iloc[0] <= 0.01 + slack

    @pytest.mark.slow
    def test_basic_beats_energy_at_4096(self):
        records = table2_sweep(get_preset('table2-4096', seed=1), workers=4)
        assert records.attrs['rho_star_basic'] < records.attrs['rho_star_energy']
        assert records.attrs['rho_star_basic'] <= 0.40
        assert records.attrs['rho_star_energy'] >= 0.55


# ---------------------------------------------------------------------------
# Shift experiments
# ---------------------------------------------------------------------------


class TestShiftExperiments:
    def test_output_format(self):
        cfg = toy_shift_config()
        records = table1_experiment(cfg)
        assert list(records.columns[:3]) == TABLE1_COLUMNS
        assert len(records) == cfg.experiments
        assert (records['resolution'] > 0).all()
        assert (records['snr'] > 0).all()
        assert records.attrs['experiments'] == cfg.experiments
        assert (records['uncertified'] >= 0).all()
        assert records.attrs['uncertified_draws'] == int(records['uncertified'].sum())

    def test_reproducible(self):
        cfg = toy_shift_config(experiments=1)
        a = table1_experiment(cfg)
        b = table1_experiment(cfg)
        pd.testing.assert_frame_equal(a[TABLE1_COLUMNS], b[TABLE1_COLUMNS])

    def test_bracket_exhausted(self):
        cfg = toy_shift_config(experiments=1, lambda_max=0.05)
        with pytest.raises(BisectionFailed):
            table1_experiment(cfg)

    def test_wrong_problem(self):
        with pytest.raises(ValueError):
            table1_experiment(toy_sweep_config())

    def test_uncertified_draws_are_counted(self, monkeypatch):
        def budget_spent(y, Z, threshold):
            raise NotConverged("budget spent", report=SimpleNamespace(value=threshold + 1.0))

        monkeypatch.setattr(experiment_harness, "basic_test", budget_spent)
        tally = Counter()
        cfg = toy_shift_config(rejections_required=3)
        assert experiment_harness._rejects_every_time(cfg, 0, np.zeros(32), NuisanceSpec.zero(), 2.0, tally)
        assert tally['uncertified'] == 3

    def test_unconverged_draw_below_threshold_accepts(self, monkeypatch):
        def budget_spent(y, Z, threshold):
            raise NotConverged("budget spent", report=SimpleNamespace(value=threshold - 1.0))

        monkeypatch.setattr(experiment_harness, "basic_test", budget_spent)
        tally = Counter()
        cfg = toy_shift_config(rejections_required=3)
        assert not experiment_harness._rejects_every_time(cfg, 0, np.zeros(32), NuisanceSpec.zero(), 2.0, tally)
        assert tally['uncertified'] == 1

    def test_missing_report_propagates(self, monkeypatch):
        def budget_spent(y, Z, threshold):
            raise NotConverged("budget spent")

        monkeypatch.setattr(experiment_harness, "basic_test", budget_spent)
        with pytest.raises(NotConverged):
            experiment_harness._rejects_every_time(toy_shift_config(), 0, np.zeros(32), NuisanceSpec.zero(),
                                                   2.0, Counter())


    @pytest.mark.slow
    def test_scaling_law(self):
        scaled = []
        for N in (128, 512, 1024):
            records = table1_experiment(get_preset(f'table1-{N}', seed=1), workers=4)
            scaled.append(records.attrs['mean_resolution_x_sqrtN'])
            assert 1 / 1.5 <= records.attrs['mean_to_law'] <= 1.5
            assert 8.0 <= records.attrs['mean_snr_x_sqrtN'] <= 14.0
        assert 14.0 <= scaled[0] <= 22.0
        assert 13.0 <= scaled[2] <= 21.0
        assert max(scaled) / min(scaled) <= 1.3 / 0.7
