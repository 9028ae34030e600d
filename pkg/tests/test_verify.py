"""Tests for the constructive checks: divisible polynomials, decompositions and the concentration ratio."""

import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as nppoly

from harmonics.errors import DomainError, MTooSmall, NotFeasible, ZeroSignal
from harmonics.frequencies import apply_fd, char_poly, make_frequency_collection, random_spec, sample_signal
from lemma_verification import (
    autoconvolution_identity,
    decompose_extended,
    eps_decompose,
    factor_bounds,
    lemma_constant,
    lemma_construct,
    lemma_factor,
    lemma_m_min,
    mainprop_ratio,
    concentration_chain,
    random_feasible_instance,
    run_all_suites,
    run_factor_suite,
    run_divisible_suite,
    run_autoconvolution_suite,
    run_decomposition_suite,
    run_concentration_suite,
)
from utils.noise import substream


class TestDegreeBudget:
    def test_small_values(self):
        assert lemma_m_min(1) == 10
        assert lemma_m_min(4) == 160

    def test_formula(self):
        for d in range(1, 12):
            assert lemma_m_min(d) == d * math.ceil(5 * d * max(2.0, math.log(2 * d) / 2))

    def test_eight(self):
        # max(2, ln(16)/2) = 2
        assert lemma_m_min(8) == 640

    def test_domain(self):
        with pytest.raises(DomainError):
            lemma_m_min(0)

    def test_constant(self):
        assert lemma_constant(1) == pytest.approx(3 * math.e * math.sqrt(math.log(2)))


class TestFactors:
    def test_roots(self):
        for omega in (0.0, 0.7, math.pi):
            lam = np.exp(-1j * omega)
            p, r = lemma_factor(lam, 0.2, 10)
            assert abs(nppoly.polyval(0.0, p) - 1.0) <= 1e-10
            assert abs(nppoly.polyval(1.0 / lam, p)) <= 1e-10
            np.testing.assert_allclose(nppoly.polymul([1.0, -lam], r), p)

    def test_norm_bounds(self):
        n, theta = 40, 2.0
        bounds = factor_bounds(n, theta)
        p, _ = lemma_factor(np.exp(0.3j), theta / n, n)
        circle = np.exp(2j * np.pi * np.arange(4096) / 4096)
        assert np.max(np.abs(nppoly.polyval(circle, p))) <= bounds['sup_bound']
        deviation = p.copy()
        deviation[0] -= 1.0
        assert np.linalg.norm(deviation) <= bounds['l2_bound']


class TestLemmaConstruct:
    def test_single_zero_frequency(self):
        witness = lemma_construct(make_frequency_collection([0.0]), 10)
        assert witness.q_norm <= 3 * math.e * math.sqrt(math.log(2)) / math.sqrt(10)
        assert witness.within_bound
        assert witness.q[0] == 0.0
        assert witness.r[0] == pytest.approx(1.0)

    def test_fourfold_pi(self):
        w = make_frequency_collection([math.pi] * 4)
        witness = lemma_construct(w, 160)
        assert witness.imag_residue <= 1e-10
        assert witness.divisibility_residual <= 1e-8
        assert len(witness.q) == 161
        assert len(witness.r) <= 160 - 4 + 1

    def test_divisibility_by_hand(self):
        w = make_frequency_collection([0.5, -0.5])
        witness = lemma_construct(w, lemma_m_min(2))
        lhs = -witness.q
        lhs[0] += 1.0
        rhs = nppoly.polymul(char_poly(w).coeffs, witness.r)
        width = max(len(lhs), len(rhs))
        np.testing.assert_allclose(np.pad(lhs, (0, width - len(lhs))),
                                   np.pad(rhs, (0, width - len(rhs))), atol=1e-8)

    def test_budget_too_small(self):
        with pytest.raises(MTooSmall):
            lemma_construct(make_frequency_collection([0.0]), 9)

    def test_empty_collection(self):
        with pytest.raises(DomainError):
            lemma_construct(make_frequency_collection([]), 10)

    def test_norm_shrinks_with_budget(self):
        w = make_frequency_collection([1.0, -1.0])
        m0 = lemma_m_min(2)
        small = lemma_construct(w, m0).q_norm
        large = lemma_construct(w, 4 * m0).q_norm
        assert large / small <= 0.6


class TestAutoconvolution:
    def test_real_coefficients(self):
        lhs, rhs = autoconvolution_identity(np.array([1.0, -2.0, 0.5]), 9)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        assert rhs == pytest.approx(3.0 * 5.25)

    def test_support_too_long(self):
        with pytest.raises(DomainError):
            autoconvolution_identity(np.ones(6), 9)


class TestConcentrationRatio:
    def test_ones(self):
        assert mainprop_ratio(np.ones(64)) == pytest.approx(1.0)

    def test_floor_on_arbitrary_windows(self):
        rng = substream(0, "test-floor")
        for _ in range(1000):
            N = int(rng.integers(2, 200))
            assert mainprop_ratio(rng.standard_normal(N)) >= 1.0 / N

    def test_zero_window(self):
        with pytest.raises(ZeroSignal):
            mainprop_ratio(np.zeros(8))

    def test_chain_on_short_window_uses_floor(self):
        spec = random_spec(2, substream(1, "test-chain-short"))
        chain = concentration_chain(sample_signal(spec, 32), spec.collection())
        assert not chain['applicable']
        assert chain['holds']

    def test_chain_holds_where_applicable(self):
        spec = random_spec(2, substream(2, "test-chain"))
        s = sample_signal(spec, 256)
        chain = concentration_chain(s, spec.collection())
        assert chain['applicable']
        assert chain['identity_residual'] <= 1e-6
        assert chain['h_l1'] <= chain['l1_bound'] * (1 + 1e-8)
        assert chain['holds']

    def test_reversed_peak(self):
        s = np.exp(-0.05 * np.arange(64))
        chain = concentration_chain(s, make_frequency_collection([]))
        assert chain['reversed']
        assert chain['M'] == 63


class TestEpsDecompose:
    def test_zero_eps_returns_input(self):
        w = make_frequency_collection([0.0])
        w_ext = np.full(11, 2.0)
        s, z = eps_decompose(w_ext, w, 0.0)
        np.testing.assert_array_equal(s, w_ext[1:])
        np.testing.assert_array_equal(z, np.zeros(10))

    def test_constant_residual_on_first_differences(self):
        w = make_frequency_collection([0.0])
        eps, N = 0.01, 50
        # x_{-1} = 0 and x_t - x_{t-1} = eps: a linear ramp
        w_ext = eps * np.arange(N + 1)
        s_ext, z = decompose_extended(w_ext, w, eps)
        np.testing.assert_allclose(z, eps * (np.arange(N) + 1), atol=1e-12)
        np.testing.assert_allclose(s_ext, np.zeros(N + 1), atol=1e-12)
        assert np.max(np.abs(z)) <= N * eps

    def test_random_feasible_instances(self):
        for k in range(30):
            w, w_ext, eps = random_feasible_instance(7, k)
            d = w.d
            bound = max(eps, float(np.max(np.abs(apply_fd(char_poly(w), w_ext)))))
            s_ext, z = decompose_extended(w_ext, w, bound)
            N = len(z)
            scale = max(1.0, float(np.max(np.abs(w_ext))))
            np.testing.assert_allclose(s_ext[d:] + z, w_ext[d:], atol=1e-8 * scale)
            assert np.max(np.abs(z)) <= N ** d * bound
            assert np.max(np.abs(apply_fd(char_poly(w), s_ext))) <= 1e-8 * max(1.0, np.max(np.abs(s_ext)))

    def test_infeasible_input(self):
        w = make_frequency_collection([0.0])
        with pytest.raises(NotFeasible):
            eps_decompose(np.arange(10.0), w, 0.5)


class TestSuites:
    def test_divisible_reduced(self):
        assert run_divisible_suite(0, dims=range(1, 4), collections=2)['passed']

    def test_factor_reduced(self):
        assert run_factor_suite(0, trials=2)['passed']

    def test_autoconvolution_reduced(self):
        assert run_autoconvolution_suite(0, trials=5)['passed']

    def test_decomposition_reduced(self):
        assert run_decomposition_suite(0, instances=10)['passed']

    def test_concentration_reduced(self):
        report = run_concentration_suite(0, windows=50, samples=20, chain_samples=2)
        assert report['passed']
        assert report['empirical_min_ratio'] > 0

    def test_report_structure(self):
        report = run_all_suites(3, scale="reduced", suites=["autoconvolution", "factor"])
        assert set(report) == {'seed', 'scale', 'autoconvolution', 'factor', 'passed'}
        assert report['passed']

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_all_suites(0, suites=["unknown"])

    @pytest.mark.slow
    def test_full_scale(self):
        assert run_all_suites(0, scale="full")['passed']
