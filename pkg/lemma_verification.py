"""
Lemma Verification Module

Executable checks of the constructive mathematics behind the basic test:

- Divisible polynomials with small l2 norm (1 - q = p_w * r, |q|_2 <= C1(d)/sqrt(m))
- The autoconvolution identity ||F_N h||_1 = sqrt(N) ||g||_2^2
- Decomposition of an eps-set member into a subspace member plus a small part
- The spectral concentration ratio ||F_N s||_inf / (sqrt(N) ||s||_inf) and the
  chain of inequalities that bounds it from below

Each suite returns a JSON-ready dictionary with pass/fail flags, worst residuals
and recorded empirical constants.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as nppoly
from scipy import signal as spsignal

from harmonics.errors import DomainError, MTooSmall, NotFeasible, ZeroSignal
from harmonics.frequencies import (
    apply_fd,
    char_poly,
    random_eps_signal,
    random_spec,
    sample_signal,
)
from harmonics.spectrum import spectral_inf_norm, spectral_l1_norm
from utils.noise import substream

logger = logging.getLogger(__name__)

IMAG_TOL = 1e-10
DIVISIBILITY_TOL = 1e-8


def lemma_m_min(d):
    """Smallest admissible degree budget m(d) = d * ceil(5 d max(2, ln(2d)/2))."""
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d}")
    d = int(d)
    return d * math.ceil(5 * d * max(2.0, 0.5 * math.log(2 * d)))


def lemma_constant(d):
    """C1(d) = 3 e d^(3/2) sqrt(ln 2d)."""
    return 3.0 * math.e * d ** 1.5 * math.sqrt(math.log(2 * d))


def lemma_factor(lam, eps, n):
    """
    Coefficients of p_n(zeta; lam, eps) and of its cofactor.

    p_n(zeta) = (1 - lam zeta) * sum_{l<n} [(1 - eps) lam zeta]^l (1 - l/n).

    Returns:
        (p_coeffs, r_coeffs), complex, constant term first; p = (1 - lam zeta) r
    """
    delta = 1.0 - eps
    powers = (delta * lam) ** np.arange(n)
    r_coeffs = powers * (1.0 - np.arange(n) / n)
    p_coeffs = nppoly.polymul(np.array([1.0, -lam]), r_coeffs)
    return p_coeffs, r_coeffs


def factor_bounds(n, theta):
    """Bounds on a factor with eps = theta / n: sup norm on the unit circle and |1 - p_n|_2."""
    eps = theta / n
    return {
        'sup_bound': math.exp(theta / (n - theta) + 1.0 / (2 * n) + 0.5 * math.exp(-2 * theta)),
        'l2_bound': 2.0 * math.sqrt(max(eps, 1.0 / n)),
    }


@dataclass(frozen=True)
class LemmaWitness:
    """Real polynomials q (q(0) = 0, deg <= m) and r (r(0) = 1, deg <= m - d) with 1 - q = p_w r."""

    q: np.ndarray
    r: np.ndarray
    m: int
    d: int
    n: int
    theta: float
    eps: float
    bound: float
    imag_residue: float
    divisibility_residual: float

    @property
    def q_norm(self):
        return float(np.linalg.norm(self.q))

    @property
    def within_bound(self):
        return self.q_norm <= self.bound


def _realify(coeffs, label):
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    residue = float(np.max(np.abs(coeffs.imag))) / scale
    if residue > IMAG_TOL:
        logger.warning("%s has imaginary residue %.3e", label, residue)
    return coeffs.real.copy(), residue


def lemma_construct(w, m):
    """
    Build the divisible polynomial pair for a symmetric collection.

    Args:
        w: FrequencyCollection with d >= 1
        m: Degree budget, at least lemma_m_min(d)

    Returns:
        LemmaWitness
    """
    d = w.d
    if d < 1:
        raise DomainError("The construction needs a non-empty frequency collection")
    m_min = lemma_m_min(d)
    if m < m_min:
        raise MTooSmall(f"m={m} is below m({d})={m_min}")

    n = int(m) // d
    theta = max(2.0, 0.5 * math.log(2 * d))
    eps = theta / n

    product = np.array([1.0 + 0.0j])
    cofactor = np.array([1.0 + 0.0j])
    for omega in w.freqs:
        p_coeffs, r_coeffs = lemma_factor(np.exp(-1j * omega), eps, n)
        product = nppoly.polymul(product, p_coeffs)
        cofactor = nppoly.polymul(cofactor, r_coeffs)

    q_complex = -product
    q_complex[0] = 0.0
    q, q_residue = _realify(q_complex, "q")
    r, r_residue = _realify(cofactor, "r")
    q = np.pad(q, (0, int(m) + 1 - len(q)))
    r = r[: int(m) - d + 1]

    lhs = -q.copy()
    lhs[0] += 1.0
    rhs = nppoly.polymul(char_poly(w).coeffs, r)
    width = max(len(lhs), len(rhs))
    diff = np.pad(lhs, (0, width - len(lhs))) - np.pad(rhs, (0, width - len(rhs)))
    residual = float(np.max(np.abs(diff))) / max(1.0, float(np.max(np.abs(rhs))))

    return LemmaWitness(
        q=q, r=r, m=int(m), d=d, n=n, theta=theta, eps=eps,
        bound=lemma_constant(d) / math.sqrt(m),
        imag_residue=max(q_residue, r_residue),
        divisibility_residual=residual,
    )


def autoconvolution_identity(g, N):
    """
    Both sides of ||F_N h||_1 = sqrt(N) ||g||_2^2 for h the autoconvolution of g.

    Args:
        g: Coefficients g_0..g_m with m <= (N - 1) / 2 (real or complex)
        N: Window length

    Returns:
        (lhs, rhs)
    """
    g = np.asarray(g)
    m = len(g) - 1
    if 2 * m > N - 1:
        raise DomainError(f"Support m={m} exceeds (N-1)/2 for N={N}")
    h = np.zeros(N, dtype=np.result_type(g, float))
    h[: 2 * m + 1] = np.convolve(g, g)
    return spectral_l1_norm(h), math.sqrt(N) * float(np.vdot(g, g).real)


def mainprop_ratio(s):
    """||F_N s||_inf / (sqrt(N) ||s||_inf) for a window s."""
    s = np.asarray(s, dtype=float)
    peak = float(np.max(np.abs(s)))
    if peak == 0.0:
        raise ZeroSignal("Spectral concentration ratio is undefined for a zero window")
    return spectral_inf_norm(s) / (math.sqrt(len(s)) * peak)


def concentration_chain(s, w):
    """
    Recompute the lower-bound chain for a window s of a member of S[w].

    With M the index of the peak (the window is reversed when M < (N-1)/2),
    m = floor((N-1)/4) and q from lemma_construct(w, m), q+ = q^2 satisfies
    s_M = sum_i q+_i s_{M-i}; the vector h carrying q+ gives
    ||F_N s||_inf >= ||s||_inf / ||F_N h||_1 and ||F_N h||_1 <= sqrt(N) |q|_2^2.
    Without an admissible m only the unconditional 1/N floor is reported.

    Returns:
        Dictionary of the chain's quantities; 'holds' is True when the ratio
        clears every bound that applies
    """
    s = np.asarray(s, dtype=float)
    N = len(s)
    ratio = mainprop_ratio(s)
    M = int(np.argmax(np.abs(s)))
    reversed_window = M < (N - 1) / 2
    if reversed_window:
        # a reversed member of S[w] lies in S of the negated collection, which is w again
        s = s[::-1]
        M = N - 1 - M

    m = (N - 1) // 4
    result = {
        'N': N, 'd': w.d, 'M': M, 'reversed': reversed_window, 'm': m,
        'ratio': ratio, 'floor': 1.0 / N, 'applicable': False,
    }
    if w.d == 0 or m < lemma_m_min(w.d):
        result['holds'] = ratio >= result['floor'] * (1 - 1e-12)
        return result

    witness = lemma_construct(w, m)
    q_plus = nppoly.polymul(witness.q, witness.q)[: 2 * m + 1]
    lags = np.arange(1, 2 * m + 1)
    predicted = float(np.dot(q_plus[1:], s[M - lags]))
    h = np.zeros(N)
    h[M - lags] = q_plus[1:]
    h_l1 = spectral_l1_norm(h)
    peak = float(np.max(np.abs(s)))

    result.update(
        applicable=True,
        q_norm=witness.q_norm,
        identity_residual=abs(s[M] - predicted) / peak,
        h_l1=h_l1,
        l1_bound=math.sqrt(N) * witness.q_norm ** 2,
        chain_bound=1.0 / (math.sqrt(N) * h_l1),
        lemma_bound=m / (lemma_constant(w.d) ** 2 * N),
    )
    result['holds'] = (
        result['identity_residual'] <= 1e-6
        and h_l1 <= result['l1_bound'] * (1 + 1e-8)
        and ratio >= max(result['floor'], result['chain_bound']) * (1 - 1e-9)
    )
    return result


def decompose_extended(w_ext, w, eps):
    """
    Split an eps-set member into a subspace part and a causally driven part.

    Returns:
        (s_ext, z) where s_ext covers t = -d..N-1 and is annihilated by
        p_w(Delta) on the window, and z covers t = 0..N-1
    """
    p = char_poly(w)
    d = w.d
    w_ext = np.asarray(w_ext, dtype=float)
    if len(w_ext) <= d:
        raise DomainError(f"Extended window must be longer than d={d}")
    N = len(w_ext) - d
    residual = apply_fd(p, w_ext)
    worst = float(np.max(np.abs(residual), initial=0.0))
    slack = 1e-9 * eps + 1e-12 * max(1.0, float(np.max(np.abs(w_ext))))
    if worst > eps + slack:
        raise NotFeasible(f"Finite-difference residual {worst:.6g} exceeds eps={eps:.6g}")
    if eps == 0.0:
        return w_ext.copy(), np.zeros(N)

    # chi = gamma(1) * ... * gamma(d) * r+, one geometric filter per frequency
    chi = residual.astype(complex)
    for omega in w.freqs:
        chi = spsignal.lfilter([1.0], [1.0, -np.exp(1j * omega)], chi)
    scale = max(1.0, float(np.max(np.abs(chi))))
    residue = float(np.max(np.abs(chi.imag))) / scale
    if residue > 1e-9:
        logger.warning("Causal response has imaginary residue %.3e", residue)
    z = chi.real
    s_ext = w_ext - np.concatenate([np.zeros(d), z])
    return s_ext, z


def eps_decompose(w_ext, w, eps):
    """
    Decompose w = s + z on the window with s in S[w] and ||z||_inf <= N^d eps.

    Args:
        w_ext: Values w_{-d}, ..., w_{N-1}
        w: FrequencyCollection of size d
        eps: Bound on the finite-difference residual of w_ext

    Returns:
        (s, z), both windows of length N

    Raises:
        NotFeasible: if |p_w(Delta) w| exceeds eps somewhere on the window
    """
    s_ext, z = decompose_extended(w_ext, w, eps)
    return s_ext[w.d:], z


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _random_collection(d, rng):
    return random_spec(d, rng).collection()


def run_divisible_suite(seed, dims=range(1, 7), collections=20, multiples=(1, 2, 4)):
    """Divisibility, bound and 1/sqrt(m) shrinkage over random collections."""
    worst_residual = 0.0
    worst_bound_ratio = 0.0
    worst_shrink = 0.0
    worst_imag = 0.0
    for d in dims:
        m0 = lemma_m_min(d)
        for k in range(collections):
            w = _random_collection(d, substream(seed, "divisible", d, k))
            norms = []
            for factor in multiples:
                witness = lemma_construct(w, factor * m0)
                worst_residual = max(worst_residual, witness.divisibility_residual)
                worst_bound_ratio = max(worst_bound_ratio, witness.q_norm / witness.bound)
                worst_imag = max(worst_imag, witness.imag_residue)
                norms.append(witness.q_norm)
            if len(norms) > 1 and norms[0] > 0:
                worst_shrink = max(worst_shrink, norms[-1] / norms[0])
    passed = (worst_residual <= DIVISIBILITY_TOL and worst_bound_ratio <= 1.0
              and worst_imag <= IMAG_TOL and worst_shrink <= 0.6)
    return {
        'passed': bool(passed),
        'worst_divisibility_residual': worst_residual,
        'worst_norm_to_bound': worst_bound_ratio,
        'worst_imag_residue': worst_imag,
        'worst_shrink_ratio': worst_shrink,
    }


def run_factor_suite(seed, sizes=(10, 40, 160), trials=10, grid=4096):
    """Root conditions and norm bounds of single factors on a dense unit-circle grid."""
    circle = np.exp(2j * np.pi * np.arange(grid) / grid)
    worst_roots = 0.0
    sup_ok = l2_ok = True
    rng = substream(seed, "factor")
    for n in sizes:
        theta = 2.0
        bounds = factor_bounds(n, theta)
        for _ in range(trials):
            lam = np.exp(1j * rng.uniform(0.0, 2 * np.pi))
            p_coeffs, _ = lemma_factor(lam, theta / n, n)
            worst_roots = max(worst_roots, abs(nppoly.polyval(0.0, p_coeffs) - 1.0),
                              abs(nppoly.polyval(1.0 / lam, p_coeffs)))
            sup_ok &= float(np.max(np.abs(nppoly.polyval(circle, p_coeffs)))) <= bounds['sup_bound']
            deviation = p_coeffs.copy()
            deviation[0] -= 1.0
            l2_ok &= float(np.linalg.norm(deviation)) <= bounds['l2_bound']
    return {
        'passed': bool(worst_roots <= 1e-10 and sup_ok and l2_ok),
        'worst_root_residual': worst_roots,
        'sup_bound_holds': bool(sup_ok),
        'l2_bound_holds': bool(l2_ok),
    }


def run_autoconvolution_suite(seed, sizes=(9, 16, 33), trials=100):
    """Autoconvolution identity with random complex g of maximal support."""
    worst = 0.0
    for N in sizes:
        m = (N - 1) // 2
        for k in range(trials):
            rng = substream(seed, "autoconvolution", N, k)
            g = rng.standard_normal(m + 1) + 1j * rng.standard_normal(m + 1)
            lhs, rhs = autoconvolution_identity(g, N)
            worst = max(worst, abs(lhs - rhs) / rhs)
    return {'passed': bool(worst <= 1e-8), 'worst_relative_error': worst}


def random_feasible_instance(seed, index, max_d=3, max_N=64):
    """Random (w, w_ext, eps) with |p_w(Delta) w_ext| <= eps on the window."""
    rng = substream(seed, "decomposition", index)
    d = int(rng.integers(1, max_d + 1))
    N = int(rng.integers(max(8, d + 2), max_N + 1))
    eps = float(rng.uniform(1e-3, 1e-1))
    w = _random_collection(d, rng)
    return w, random_eps_signal(w, N, eps, rng), eps


def run_decomposition_suite(seed, instances=100):
    """Reconstruction, norm bound and annihilation of the decomposition."""
    worst_reconstruction = 0.0
    worst_bound_ratio = 0.0
    worst_annihilation = 0.0
    for k in range(instances):
        w, w_ext, eps = random_feasible_instance(seed, k)
        d = w.d
        residual_bound = float(np.max(np.abs(apply_fd(char_poly(w), w_ext))))
        s_ext, z = decompose_extended(w_ext, w, max(eps, residual_bound))
        N = len(z)
        window = w_ext[d:]
        scale = max(1.0, float(np.max(np.abs(window))))
        worst_reconstruction = max(worst_reconstruction,
                                   float(np.max(np.abs(s_ext[d:] + z - window))) / scale)
        worst_bound_ratio = max(worst_bound_ratio, float(np.max(np.abs(z))) / (N ** d * eps))
        s_scale = max(1.0, float(np.max(np.abs(s_ext))))
        worst_annihilation = max(worst_annihilation,
                                 float(np.max(np.abs(apply_fd(char_poly(w), s_ext)))) / s_scale)
    return {
        'passed': bool(worst_reconstruction <= 1e-8 and worst_bound_ratio <= 1.0 + 1e-9
                       and worst_annihilation <= 1e-8),
        'worst_reconstruction': worst_reconstruction,
        'worst_norm_to_bound': worst_bound_ratio,
        'worst_annihilation': worst_annihilation,
    }


def run_concentration_suite(seed, windows=1000, samples=1000, N=256, d=4, chain_N=256, chain_d=2,
                            chain_samples=20):
    """
    Unconditional 1/N floor on arbitrary windows, empirical minima over S_d
    samples, and the full chain where the degree budget admits it.
    """
    floor_ok = True
    for k in range(windows):
        rng = substream(seed, "concentration-any", k)
        length = int(rng.integers(2, N + 1))
        s = rng.standard_normal(length)
        floor_ok &= mainprop_ratio(s) >= 1.0 / length

    minimum = math.inf
    for k in range(samples):
        spec = random_spec(d, substream(seed, "concentration-sd", k))
        s = sample_signal(spec, N)
        if np.any(s):
            minimum = min(minimum, mainprop_ratio(s))

    chain_ok = True
    chain_min_bound = math.inf
    for k in range(chain_samples):
        spec = random_spec(chain_d, substream(seed, "concentration-chain", k))
        s = sample_signal(spec, chain_N)
        if not np.any(s):
            continue
        chain = concentration_chain(s, spec.collection())
        chain_ok &= chain['holds']
        if chain['applicable']:
            chain_min_bound = min(chain_min_bound, chain['chain_bound'])
    logger.info("Empirical minimum of the concentration ratio over S_%d at N=%d: %.6f", d, N, minimum)
    return {
        'passed': bool(floor_ok and minimum > 0 and chain_ok),
        'floor_holds': bool(floor_ok),
        'empirical_min_ratio': minimum,
        'empirical_min_ratio_N': N,
        'empirical_min_ratio_d': d,
        'chain_holds': bool(chain_ok),
        'min_chain_bound': None if math.isinf(chain_min_bound) else chain_min_bound,
    }


SUITE_SCALES = {
    'full': {
        'divisible': {'collections': 20},
        'factor': {'trials': 10},
        'autoconvolution': {'trials': 100},
        'decomposition': {'instances': 100},
        'concentration': {'windows': 1000, 'samples': 10000, 'chain_samples': 50},
    },
    'reduced': {
        'divisible': {'collections': 3},
        'factor': {'trials': 3},
        'autoconvolution': {'trials': 10},
        'decomposition': {'instances': 20},
        'concentration': {'windows': 100, 'samples': 200, 'chain_samples': 5},
    },
}


def run_all_suites(seed, scale="full", suites=None):
    """
    Run the verification suites and collect a JSON-ready report.

    Args:
        seed: Integer seed for all random instances
        scale: 'full' or 'reduced'
        suites: Optional subset of suite names

    Returns:
        Dictionary suite name -> result, plus an overall 'passed' flag
    """
    if scale not in SUITE_SCALES:
        raise ValueError(f"Unknown suite scale: {scale}")
    runners = {
        'divisible': run_divisible_suite,
        'factor': run_factor_suite,
        'autoconvolution': run_autoconvolution_suite,
        'decomposition': run_decomposition_suite,
        'concentration': run_concentration_suite,
    }
    selected = list(runners) if suites is None else list(suites)
    report = {'seed': int(seed), 'scale': scale}
    for name in selected:
        if name not in runners:
            raise ValueError(f"Unknown verification suite: {name}")
        logger.info("Running %s suite", name)
        report[name] = runners[name](seed, **SUITE_SCALES[scale][name])
    report['passed'] = all(report[name]['passed'] for name in selected)
    return report
