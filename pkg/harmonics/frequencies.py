"""
Frequency Collections and Harmonic Signal Models

This module holds the signal model the detectors work with:

- Frequency collections symmetric modulo 2*pi and their characteristic polynomials
- The finite-difference operator p_w(Delta) on explicit pre-window extensions
- Polynomially modulated harmonic signals (closed-form sampling)
- Random draws of harmonic signals and of members of the epsilon-sets
- Real orthonormal window bases of the signal subspaces
- Uniform distance from a window to a nuisance set
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy import linalg
from scipy import signal as spsignal

from harmonics.errors import LengthMismatch, SymmetryViolation

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9  # angular tolerance for "equal mod 2*pi"
IMAG_TOL = 1e-9  # relative imaginary residue accepted in char_poly


def _reduce_angle(value):
    """Reduce an angle to [0, 2*pi), snapping values within ANGLE_TOL of 2*pi to 0."""
    reduced = math.fmod(float(value), TWO_PI)
    if reduced < 0:
        reduced += TWO_PI
    if TWO_PI - reduced <= ANGLE_TOL:
        reduced = 0.0
    return reduced


def _angular_distance(a, b):
    diff = abs(_reduce_angle(a) - _reduce_angle(b))
    return min(diff, TWO_PI - diff)


@dataclass(frozen=True)
class FrequencyCollection:
    """Unordered collection of d frequencies (radians/sample), symmetric mod 2*pi.

    Entries are stored reduced to [0, 2*pi) and sorted. The empty collection
    (d = 0) is valid and has characteristic polynomial 1.
    """

    freqs: tuple = ()

    @property
    def d(self):
        return len(self.freqs)

    def roots(self):
        """Distinct frequencies with their multiplicities, as (omega, count) pairs."""
        groups = []
        for omega in self.freqs:
            for group in groups:
                if _angular_distance(group[0], omega) <= ANGLE_TOL:
                    group[1] += 1
                    break
            else:
                groups.append([omega, 1])
        return [(omega, count) for omega, count in groups]

    def real_modes(self):
        """Real oscillation modes as (omega, multiplicity) with omega in [0, pi].

        A pair (omega, 2*pi - omega) with omega in (0, pi) yields one mode whose
        window basis has 2 * multiplicity real functions; omega = 0 and
        omega = pi give multiplicity functions each.
        """
        modes = []
        for omega, count in self.roots():
            if omega <= math.pi + ANGLE_TOL:
                if abs(omega - math.pi) <= ANGLE_TOL:
                    omega = math.pi
                modes.append((omega, count))
        return modes

    def conjugate(self):
        """Collection with every frequency negated (the root set of the time-reversed signal)."""
        return make_frequency_collection([-omega for omega in self.freqs])

    def union(self, other):
        return make_frequency_collection(list(self.freqs) + list(other.freqs))

    def to_list(self):
        return list(self.freqs)


def make_frequency_collection(raw):
    """
    Build a canonical frequency collection from raw reals.

    Args:
        raw: Iterable of finite reals (radians/sample), in any order

    Returns:
        FrequencyCollection with entries reduced to [0, 2*pi)

    Raises:
        SymmetryViolation: if some value a appears a different number of times
            than -a (modulo 2*pi, within ANGLE_TOL)
    """
    values = [float(v) for v in raw]
    if not all(math.isfinite(v) for v in values):
        raise SymmetryViolation(f"Frequencies must be finite reals, got {values}")
    reduced = sorted(_reduce_angle(v) for v in values)

    for omega in reduced:
        same = sum(1 for other in reduced if _angular_distance(other, omega) <= ANGLE_TOL)
        mirrored = sum(1 for other in reduced if _angular_distance(other, -omega) <= ANGLE_TOL)
        if same != mirrored:
            raise SymmetryViolation(
                f"Frequency {omega:.12g} occurs {same} time(s) but its mirror "
                f"{_reduce_angle(-omega):.12g} occurs {mirrored} time(s)"
            )
    return FrequencyCollection(tuple(reduced))


@dataclass(frozen=True)
class CharPoly:
    """Real coefficients of p_w(zeta) = prod_l (1 - exp(i*omega_l) * zeta), constant term first."""

    coeffs: np.ndarray = field(compare=False)

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __eq__(self, other):
        return isinstance(other, CharPoly) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(tuple(self.coeffs))


def char_poly(w):
    """
    Expand the characteristic polynomial of a frequency collection.

    Args:
        w: FrequencyCollection

    Returns:
        CharPoly of degree w.d with coeffs[0] == 1 exactly
    """
    product = np.array([1.0 + 0.0j])
    for omega in w.freqs:
        product = nppoly.polymul(product, np.array([1.0, -np.exp(1j * omega)]))

    scale = max(1.0, float(np.max(np.abs(product))))
    residue = float(np.max(np.abs(product.imag)))
    if residue > IMAG_TOL * scale:
        # only reachable if the collection bypassed make_frequency_collection
        raise SymmetryViolation(f"Characteristic polynomial has imaginary residue {residue:.3e}")

    coeffs = product.real.copy()
    coeffs[0] = 1.0
    return CharPoly(coeffs)


def _coeff_vector(p):
    return p.coeffs if isinstance(p, CharPoly) else np.asarray(p, dtype=float)


def apply_fd(p, x_ext):
    """
    Apply p(Delta) to a window with explicit pre-window values.

    Args:
        p: CharPoly (or raw coefficient vector) of degree d
        x_ext: Values x_{-d}, ..., x_{N-1} (length N + d)

    Returns:
        Residual window [p(Delta) x]_0^{N-1}; entry t is sum_k coeffs[k] * x_{t-k}
    """
    coeffs = _coeff_vector(p)
    d = len(coeffs) - 1
    x_ext = np.asarray(x_ext, dtype=float)
    if x_ext.ndim != 1 or len(x_ext) <= d:
        raise LengthMismatch(
            f"Extended window must be 1-D with more than d={d} entries, got shape {x_ext.shape}"
        )
    return np.convolve(x_ext, coeffs, mode="valid")


def extend_backward(p, window, count=None):
    """
    Continue a window of a member of S[w] to earlier times.

    Runs the recurrence p(Delta) s = 0 backwards, solving each step for the
    earliest sample (the leading coefficient has modulus one).

    Args:
        p: CharPoly of degree d
        window: Samples s_0, ..., s_{N-1} with N >= d
        count: Number of earlier samples to add (default d)

    Returns:
        Array s_{-count}, ..., s_{N-1}
    """
    coeffs = _coeff_vector(p)
    d = len(coeffs) - 1
    count = d if count is None else int(count)
    window = np.asarray(window, dtype=float)
    if d == 0 or count == 0:
        return window.copy()
    if len(window) < d:
        raise LengthMismatch(f"Need at least d={d} samples to extend backwards, got {len(window)}")

    values = list(window[: d])
    earlier = []
    for _ in range(count):
        # coeffs[0]*s_t + ... + coeffs[d]*s_{t-d} = 0 with s_t..s_{t-d+1} = values[d-1]..values[0]
        acc = sum(coeffs[k] * values[d - 1 - k] for k in range(d))
        newest = -acc / coeffs[d]
        earlier.append(newest)
        values = [newest] + values[:-1]
    return np.concatenate([np.array(earlier[::-1]), window])


@dataclass(frozen=True)
class ModulatedTerm:
    """One term p(t) cos(omega t) + q(t) sin(omega t); coefficients constant term first."""

    omega: float
    p: tuple = (0.0,)
    q: tuple = (0.0,)

    @property
    def multiplicity(self):
        return max(len(self.p), len(self.q))


@dataclass(frozen=True)
class ModulatedSpec:
    """Closed-form description of a member of S[w] as a sum of modulated terms."""

    terms: tuple = ()

    def canonical(self):
        """Fold frequencies into [0, pi] and merge terms closer than ANGLE_TOL."""
        merged = []
        for term in self.terms:
            omega = _reduce_angle(term.omega)
            p = np.array(term.p, dtype=float)
            q = np.array(term.q, dtype=float)
            if omega > math.pi + ANGLE_TOL:
                # cos(-wt) = cos(wt), sin(-wt) = -sin(wt)
                omega = TWO_PI - omega
                q = -q
            if abs(omega - math.pi) <= ANGLE_TOL:
                omega = math.pi
            for entry in merged:
                if abs(entry[0] - omega) <= ANGLE_TOL:
                    entry[1] = nppoly.polyadd(entry[1], p)
                    entry[2] = nppoly.polyadd(entry[2], q)
                    break
            else:
                merged.append([omega, p, q])
        return ModulatedSpec(tuple(
            ModulatedTerm(omega, tuple(p), tuple(q)) for omega, p, q in merged
        ))

    def collection(self):
        """Smallest frequency collection whose subspace contains this signal."""
        freqs = []
        for term in self.canonical().terms:
            if term.omega == 0.0 or term.omega == math.pi:
                freqs.extend([term.omega] * len(term.p))
            else:
                freqs.extend([term.omega] * term.multiplicity)
                freqs.extend([-term.omega] * term.multiplicity)
        return make_frequency_collection(freqs)

    def to_dict(self):
        return {"terms": [
            {"omega": term.omega, "p": list(term.p), "q": list(term.q)} for term in self.terms
        ]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(
            ModulatedTerm(float(t["omega"]), tuple(t.get("p", [0.0])), tuple(t.get("q", [0.0])))
            for t in data["terms"]
        ))


def sample_signal(spec, N, start=0):
    """
    Evaluate a modulated spec on t = start, ..., start + N - 1.

    Args:
        spec: ModulatedSpec
        N: Number of samples (>= 1)
        start: First time index; negative values give pre-window samples

    Returns:
        Real window of length N
    """
    t = np.arange(start, start + int(N), dtype=float)
    values = np.zeros(len(t))
    for term in spec.terms:
        if any(term.p):
            values += nppoly.polyval(t, np.array(term.p, dtype=float)) * np.cos(term.omega * t)
        if any(term.q):
            values += nppoly.polyval(t, np.array(term.q, dtype=float)) * np.sin(term.omega * t)
    return values


def random_spec(d, rng):
    """
    Draw a random harmonic signal spec with a d-element frequency budget.

    Frequencies come in +-omega pairs with omega uniform on (0, pi); an odd d
    gets one extra self-paired frequency at 0. All amplitudes are standard
    normal.
    """
    terms = []
    for _ in range(int(d) // 2):
        omega = rng.uniform(0.0, math.pi)
        while omega == 0.0:
            omega = rng.uniform(0.0, math.pi)
        terms.append(ModulatedTerm(float(omega), (float(rng.standard_normal()),),
                                   (float(rng.standard_normal()),)))
    if int(d) % 2:
        terms.append(ModulatedTerm(0.0, (float(rng.standard_normal()),), (0.0,)))
    return ModulatedSpec(tuple(terms))


def random_signal(d, N, seed):
    """
    Random member of S_d observed on a window of length N.

    Args:
        d: Frequency budget
        N: Window length
        seed: Integer seed; equal seeds give identical output

    Returns:
        Tuple (FrequencyCollection, window)
    """
    from utils.noise import substream

    spec = random_spec(d, substream(seed, "signal"))
    return spec.collection(), sample_signal(spec, N)


def window_basis(w, N, start=0):
    """
    Orthonormal real basis of the restrictions of S[w] to t = start, ..., start + N - 1.

    Polynomial envelopes are Legendre polynomials of the variable rescaled to
    [-1, 1] over the grid, so the basis stays well conditioned for long windows.

    Returns:
        Array of shape (N, r) with orthonormal columns, r <= w.d
    """
    N = int(N)
    if w.d == 0 or N == 0:
        return np.zeros((N, 0))
    t = np.arange(start, start + N, dtype=float)
    scaled = (2.0 * (t - start) - (N - 1)) / max(N - 1, 1)

    columns = []
    for omega, multiplicity in w.real_modes():
        for j in range(multiplicity):
            envelope = npleg.legval(scaled, np.eye(j + 1)[j])
            if omega == 0.0:
                columns.append(envelope)
            elif omega == math.pi:
                columns.append(envelope * np.cos(math.pi * t))
            else:
                columns.append(envelope * np.cos(omega * t))
                columns.append(envelope * np.sin(omega * t))
    return linalg.orth(np.column_stack(columns))


def causal_response(p, residual):
    """Solution chi of p(Delta) chi = residual with chi_t = 0 for t < 0 (real recursion)."""
    coeffs = _coeff_vector(p)
    return spsignal.lfilter([1.0], coeffs, np.asarray(residual, dtype=float))


def random_eps_signal(w, N, eps, rng, amplitude=1.0):
    """
    Draw a member of S^{N,eps}[w] with explicit pre-window values.

    The draw is a random subspace member plus a residual-driven component: a
    residual uniform on [-eps, eps] is integrated causally through p_w(Delta),
    and its projection on the kernel over the extended window is removed so the
    component stays small.

    Returns:
        Extended window x_{-d}, ..., x_{N-1} (length N + d)
    """
    p = char_poly(w)
    d = w.d
    residual = rng.uniform(-eps, eps, size=int(N))
    driven = np.concatenate([np.zeros(d), causal_response(p, residual)])

    ext_basis = window_basis(w, N + d, start=-d)
    if ext_basis.shape[1]:
        driven = driven - ext_basis @ (ext_basis.T @ driven)
        coefficients = amplitude * rng.standard_normal(ext_basis.shape[1])
        driven = driven + ext_basis @ (coefficients * math.sqrt(N + d))
    return driven


def inf_dist_to_nuisance(x, Z, **solver_params):
    """
    Uniform distance min_{z in Z} ||x - z||_inf over the window.

    Delegates to the identity-transform solver; see minimax_solver.solve_uniform.
    """
    from minimax_solver import solve_uniform

    return solve_uniform(x, Z, **solver_params).value
