"""
Normalized discrete Fourier transform and spectral norms.

Bins are indexed by tau = 0, ..., N-1 at mu_tau = exp(2*pi*i*tau/N) with the
positive exponent, bins[tau] = N^(-1/2) * sum_t v_t * mu_tau^t. This is the
orthonormal inverse FFT of scipy.fft, which handles every N (mixed radix with
a Bluestein fallback for large prime factors).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as spfft


@dataclass(frozen=True)
class Spectrum:
    """Complex bins of F_N v; read-only."""

    bins: np.ndarray = field(compare=False)

    def __post_init__(self):
        bins = np.array(self.bins, dtype=complex)
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @property
    def N(self):
        return len(self.bins)

    @property
    def moduli(self):
        return np.abs(self.bins)


def fourier(v):
    """F_N applied to a real or complex vector; returns a plain complex array."""
    return spfft.ifft(np.asarray(v), norm="ortho")


def fourier_adjoint(u):
    """Adjoint (and inverse) of F_N."""
    return spfft.fft(np.asarray(u), norm="ortho")


def dft(v):
    """
    Normalized DFT of a window.

    Args:
        v: Real or complex sequence of length N >= 1

    Returns:
        Spectrum with bins[tau] = N^(-1/2) sum_t v_t exp(2 pi i tau t / N)
    """
    v = np.asarray(v)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError(f"dft needs a non-empty 1-D sequence, got shape {v.shape}")
    return Spectrum(fourier(v))


def spectral_inf_norm(v):
    """Largest bin modulus of dft(v)."""
    return float(np.max(np.abs(fourier(v))))


def spectral_l1_norm(v):
    """Sum of bin moduli of dft(v)."""
    return float(np.sum(np.abs(fourier(v))))
