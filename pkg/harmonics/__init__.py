"""
Harmonic signal model: frequency collections, finite-difference operators,
the normalized Fourier transform and nuisance sets.
"""

from harmonics.errors import HarmonicsError
from harmonics.frequencies import (
    CharPoly,
    FrequencyCollection,
    ModulatedSpec,
    ModulatedTerm,
    apply_fd,
    char_poly,
    extend_backward,
    inf_dist_to_nuisance,
    make_frequency_collection,
    random_eps_signal,
    random_signal,
    sample_signal,
)
from harmonics.nuisance import NuisanceSpec
from harmonics.spectrum import Spectrum, dft, spectral_inf_norm, spectral_l1_norm

__all__ = [
    "CharPoly",
    "FrequencyCollection",
    "HarmonicsError",
    "ModulatedSpec",
    "ModulatedTerm",
    "NuisanceSpec",
    "Spectrum",
    "apply_fd",
    "char_poly",
    "dft",
    "extend_backward",
    "inf_dist_to_nuisance",
    "make_frequency_collection",
    "random_eps_signal",
    "random_signal",
    "sample_signal",
    "spectral_inf_norm",
    "spectral_l1_norm",
]
