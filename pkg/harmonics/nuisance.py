"""
Nuisance sets for the detectors: Zero, the subspace S[w] and the epsilon-set
S^{N,eps}[w], together with the window bases and finite-difference stencils
the solvers work on.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp_sparse

from harmonics.errors import DimensionError, DomainError
from harmonics.frequencies import (
    FrequencyCollection,
    char_poly,
    make_frequency_collection,
    window_basis,
)

logger = logging.getLogger(__name__)

ZERO = "zero"
SUBSPACE = "subspace"
EPS_SET = "eps"
KINDS = (ZERO, SUBSPACE, EPS_SET)


@dataclass(frozen=True)
class NuisanceSpec:
    """
    Nuisance set Z of the detection problem.

    kind is one of "zero", "subspace" or "eps". Subspace and eps sets carry the
    frequency collection w (d_n = w.d); eps sets also carry the residual bound.
    """

    kind: str = ZERO
    w: FrequencyCollection = FrequencyCollection()
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown nuisance kind: {self.kind}")
        if not np.isfinite(self.eps) or self.eps < 0:
            raise DomainError(f"Residual bound must be a nonnegative real, got {self.eps}")

    @classmethod
    def zero(cls):
        return cls(ZERO)

    @classmethod
    def subspace(cls, w):
        if not isinstance(w, FrequencyCollection):
            w = make_frequency_collection(w)
        return cls(SUBSPACE, w)

    @classmethod
    def eps_set(cls, w, eps):
        if not isinstance(w, FrequencyCollection):
            w = make_frequency_collection(w)
        return cls(EPS_SET, w, float(eps))

    @property
    def d_n(self):
        return 0 if self.kind == ZERO else self.w.d

    def effective_kind(self):
        """Kind the solvers actually handle: empty or zero-width sets collapse."""
        if self.kind == ZERO or self.w.d == 0:
            return ZERO
        if self.kind == EPS_SET and self.eps == 0.0:
            return SUBSPACE
        return self.kind

    def basis(self, N):
        """Orthonormal window basis of S[w] restricted to t = 0..N-1."""
        if self.kind == ZERO:
            return np.zeros((int(N), 0))
        return window_basis(self.w, N)

    def extended_basis(self, N):
        """Orthonormal basis of the kernel of the stencil over t = -d_n..N-1."""
        d = self.d_n
        if d == 0:
            return np.zeros((int(N), 0))
        return window_basis(self.w, int(N) + d, start=-d)

    def coeffs(self):
        return char_poly(self.w).coeffs if self.kind != ZERO else np.ones(1)

    def stencil(self, N, sparse=False):
        """
        Finite-difference matrix D of shape (N, N + d_n).

        (D z_ext)_t = sum_k c_k z_{t-k} for t = 0..N-1 where z_ext holds
        z_{-d_n}, ..., z_{N-1}.
        """
        coeffs = self.coeffs()
        d = len(coeffs) - 1
        N = int(N)
        if sparse:
            return sp_sparse.diags(list(coeffs), [d - k for k in range(d + 1)],
                                   shape=(N, N + d), format="csr")
        D = np.zeros((N, N + d))
        rows = np.arange(N)
        for k, c in enumerate(coeffs):
            D[rows, rows + d - k] = c
        return D

    def check_window(self, N):
        if int(N) < 2:
            raise DimensionError(f"Observation window must have N >= 2, got {N}")
        if self.effective_kind() == SUBSPACE and self.basis(N).shape[1] >= int(N):
            raise DimensionError(
                f"Subspace of dimension {self.d_n} fills the window of length {N}"
            )

    def to_dict(self):
        data = {"kind": self.kind}
        if self.kind != ZERO:
            data["freqs"] = self.w.to_list()
        if self.kind == EPS_SET:
            data["eps"] = self.eps
        return data

    @classmethod
    def from_dict(cls, data):
        kind = data.get("kind", ZERO)
        if kind == ZERO:
            return cls.zero()
        if kind == SUBSPACE:
            return cls.subspace(data.get("freqs", []))
        if kind == EPS_SET:
            return cls.eps_set(data.get("freqs", []), data.get("eps", 0.0))
        raise ValueError(f"Unknown nuisance kind: {kind}")

    def describe(self):
        if self.kind == ZERO:
            return "Zero"
        label = "Subspace" if self.kind == SUBSPACE else f"EpsSet(eps={self.eps:g})"
        return f"{label}[d={self.w.d}]"
