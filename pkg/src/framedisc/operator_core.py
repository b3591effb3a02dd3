"""Dense complex linear algebra on small Hermitian matrices.

Every eigen-computation in the package goes through the cyclic Jacobi
kernels in ``framedisc._kernels`` (compiled) or ``framedisc._kernels_py``.
Vectors are 1-d complex ``ndarray``s, operators are ``(d, d)`` complex
``ndarray``s.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DomainError, InvalidInputError, InvalidRangeError, ShapeError

HERMITIAN_TOL = 1e-12


def as_vector(phi):
    """Validate and convert to a finite 1-d complex vector."""
    v = np.asarray(phi, dtype=np.complex128)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-d vector, got shape {v.shape}")
    if v.size == 0:
        raise InvalidInputError("vector of dimension zero")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite entries")
    return v


def as_hermitian(S, tol=HERMITIAN_TOL):
    """Validate a square, finite, conjugate-symmetric matrix and symmetrise it.

    The symmetry tolerance is relative to the largest entry magnitude.
    """
    A = np.asarray(S, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ShapeError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = float(np.max(np.abs(A)))
    asym = float(np.max(np.abs(A - A.conj().T)))
    if asym > tol * max(scale, np.finfo(float).tiny):
        raise ShapeError(f"matrix is not Hermitian (asymmetry {asym:.3e}, scale {scale:.3e})")
    return (A + A.conj().T) / 2


def outer_product(phi):
    """Rank-one operator ``phi phi^*``."""
    v = as_vector(phi)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def apply(self, fn):
        """``V fn(Lambda) V^*`` for a function on the (real) eigenvalues."""
        V = self.eigenvectors
        vals = np.asarray(fn(self.eigenvalues), dtype=np.complex128)
        A = (V * vals) @ V.conj().T
        return (A + A.conj().T) / 2


def _canonical(w, V, scale):
    # phase: first component with at least half the largest magnitude is real positive
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        mags = np.abs(col)
        k = int(np.argmax(mags >= 0.5 * mags.max()))
        V[:, j] = col * (np.conj(col[k]) / mags[k])
    # ties in eigenvalue: descending lexicographic order on the rounded eigenvectors,
    # so that the identity decomposes into the standard basis
    tie = 1e-12 * max(1.0, scale)
    order = []
    i, n = 0, len(w)
    while i < n:
        j = i + 1
        while j < n and w[j] - w[j - 1] <= tie:
            j += 1
        group = list(range(i, j))
        if len(group) > 1:
            def key(c):
                v = np.round(V[:, c], 10)
                return tuple(x for z in v for x in (z.real, z.imag))
            group.sort(key=key, reverse=True)
        order.extend(group)
        i = j
    return w[order], V[:, order]


def spectral_decompose(S):
    """Eigen-decomposition with ascending eigenvalues and canonical eigenvectors."""
    A = as_hermitian(S)
    w, V = kernels.jacobi_eigh(A)
    return SpectralDecomposition(*_canonical(w, V, float(np.max(np.abs(w), initial=0.0))))


def eigenvalues(S):
    """Ascending eigenvalues only (no eigenvector bookkeeping)."""
    A = as_hermitian(S)
    return kernels.batched_eigvalsh(A[None])[0]


def extreme_eigenvalues(S):
    w = eigenvalues(S)
    return float(w[0]), float(w[-1])


def operator_norm(S):
    """Spectral norm of a Hermitian operator, ``max |eigenvalue|``."""
    lo, hi = extreme_eigenvalues(S)
    return max(abs(lo), abs(hi))


def psd_leq(S, T, tol=1e-10):
    """``S <= T`` in the positive semidefinite order, up to ``-tol * max(1, ||T||)``."""
    lo, _ = extreme_eigenvalues(np.asarray(T) - np.asarray(S))
    return lo >= -tol * max(1.0, operator_norm(T))


def power(S, p, floor=None):
    """Spectral power ``S^p`` with a cutoff.

    With a ``floor``, eigenvalues ``>= floor`` are mapped to ``lambda**p`` and
    the rest to 0.  Without one, negative ``p`` uses ``1e-10 * ||S||`` and
    non-negative ``p`` keeps every eigenvalue (non-integer powers clip
    rounding-level negatives to 0).  A non-integer ``p`` requires ``S``
    positive semidefinite up to ``-1e-10 * ||S||``.
    """
    p = float(p)
    dec = spectral_decompose(S)
    w = dec.eigenvalues
    norm = float(np.max(np.abs(w), initial=0.0))
    integer = p == int(p)
    if not integer and w.size and w[0] < -1e-10 * norm:
        raise DomainError(f"non-integer power {p} of an operator with eigenvalue {w[0]:.3e}")
    if floor is None and p < 0:
        floor = 1e-10 * norm
    if floor is None:
        keep = np.ones(w.size, dtype=bool)
        base = w if integer else np.maximum(w, 0.0)
    else:
        keep = w >= floor
        base = w

    def fn(lam):
        out = np.zeros_like(lam)
        out[keep] = base[keep] ** p
        return out

    return dec.apply(fn)


def spectral_projection(S, lo, hi):
    """Orthogonal projection onto the eigenvectors with eigenvalue in ``[lo, hi]``."""
    if lo > hi:
        raise InvalidRangeError(f"empty interval [{lo}, {hi}]")
    dec = spectral_decompose(S)
    w = dec.eigenvalues
    mask = ((w >= lo) & (w <= hi)).astype(float)
    return dec.apply(lambda lam: mask)
