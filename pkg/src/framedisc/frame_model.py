"""Finite frame systems in C^d."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidWeightError, NotAFrameError, ShapeError
from .operator_core import as_hermitian, extreme_eigenvalues, power

PARSEVAL_TOL = 1e-8
FRAME_TOL = 1e-12


class FrameSystem:
    """A finite family of vectors ``phi_i`` with optional weights ``a_i >= 0``.

    Weights multiply the outer products, so the frame operator is
    ``sum_i a_i phi_i phi_i^*``.  In amplitude terms the family is
    ``{sqrt(a_i) phi_i}``.  Instances are immutable.
    """

    __slots__ = ("_vectors", "_weights", "label")

    def __init__(self, vectors, weights=None, label=""):
        V = np.array(vectors, dtype=np.complex128)
        if V.ndim == 1 and V.size == 0:
            raise InvalidInputError("frame system needs at least one vector")
        if V.ndim != 2:
            raise ShapeError(f"vectors must form an (m, d) array, got shape {V.shape}")
        if V.shape[0] == 0 or V.shape[1] == 0:
            raise InvalidInputError("frame system needs at least one vector of dimension >= 1")
        if not np.all(np.isfinite(V)):
            raise InvalidInputError("vectors have non-finite entries")
        W = None
        if weights is not None:
            W = np.array(weights, dtype=np.float64)
            if W.shape != (V.shape[0],):
                raise ShapeError(f"{W.size} weights for {V.shape[0]} vectors")
            if not np.all(np.isfinite(W)) or np.any(W < 0):
                raise InvalidWeightError("weights must be finite and non-negative")
            W.setflags(write=False)
        V.setflags(write=False)
        self._vectors = V
        self._weights = W
        self.label = str(label)

    @classmethod
    def from_list(cls, vectors, weights=None, label=""):
        """Build from a list of vectors, checking they share a dimension."""
        dims = {np.asarray(v).shape for v in vectors}
        if len(dims) > 1:
            raise ShapeError(f"vectors of mixed shapes {sorted(dims)}")
        return cls(np.array([np.asarray(v, dtype=np.complex128) for v in vectors]), weights, label)

    @property
    def vectors(self):
        return self._vectors

    @property
    def weights(self):
        return self._weights

    @property
    def dimension(self):
        return self._vectors.shape[1]

    def __len__(self):
        return self._vectors.shape[0]

    @property
    def effective_weights(self):
        if self._weights is None:
            return np.ones(len(self))
        return self._weights

    def amplitude_vectors(self):
        """The rows ``sqrt(a_i) phi_i``."""
        return self._vectors * np.sqrt(self.effective_weights)[:, None]

    def squared_norms(self):
        """``a_i ||phi_i||^2`` per index."""
        return self.effective_weights * np.sum(np.abs(self._vectors) ** 2, axis=1)

    @property
    def delta(self):
        return float(np.max(self.squared_norms()))

    @property
    def zero_mask(self):
        """Indices whose vector (or weight) is zero; they never affect bounds."""
        return self.squared_norms() == 0.0

    def subset(self, indices, label=None):
        idx = np.asarray(indices, dtype=np.intp)
        W = None if self._weights is None else self._weights[idx]
        return FrameSystem(self._vectors[idx], W, self.label if label is None else label)

    def scaled(self, c):
        return FrameSystem(self._vectors * c, self._weights, self.label)

    def outer_products(self):
        """``(m, d, d)`` stack of ``a_i phi_i phi_i^*``."""
        U = self.amplitude_vectors()
        return U[:, :, None] * U.conj()[:, None, :]

    def to_dict(self):
        out = {
            "dimension": int(self.dimension),
            "vectors": [[[float(z.real), float(z.imag)] for z in v] for v in self._vectors],
            "label": self.label,
        }
        if self._weights is not None:
            out["weights"] = [float(a) for a in self._weights]
        return out

    @classmethod
    def from_dict(cls, data):
        d = int(data["dimension"])
        vecs = np.array(
            [[complex(re, im) for re, im in v] for v in data["vectors"]], dtype=np.complex128)
        if vecs.ndim != 2 or vecs.shape[1] != d:
            raise ShapeError(f"vectors do not match declared dimension {d}")
        return cls(vecs, data.get("weights"), data.get("label", ""))

    def __eq__(self, other):
        if not isinstance(other, FrameSystem):
            return NotImplemented
        same_w = (self._weights is None and other._weights is None) or (
            self._weights is not None and other._weights is not None
            and np.array_equal(self._weights, other._weights))
        return same_w and self.label == other.label and np.array_equal(self._vectors, other._vectors)

    __hash__ = None

    def __repr__(self):
        w = "" if self._weights is None else ", weighted"
        return f"FrameSystem(m={len(self)}, d={self.dimension}{w}, label={self.label!r})"


@dataclass(frozen=True)
class FrameBoundsReport:
    lower: float
    upper: float
    is_parseval: bool
    is_tight: bool
    delta: float
    zero_vectors: int = 0

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "is_parseval": self.is_parseval,
            "is_tight": self.is_tight,
            "delta": self.delta,
            "zero_vectors": self.zero_vectors,
        }


def quadratic_sum(V, coeff):
    """``sum_n coeff_n v_n v_n^*`` over the rows with ``coeff_n != 0``.

    Every frame operator in the package is formed here, so discrete and
    cell-model operators over the same vectors agree bit for bit.
    """
    coeff = np.asarray(coeff, dtype=np.float64)
    keep = coeff != 0
    U = V[keep]
    S = U.T @ (coeff[keep][:, None] * U.conj())
    return (S + S.conj().T) / 2


def frame_operator(F):
    """``S = sum_i a_i phi_i phi_i^*``."""
    return quadratic_sum(F.vectors, F.effective_weights)


def weighted_frame_operator(F, tau):
    """``sum_i tau_i a_i phi_i phi_i^*`` with ``tau_i in [0, 1]``."""
    t = np.asarray(tau, dtype=np.float64)
    if t.shape != (len(F),):
        raise ShapeError(f"{t.size} weights for {len(F)} vectors")
    if not np.all(np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise InvalidWeightError("weights tau must lie in [0, 1]")
    return quadratic_sum(F.vectors, t * F.effective_weights)


def bounds_of_operator(S):
    """Optimal frame bounds of a frame operator: its extreme eigenvalues."""
    return extreme_eigenvalues(as_hermitian(S))


def frame_bounds(F):
    A, B = bounds_of_operator(frame_operator(F))
    scale = max(1.0, abs(B))
    return FrameBoundsReport(
        lower=A,
        upper=B,
        is_parseval=abs(A - 1.0) <= PARSEVAL_TOL and abs(B - 1.0) <= PARSEVAL_TOL,
        is_tight=abs(B - A) <= PARSEVAL_TOL * scale,
        delta=F.delta,
        zero_vectors=int(np.count_nonzero(F.zero_mask)),
    )


def canonical_parseval(F, label=None):
    """``{S^{-1/2} phi_i}``, the canonical Parseval frame of ``F``.

    Weights are folded into the vectors, so the result is unweighted.
    """
    S = frame_operator(F)
    A, B = bounds_of_operator(S)
    if A <= FRAME_TOL * max(1.0, B):
        raise NotAFrameError(f"lower frame bound {A:.3e} is not positive")
    R = power(S, -0.5)
    U = F.amplitude_vectors() @ R.T
    return FrameSystem(U, None, F.label if label is None else label)
