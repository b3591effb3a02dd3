"""Sampling scalable frames and discretizing continuous frames.

Scalars ``a_i`` are amplitudes: the scalable frame is ``{a_i phi_i}`` and
its frame operator is ``sum |a_i|^2 phi_i phi_i^*``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .continuous_frame import approximate_by_countable, equivalent_discrete
from .errors import (
    DiscretizationTooCoarseError,
    HypothesisError,
    InvalidInputError,
    NotAFrameError,
    SearchBudgetError,
)
from .frame_model import FrameSystem, canonical_parseval, frame_bounds, frame_operator
from .operator_core import power
from .partition_engine import CERT_TOL, DEFAULT_TRIALS, partition_constants, partition_general


class DegenerateScalarError(HypothesisError):
    """A zero scalar on an index that carries a nonzero vector."""


def choose_K(eta, epsilon):
    """Smallest ``K`` with ``eta/K <= 1 - eps/2`` and ``(K+1)/(K(1-eps/2)) <= 1 + eps``."""
    eta, epsilon = float(eta), float(epsilon)
    if not (0 < epsilon < 1):
        raise InvalidInputError("epsilon must lie in (0, 1)")
    if not eta > 0:
        raise InvalidInputError("eta must be positive")
    h = 1 - epsilon / 2
    # (K+1)/K <= h (1+eps)  <=>  K >= 1 / (h (1+eps) - 1)
    k2 = 1.0 / (h * (1 + epsilon) - 1)
    K = max(1, math.ceil(eta / h - 1e-12), math.ceil(k2 - 1e-12))
    while eta / K > h or (K + 1) / (K * h) > 1 + epsilon:
        K += 1
    while K > 1 and eta / (K - 1) <= h and K / ((K - 1) * h) <= 1 + epsilon:
        K -= 1
    return K


def replication_counts(a2, eta, K):
    """``N_i = ceil(K a_i^2 / eta)``, guarded against rounding just above an integer."""
    x = K * np.asarray(a2, dtype=np.float64) / eta
    n = np.ceil(x)
    n = np.where(np.abs(x - np.rint(x)) <= 1e-12 * np.maximum(1, x), np.rint(x), n)
    return n.astype(np.int64)


@dataclass
class SamplingResult:
    pi: list
    counts: list
    K: int
    eta: float
    achieved: tuple
    guaranteed: tuple
    constants: tuple
    satisfied: bool
    block: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "pi": [int(i) for i in self.pi],
            "counts": [int(c) for c in self.counts],
            "K": int(self.K),
            "eta": float(self.eta),
            "achieved": [float(x) for x in self.achieved],
            "guaranteed": [float(x) for x in self.guaranteed],
            "constants": [float(x) for x in self.constants],
            "satisfied": bool(self.satisfied),
            "block": int(self.block),
            "details": self.details,
        }


def _as_scalars(F, a):
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (len(F),):
        raise InvalidInputError(f"{a.size} scalars for {len(F)} vectors")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("scalars must be finite")
    return a


def _trim(F, a):
    """Active indices: nonzero vector and nonzero scalar."""
    sq = F.squared_norms()
    zero_a = np.abs(a) == 0
    return np.flatnonzero((sq > 0) & ~zero_a)


MAX_REPLICATED = 1 << 17


def sample_scalable_finite(F, a, epsilon, mode="auto", seed=0, trials=DEFAULT_TRIALS,
                           tol=CERT_TOL, bounds_tol=1e-9, max_replicated=MAX_REPLICATED):
    """Sampling function for a scalable frame whose ``{a_i phi_i}`` has bounds
    in ``[1 - eps/2, 1]`` and ``||phi_i||^2 <= 1``.

    Each active index is replicated ``N_i`` times, the replicated system
    ``{sqrt(eta/K) phi_kappa(n)}`` is partitioned, and ``pi`` is ``kappa`` on
    the block with the largest measured lower bound.  Guaranteed bounds
    ``[A_0, B_0 (1 + eps)]``.
    """
    epsilon = float(epsilon)
    if not (0 < epsilon < 1):
        raise InvalidInputError("epsilon must lie in (0, 1)")
    a = _as_scalars(F, a)
    if F.weights is not None:
        raise InvalidInputError("pass an unweighted system; scalars go in `a`")
    active = _trim(F, a)
    if active.size == 0:
        raise NotAFrameError("no index with nonzero vector and scalar")
    zero_scalar = np.flatnonzero((F.squared_norms() > 0) & (np.abs(a) == 0))
    Fa = F.subset(active)
    aa = a[active]
    if Fa.delta > 1 + bounds_tol:
        raise HypothesisError(f"vector norm^2 {Fa.delta:.12g} exceeds 1")
    scaled = FrameSystem(Fa.vectors * aa[:, None])
    rep = frame_bounds(scaled)
    if rep.lower < 1 - epsilon / 2 - bounds_tol or rep.upper > 1 + bounds_tol:
        raise HypothesisError(
            f"scaled frame bounds ({rep.lower:.12g}, {rep.upper:.12g}) outside [1 - eps/2, 1]")
    a2 = np.abs(aa) ** 2
    eta = float(a2.min())
    if not eta > 0:
        raise DegenerateScalarError("zero scalar on the active set")
    K = choose_K(eta, epsilon)
    counts = replication_counts(a2, eta, K)
    if counts.sum() > max_replicated:
        raise SearchBudgetError(
            f"replication needs {int(counts.sum())} vectors (limit {max_replicated}); "
            f"scalar ratio max/min = {a2.max() / eta:.3g}")
    kappa = np.repeat(np.arange(active.size), counts)
    b2 = (a2 / counts)[kappa]
    G = FrameSystem(math.sqrt(eta / K) * Fa.vectors[kappa])
    part = partition_general(G, eta / K, mode=mode, seed=seed, trials=trials, tol=tol)
    # bounds of each block of {phi_kappa(n)}, i.e. G's bounds divided by eta/K
    lowers = [lo * K / eta for lo, _ in part.block_bounds]
    choice = int(np.argmax(lowers))
    block = part.blocks[choice]
    pi = active[kappa[block]]
    achieved = frame_bounds(F.subset(pi))
    A0, B0 = partition_constants()
    guaranteed = (A0, B0 * (1 + epsilon))
    scale = max(1.0, guaranteed[1])
    ok = (achieved.lower >= A0 * (1 - tol) and achieved.upper <= guaranteed[1] + tol * scale
          and achieved.lower > 0 and part.satisfied)
    Sa = frame_operator(scaled)
    Sb = frame_operator(FrameSystem(Fa.vectors[kappa], b2))
    details = {
        "active": active.tolist(),
        "dropped_zero_scalar": zero_scalar.tolist(),
        "b2_range": [float(b2.min()), float(b2.max())],
        "b2_window": [eta / (K + 1), eta / K],
        "replicated": int(kappa.size),
        "replication_operator_error": float(np.max(np.abs(Sa - Sb))),
        "blocks": len(part.blocks),
        "block_lower_bounds": lowers,
        "scaled_bounds": [rep.lower, rep.upper],
        "finite_upper": (K + 1) / (K * (1 - epsilon / 2)),
    }
    return SamplingResult(pi.tolist(), counts.tolist(), K, eta, (achieved.lower, achieved.upper),
                          guaranteed, (A0, B0), bool(ok), choice, details)


def sample_scalable_general(F, a, N, epsilon, mode="auto", seed=0, trials=DEFAULT_TRIALS,
                            tol=CERT_TOL, max_replicated=MAX_REPLICATED):
    """Sampling function for ``{a_i phi_i}`` with bounds ``(A, B)`` and ``||phi_i||^2 <= N``.

    Works through ``psi_i = (A/N)^{1/2} S^{-1/2} phi_i`` with scalars
    ``a_i (N/A)^{1/2}``.  Checked against the finite-dimensional window
    ``[A_0 N, B_0 N (B/A)(1 + eps)]``; the looser ``[A_0 N (1 - eps),
    2 B_0 N (B/A)(1 + eps)]`` is reported too.
    """
    N = float(N)
    if not N > 0:
        raise InvalidInputError("norm cap must be positive")
    a = _as_scalars(F, a)
    if F.weights is not None:
        raise InvalidInputError("pass an unweighted system; scalars go in `a`")
    active = _trim(F, a)
    if active.size == 0:
        raise NotAFrameError("no index with nonzero vector and scalar")
    Fa = F.subset(active)
    if Fa.delta > N * (1 + 1e-12):
        raise HypothesisError(f"vector norm^2 {Fa.delta:.12g} exceeds the cap {N:.12g}")
    scaled = FrameSystem(Fa.vectors * a[active][:, None])
    S = frame_operator(scaled)
    rep = frame_bounds(scaled)
    A, B = rep.lower, rep.upper
    if A <= 1e-12 * max(1.0, B):
        raise NotAFrameError(f"lower frame bound {A:.3e} is not positive")
    R = power(S, -0.5)
    psi = math.sqrt(A / N) * (Fa.vectors @ R.T)
    c = a[active] * math.sqrt(N / A)
    Psi = FrameSystem(psi)
    # clip rounding above the unit ball
    if Psi.delta > 1:
        Psi = FrameSystem(psi / math.sqrt(Psi.delta))
        c = c * math.sqrt(Psi.delta)
    inner = sample_scalable_finite(Psi, c, epsilon, mode=mode, seed=seed, trials=trials, tol=tol,
                                   max_replicated=max_replicated)
    pi = active[np.asarray(inner.pi, dtype=np.int64)]
    achieved = frame_bounds(F.subset(pi))
    A0, B0 = partition_constants()
    finite = (A0 * N, B0 * N * (B / A) * (1 + epsilon))
    loose = (A0 * N * (1 - epsilon), 2 * B0 * N * (B / A) * (1 + epsilon))
    scale = max(1.0, finite[1])
    ok_finite = achieved.lower >= finite[0] - tol * scale and achieved.upper <= finite[1] + tol * scale
    ok_loose = achieved.lower >= loose[0] - tol * scale and achieved.upper <= loose[1] + tol * scale
    counts = np.zeros(len(F), dtype=np.int64)
    counts[active] = inner.counts
    details = dict(inner.details)
    details.update({
        "A": A, "B": B, "N": N,
        "finite_window": list(finite), "loose_window": list(loose),
        "finite_window_ok": bool(ok_finite), "loose_window_ok": bool(ok_loose),
        "active": active.tolist(),
    })
    return SamplingResult(pi.tolist(), counts.tolist(), inner.K, inner.eta,
                          (achieved.lower, achieved.upper), finite, (A0, B0),
                          bool(ok_finite and ok_loose and achieved.lower > 0 and inner.satisfied),
                          inner.block, details)


def discretization_window(A, B, N, epsilon):
    """``[A_0 N (1 - eps), 3 B_0 N (B/A)(1 + eps)]``."""
    A0, B0 = partition_constants()
    return A0 * N * (1 - epsilon), 3 * B0 * N * (B / A) * (1 + epsilon)


def discretize_continuous(CF, epsilon, N=None, oracle=None, mode="auto", seed=0,
                          trials=DEFAULT_TRIALS, tol=CERT_TOL, max_cells=1 << 18,
                          max_replicated=MAX_REPLICATED):
    """Sample points ``t_pi(n)`` whose vectors form a discrete frame.

    The frame bounds ``(A, B)`` are the declared ones, or else those of the
    cell quadrature.  If the cells already give bounds within
    ``[A(1 - eps), B(1 + eps)]`` they are used as they are; otherwise they
    are refined to accuracy ``A eps / 6``.  The scalable frame
    ``{sqrt(mu_n) phi_{t_n}}`` is then sampled with norm cap ``N/(1 - eps)``.
    The result is certified against ``[A_0 N (1 - eps), 3 B_0 N (B/A)(1 + eps)]``,
    which contains the finite-dimensional guarantee when ``eps <= 1/3``.
    """
    epsilon = float(epsilon)
    if not (0 < epsilon < 1):
        raise InvalidInputError("epsilon must lie in (0, 1)")
    coarse = frame_bounds(equivalent_discrete(CF))
    if CF.declared_bounds is not None:
        A, B = CF.declared_bounds
    else:
        A, B = coarse.lower, coarse.upper
    if not A > 0:
        raise NotAFrameError("zero lower frame bound")
    if N is None:
        N = CF.norm_cap if CF.norm_cap is not None else float(np.max(CF.squared_norms()))
    N = float(N)
    refined = False
    approx_summary = None
    if A * (1 - epsilon) - tol <= coarse.lower and coarse.upper <= B * (1 + epsilon) + tol:
        model = CF
    else:
        if CF.piecewise_constant:
            raise DiscretizationTooCoarseError(
                "cell bounds miss the declared bounds and the model cannot be refined",
                suggested_epsilon=None)
        eps_a = min(1.0, A * epsilon / 6)
        approx = approximate_by_countable(CF, eps_a, oracle, max_cells=max_cells)
        model = approx.model
        refined = True
        approx_summary = approx.summary()
    D = equivalent_discrete(model)
    keep = np.flatnonzero(np.isfinite(model.weights))
    rep = frame_bounds(D)
    if rep.lower <= 0:
        raise DiscretizationTooCoarseError(
            "discretized frame has zero lower bound", suggested_epsilon=epsilon / 2)
    vecs = FrameSystem(D.vectors)
    amps = np.sqrt(D.weights)
    Ncap = N / (1 - epsilon)
    res = sample_scalable_general(vecs, amps, Ncap, epsilon, mode=mode, seed=seed,
                                  trials=trials, tol=tol, max_replicated=max_replicated)
    cells = keep[np.asarray(res.pi, dtype=np.int64)]
    points = model.points[cells]
    achieved = res.achieved
    window = discretization_window(A, B, N, epsilon)
    scale = max(1.0, window[1])
    ok = bool(achieved[0] > 0 and achieved[0] >= window[0] - tol * scale
              and achieved[1] <= window[1] + tol * scale)
    details = dict(res.details)
    details.update({
        "A": A, "B": B, "N": N, "N_sampling": Ncap,
        "cell_bounds": [coarse.lower, coarse.upper],
        "discretized_bounds": [rep.lower, rep.upper],
        "refined": refined, "approximation": approx_summary,
        "cells": cells.tolist(), "cell_ids": [model.ids[i] for i in cells],
        "points": points.tolist(), "window": list(window),
        "window_contains_guarantee": epsilon <= 1 / 3,
    })
    return SamplingResult(res.pi, res.counts, res.K, res.eta, achieved, window, res.constants,
                          ok, res.block, details)
