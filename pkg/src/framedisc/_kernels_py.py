"""Pure numpy kernels. Same interface as the compiled ``_kernels`` module.

The eigensolver is a cyclic Jacobi scheme on complex Hermitian matrices,
vectorised over a batch axis.  Inside a sweep the off-diagonal pairs are
visited in round-robin (tournament) order so that every round rotates a
set of disjoint ``(p, q)`` planes at once; disjoint plane rotations
commute, so one round is a single vectorised unitary update.
"""

from functools import lru_cache

import numpy as np

BACKEND = "python"

TOL = 1e-14
MAX_SWEEPS = 50
_SKIP = 1e-18
_CHUNK = 8192


@lru_cache(maxsize=None)
def _rounds(n):
    """Tournament pairings: n-1 rounds (n even) of n/2 disjoint pairs."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = []
        for i in range(size // 2):
            p, q = players[i], players[size - 1 - i]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        if pairs:
            arr = np.array(pairs, dtype=np.intp)
            rounds.append((arr[:, 0].copy(), arr[:, 1].copy()))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _jacobi_batch(A, want_vectors):
    b, n, _ = A.shape
    V = None
    if want_vectors:
        V = np.broadcast_to(np.eye(n, dtype=np.complex128), (b, n, n)).copy()
    if n == 1:
        return A, V
    fro = np.sqrt(np.sum(np.abs(A) ** 2, axis=(1, 2)))
    rounds = _rounds(n)
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.abs(A[:, offmask]) ** 2, axis=1))
        if np.all(off <= TOL * fro):
            break
        for P, Q in rounds:
            apq = A[:, P, Q]
            r = np.abs(apq)
            active = r > _SKIP * fro[:, None]
            r_safe = np.where(active, r, 1.0)
            phase = np.where(active, apq / r_safe, 1.0)
            tau = (A[:, Q, Q].real - A[:, P, P].real) / (2.0 * r_safe)
            sgn = np.where(tau >= 0.0, 1.0, -1.0)
            t = sgn / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            c = np.where(active, c, 1.0)
            s = np.where(active, s, 0.0)
            ep = np.conj(phase)

            cc = c[:, None, :]
            colP = A[:, :, P]
            colQ = A[:, :, Q]
            A[:, :, P] = colP * cc - colQ * (s * ep)[:, None, :]
            A[:, :, Q] = colP * s[:, None, :] + colQ * (c * ep)[:, None, :]
            rowP = A[:, P, :]
            rowQ = A[:, Q, :]
            A[:, P, :] = rowP * c[:, :, None] - rowQ * (s * phase)[:, :, None]
            A[:, Q, :] = rowP * s[:, :, None] + rowQ * (c * phase)[:, :, None]
            zero = np.where(active, 0.0, A[:, P, Q])
            A[:, P, Q] = zero
            A[:, Q, P] = np.conj(zero)
            if want_vectors:
                vP = V[:, :, P]
                vQ = V[:, :, Q]
                V[:, :, P] = vP * cc - vQ * (s * ep)[:, None, :]
                V[:, :, Q] = vP * s[:, None, :] + vQ * (c * ep)[:, None, :]
    return A, V


def jacobi_eigh(A):
    """Eigenvalues (ascending) and eigenvectors of one Hermitian matrix."""
    A = np.array(A, dtype=np.complex128, copy=True)[None]
    D, V = _jacobi_batch(A, True)
    w = D[0].diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(V[0][:, order])


def batched_eigvalsh(A):
    """Ascending eigenvalues for a stack of Hermitian matrices ``(b, n, n)``."""
    A = np.array(A, dtype=np.complex128, copy=True)
    if A.shape[0] == 0:
        return np.zeros((0, A.shape[1]))
    D, _ = _jacobi_batch(A, False)
    w = np.diagonal(D, axis1=1, axis2=2).real.copy()
    w.sort(axis=1)
    return w


def _blocks_extremes(outers, offsets, assign):
    m, d, _ = outers.shape
    r = offsets.shape[0]
    flat = outers.reshape(m, d * d)
    onehot = (assign[:, None, :] == np.arange(r)[None, :, None]).astype(np.float64)
    blocks = (onehot @ flat).reshape(-1, r, d, d) - offsets[None]
    w = batched_eigvalsh(blocks.reshape(-1, d, d)).reshape(-1, r, d)
    return np.stack([w[..., 0], w[..., -1]], axis=-1)


def block_extreme_eigs(outers, offsets, assign):
    """Smallest/largest eigenvalue of ``sum_{i in block k} outers[i] - offsets[k]``.

    ``assign`` is ``(n, m)`` with block labels in ``range(r)``; returns
    ``(n, r, 2)``.
    """
    outers = np.ascontiguousarray(outers, dtype=np.complex128)
    offsets = np.ascontiguousarray(offsets, dtype=np.complex128)
    assign = np.asarray(assign)
    out = np.empty((assign.shape[0], offsets.shape[0], 2))
    for lo in range(0, assign.shape[0], _CHUNK):
        out[lo:lo + _CHUNK] = _blocks_extremes(outers, offsets, assign[lo:lo + _CHUNK])
    return out


def decode_assignments(start, count, m, r):
    """Assignments with lexicographic rank ``start .. start+count-1``."""
    idx = np.arange(start, start + count, dtype=np.int64)
    powers = r ** np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % r).astype(np.int32)


def exhaustive_block_extreme_eigs(outers, offsets, r, start, count):
    m = outers.shape[0]
    out = np.empty((count, offsets.shape[0], 2))
    for lo in range(0, count, _CHUNK):
        n = min(_CHUNK, count - lo)
        out[lo:lo + n] = block_extreme_eigs(
            outers, offsets, decode_assignments(start + lo, n, m, r))
    return out
