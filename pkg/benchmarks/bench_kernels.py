"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-N wall time of each backend,
the speed-up, and the largest absolute difference of the outputs.
"""

import argparse
import time

import numpy as np

from framedisc import _kernels_py

try:
    from framedisc import _kernels as compiled
except ImportError:
    compiled = None


def _hermitian(rng, b, n):
    X = rng.standard_normal((b, n, n)) + 1j * rng.standard_normal((b, n, n))
    return (X + X.conj().transpose(0, 2, 1)) / 2


def _unit_outers(rng, m, d):
    V = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    V /= np.linalg.norm(V, axis=1, keepdims=True) * np.sqrt(m / d)
    return V[:, :, None] * V.conj()[:, None, :]


def cases(rng):
    A16 = _hermitian(rng, 1, 16)[0]
    A48 = _hermitian(rng, 1, 48)[0]
    stack = _hermitian(rng, 4096, 3)
    P = _unit_outers(rng, 12, 3)
    zeros = np.zeros((2, 3, 3), dtype=np.complex128)
    assign = rng.integers(0, 2, size=(4096, 12))
    return [
        ("jacobi_eigh d=16", lambda k: k.jacobi_eigh(A16)[0]),
        ("jacobi_eigh d=48", lambda k: k.jacobi_eigh(A48)[0]),
        ("batched_eigvalsh 4096 x 3x3", lambda k: k.batched_eigvalsh(stack)),
        ("block_extreme_eigs 4096 x m=12 r=2", lambda k: k.block_extreme_eigs(P, zeros, assign)),
        ("exhaustive 2^12 assignments", lambda k: k.exhaustive_block_extreme_eigs(P, zeros, 2, 0, 4096)),
    ]


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    if compiled is None:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':38s} {'python [s]':>11s} {'cython [s]':>11s} {'speed-up':>9s} {'max diff':>9s}")
    for name, call in cases(rng):
        tp, op = best_time(lambda: call(_kernels_py), args.repeat)
        if compiled is None:
            print(f"{name:38s} {tp:11.4f} {'-':>11s} {'-':>9s} {'-':>9s}")
            continue
        tc, oc = best_time(lambda: call(compiled), args.repeat)
        diff = float(np.max(np.abs(np.asarray(op) - np.asarray(oc))))
        print(f"{name:38s} {tp:11.4f} {tc:11.4f} {tp / tc:9.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
