import importlib.util
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from framedisc import _kernels_py as py
from framedisc._backend import BACKEND

HAVE_COMPILED = importlib.util.find_spec("framedisc._kernels") is not None
if HAVE_COMPILED:
    from framedisc import _kernels as cy


def hermitian(rng, n, b=None):
    shape = (n, n) if b is None else (b, n, n)
    X = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return (X + np.swapaxes(X, -1, -2).conj()) / 2


def backends():
    return [py, cy] if HAVE_COMPILED else [py]


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_jacobi_matches_lapack(rng, n):
    A = hermitian(rng, n)
    for k in backends():
        w, V = k.jacobi_eigh(A)
        assert np.allclose(w, oracles.eigvalsh(A), atol=1e-12 * max(1, np.abs(A).max()))
        assert np.allclose(V.conj().T @ V, np.eye(n), atol=1e-12)
        assert np.allclose(A @ V, V * w, atol=1e-11)


def test_jacobi_degenerate():
    for k in backends():
        w, _ = k.jacobi_eigh(np.eye(4))
        assert np.array_equal(w, np.ones(4))
        w, _ = k.jacobi_eigh(np.zeros((3, 3)))
        assert np.array_equal(w, np.zeros(3))


@given(st.integers(1, 6), st.integers(0, 10_000))
def test_batched_eigvalsh_property(n, seed):
    A = hermitian(np.random.default_rng(seed), n, b=4)
    for k in backends():
        w = k.batched_eigvalsh(A)
        assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-12 * max(1, np.abs(A).max()))


def test_block_extremes_against_direct(rng):
    V = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    outers = np.einsum("ij,ik->ijk", V, V.conj())
    offsets = np.stack([0.1 * np.eye(3), 0.2 * np.eye(3)]).astype(np.complex128)
    assign = rng.integers(0, 2, (20, 6)).astype(np.int32)
    for k in backends():
        ext = k.block_extreme_eigs(outers, offsets, assign)
        for a, row in zip(assign, ext):
            for b in range(2):
                S = oracles.frame_operator(V[a == b]) - offsets[b]
                lo, hi = oracles.bounds(S)
                assert abs(row[b, 0] - lo) <= 1e-12 and abs(row[b, 1] - hi) <= 1e-12


def test_exhaustive_enumeration_order(rng):
    V = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    outers = np.einsum("ij,ik->ijk", V, V.conj())
    offsets = np.zeros((3, 2, 2), dtype=np.complex128)
    codes = py.decode_assignments(0, 3 ** 5, 5, 3)
    assert codes[1].tolist() == [0, 0, 0, 0, 1] and codes[-1].tolist() == [2] * 5
    for k in backends():
        ext = k.exhaustive_block_extreme_eigs(outers, offsets, 3, 7, 50)
        direct = py.block_extreme_eigs(outers, offsets, codes[7:57])
        assert np.allclose(ext, direct, atol=1e-12)


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernels not built")
def test_backend_parity(rng):
    A = hermitian(rng, 12, b=30)
    assert np.max(np.abs(cy.batched_eigvalsh(A) - py.batched_eigvalsh(A))) <= 1e-12
    assert BACKEND in ("cython", "python")


def test_pure_python_switch():
    env = dict(os.environ, FRAMEDISC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import framedisc; print(framedisc.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
