import math

import numpy as np
import pytest

import oracles
from framedisc.continuous_frame import ContinuousFrameModel, equivalent_discrete
from framedisc.errors import (
    DiscretizationTooCoarseError,
    HypothesisError,
    InvalidInputError,
    NotAFrameError,
    SearchBudgetError,
)
from framedisc.exemplars import beurling_density_check, finite_fourier_frame, quadrature_wavelet_frame
from framedisc.frame_model import FrameSystem
from framedisc.partition_engine import partition_constants, universal_constant
from framedisc.sampler import (
    choose_K,
    discretization_window,
    discretize_continuous,
    replication_counts,
    sample_scalable_finite,
    sample_scalable_general,
)


def unit_scalable(rng, m, d):
    """Unit vectors phi_i and amplitudes a_i with {a_i phi_i} Parseval."""
    V = oracles.random_parseval(rng, m, d)
    a = np.linalg.norm(V, axis=1)
    return FrameSystem(V / a[:, None]), a


def check_bounds(F, pi):
    return oracles.bounds(oracles.frame_operator(F.vectors[np.asarray(pi)]))


# K and counts

def test_choose_K_conditions():
    for eta in (0.01, 0.3, 0.5, 1.0):
        for eps in (0.1, 0.25, 0.5, 0.9):
            K = choose_K(eta, eps)
            h = 1 - eps / 2
            assert eta / K <= h and (K + 1) / (K * h) <= 1 + eps
            if K > 1:
                assert eta / (K - 1) > h or K / ((K - 1) * h) > 1 + eps


def test_count_formula_example():
    # a = (1, 1/sqrt 2) on {e1, e2}: eta = 1/2 and N = (2K, K)
    a2 = np.array([1.0, 0.5])
    for eps in (0.25, 0.5):
        K = choose_K(0.5, eps)
        assert replication_counts(a2, 0.5, K).tolist() == [2 * K, K]
    assert choose_K(0.5, 0.5) == 8


def test_counts_guard_rounding():
    assert replication_counts([0.3], 0.1, 1).tolist() == [3]


def test_choose_K_domain():
    with pytest.raises(InvalidInputError):
        choose_K(0.5, 1.0)
    with pytest.raises(InvalidInputError):
        choose_K(0.0, 0.5)


# finite sampling

def test_uniform_duplication():
    F = FrameSystem(np.eye(2))
    res = sample_scalable_finite(F, np.ones(2), 0.5)
    assert res.K == 8 and res.counts == [8, 8]
    assert res.achieved[0] > 0 and res.satisfied
    assert set(res.pi) <= {0, 1}


def test_sandwich_and_replication(rng):
    for _ in range(10):
        F, a = unit_scalable(rng, 6, 3)
        eps = float(rng.uniform(0.2, 0.8))
        res = sample_scalable_finite(F, a, eps)
        K, eta = res.K, res.eta
        N = np.array(res.counts)
        assert np.array_equal(N, np.ceil(K * a ** 2 / eta - 1e-12).astype(int))
        kappa = np.repeat(np.arange(6), N)
        b2 = a[kappa] ** 2 / N[kappa]
        assert np.all(b2 >= eta / (K + 1)) and np.all(b2 <= eta / K)
        Sa = oracles.frame_operator(F.vectors, a ** 2)
        Sb = oracles.frame_operator(F.vectors[kappa], b2)
        assert np.max(np.abs(Sa - Sb)) <= 1e-10
        Sr = oracles.frame_operator(F.vectors[kappa]) * eta / K
        assert oracles.bounds(Sb)[0] >= 1 - eps / 2 - 1e-10
        assert oracles.bounds(Sr - Sb)[0] >= -1e-10
        assert oracles.bounds((K + 1) / K * Sb - Sr)[0] >= -1e-10
        lo, hi = check_bounds(F, res.pi)
        A0, B0 = partition_constants()
        assert lo > 0 and lo >= A0 - 1e-9 and hi <= B0 * (1 + eps) + 1e-9
        mult = np.bincount(res.pi, minlength=6)
        assert np.all(mult <= N)


def test_finite_preconditions(rng):
    F, a = unit_scalable(rng, 5, 2)
    with pytest.raises(HypothesisError):
        sample_scalable_finite(F, 0.5 * a, 0.5)
    with pytest.raises(HypothesisError):
        sample_scalable_finite(F.scaled(2), a / 2, 0.5)
    with pytest.raises(InvalidInputError):
        sample_scalable_finite(FrameSystem(F.vectors, np.ones(5)), a, 0.5)
    with pytest.raises(NotAFrameError):
        sample_scalable_finite(F, np.zeros(5), 0.5)


def test_zero_scalar_dropped(rng):
    F, a = unit_scalable(rng, 5, 2)
    G = FrameSystem(np.vstack([F.vectors, [[1, 0]]]))
    res = sample_scalable_finite(G, np.append(a, 0.0), 0.5)
    assert 5 not in res.pi and res.details["dropped_zero_scalar"] == [5]


def test_replication_cap():
    F = FrameSystem(np.eye(2))
    with pytest.raises(SearchBudgetError):
        sample_scalable_finite(F, np.ones(2), 0.5, max_replicated=4)


# general sampling

def test_general_reduces_to_finite():
    F = FrameSystem(np.eye(2))
    g = sample_scalable_general(F, np.ones(2), 1.0, 0.5)
    f = sample_scalable_finite(F, np.ones(2), 0.5)
    assert g.pi == f.pi and g.K == f.K


def test_general_scaling_equivariance(rng):
    V = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    F = FrameSystem(V)
    a = rng.uniform(0.5, 1.5, 8)
    N = float(np.max(np.sum(np.abs(V) ** 2, axis=1)))
    c = 1.7 - 0.4j
    r1 = sample_scalable_general(F, a, N, 0.4, seed=5)
    r2 = sample_scalable_general(F.scaled(c), a, abs(c) ** 2 * N, 0.4, seed=5)
    assert r1.pi == r2.pi
    assert np.allclose(np.array(r2.achieved), abs(c) ** 2 * np.array(r1.achieved), rtol=1e-9)


def test_general_random_d3(rng):
    for _ in range(5):
        V = rng.standard_normal((10, 3)) + 1j * rng.standard_normal((10, 3))
        F = FrameSystem(V)
        a = rng.uniform(0.3, 1.0, 10)
        N = float(np.max(np.sum(np.abs(V) ** 2, axis=1)))
        eps = 0.3
        res = sample_scalable_general(F, a, N, eps)
        A, B = oracles.bounds(oracles.frame_operator(V, a ** 2))
        lo, hi = check_bounds(F, res.pi)
        A0, B0 = partition_constants()
        assert lo > 0
        assert lo >= A0 * N - 1e-9 * B0 * N * B / A
        assert hi <= B0 * N * (B / A) * (1 + eps) * (1 + 1e-9)
        assert res.satisfied and res.details["loose_window_ok"]


# discretization

def test_discretize_fourier():
    CF = finite_fourier_frame(8, [0, 1, 2])
    eps = 0.25
    res = discretize_continuous(CF, eps)
    lo_w, hi_w = discretization_window(1.0, 1.0, 3.0, eps)
    A0, B0 = partition_constants()
    assert (lo_w, hi_w) == pytest.approx((A0 * 3 * (1 - eps), 3 * B0 * 3 * (1 + eps)))
    pts = np.array(res.details["points"])[:, 0]
    lo, hi = oracles.bounds(oracles.frame_operator(oracles.characters(8, [0, 1, 2], pts)))
    assert lo > 0 and lo >= lo_w - 1e-9 and hi <= hi_w + 1e-9
    assert (lo, hi) == pytest.approx(res.achieved, rel=1e-10)
    assert res.satisfied and not res.details["refined"]


def test_discretize_fourier_with_refinement():
    CF = finite_fourier_frame(8, [0, 1, 2]).replace(declared_bounds=(0.9, 1.1))
    res = discretize_continuous(CF, 0.05)
    assert res.satisfied and res.achieved[0] > 0


def test_discretize_density():
    CF = finite_fourier_frame(16, [0, 1, 2])
    res = discretize_continuous(CF, 0.25)
    pts = np.array(res.details["points"])[:, 0]
    rep = beurling_density_check(pts, 3, universal_constant(), 4.0)
    assert rep.satisfied and rep.max_density <= 4 * universal_constant() * 3


def test_discretize_disguised_discrete(rng):
    V = oracles.random_parseval(rng, 6, 2)
    w = np.sum(np.abs(V) ** 2, axis=1)
    M = ContinuousFrameModel(w, np.arange(6, dtype=float), True, vectors=V / np.sqrt(w)[:, None])
    res = discretize_continuous(M, 0.25)
    assert res.satisfied and set(res.details["cells"]) <= set(range(6))


def test_discretize_atoms_only(rng):
    V = oracles.random_parseval(rng, 5, 2)
    w = np.sum(np.abs(V) ** 2, axis=1)
    M = ContinuousFrameModel(w, np.arange(5, dtype=float), False, vectors=V / np.sqrt(w)[:, None])
    res = discretize_continuous(M, 0.25)
    assert not res.details["refined"] and res.satisfied


def test_discretize_piecewise_cannot_refine(rng):
    M = ContinuousFrameModel([1.0, 1.0], [0.0, 1.0], True, vectors=[[1, 0], [0, 1]],
                             declared_bounds=(2.0, 2.0))
    with pytest.raises(DiscretizationTooCoarseError):
        discretize_continuous(M, 0.25)


def test_discretize_wavelet_budget():
    W = quadrature_wavelet_frame(n_scales=12)
    with pytest.raises(SearchBudgetError):
        discretize_continuous(W, 0.25)


def test_discretize_trims_infinite_zero_cells():
    M = ContinuousFrameModel([np.inf, 0.5, 0.5], [0.0, 1.0, 2.0], True,
                             vectors=[[0, 0], [1, 0], [0, 1]])
    res = discretize_continuous(M, 0.25)
    assert 0 not in res.details["cells"] and res.satisfied
    assert len(equivalent_discrete(M)) == 2


def test_window_contains_guarantee_flag():
    CF = finite_fourier_frame(4, [0, 1])
    assert discretize_continuous(CF, 0.3).details["window_contains_guarantee"]
    assert not discretize_continuous(CF, 0.5).details["window_contains_guarantee"]
    # (1 + eps) <= 3 (1 - eps)^2 exactly when eps <= 1/3
    for eps in (0.1, 1 / 3):
        assert 1 + eps <= 3 * (1 - eps) ** 2 + 1e-15
    assert 1 + 0.34 > 3 * 0.66 ** 2
    assert math.isclose(3 * (1 - 1 / 3) ** 2, 1 + 1 / 3)
