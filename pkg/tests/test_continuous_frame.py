import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from framedisc.continuous_frame import (
    CellSubset,
    ContinuousFrameModel,
    GridSupOracle,
    LipschitzOracle,
    ZeroOracle,
    approximate_by_countable,
    approximation_deviation,
    cell_frame_operator,
    equivalent_discrete,
    oracle_from_dict,
    partial_frame_operator,
    quadrature_nodes,
    select_subset_matching_weights,
    weighted_frame_operator,
)
from framedisc.errors import (
    AtomicityError,
    InvalidInputError,
    InvalidWeightError,
    IrreducibleCellError,
    NotBesselError,
    RefinementLimitError,
)
from framedisc.exemplars import finite_fourier_frame, fourier_oracle
from framedisc.frame_model import frame_bounds, frame_operator
from framedisc.operator_core import operator_norm, psd_leq


def table_model(rng, n=10, d=3, divisible=True):
    V = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    w = rng.uniform(0.1, 1.0, n)
    return ContinuousFrameModel(w, np.arange(n, dtype=float), divisible, vectors=V)


def unit_cell(vec, divisible=True):
    return ContinuousFrameModel([1.0], [[0.5]], divisible, vectors=[vec], extents=[[[0.0, 1.0]]])


def test_equivalent_discrete_examples():
    F = equivalent_discrete(ContinuousFrameModel([1.0], [0.0], True, vectors=[[1, 0]]))
    assert len(F) == 1 and np.allclose(F.vectors, [[1, 0]]) and np.allclose(F.weights, [1])
    M = ContinuousFrameModel([0.5, 0.5], [0.0, 1.0], True, vectors=[[1, 0], [1, 0]])
    assert np.allclose(frame_operator(equivalent_discrete(M)), np.diag([1, 0]))
    rep = frame_bounds(equivalent_discrete(finite_fourier_frame(8, [0, 1, 2])))
    assert abs(rep.lower - 1) <= 1e-9 and abs(rep.upper - 1) <= 1e-9


def test_infinite_weight_only_on_zero_vectors():
    M = ContinuousFrameModel([np.inf, 1.0], [0.0, 1.0], True, vectors=[[0, 0], [1, 0]])
    assert len(equivalent_discrete(M)) == 1
    with pytest.raises(NotBesselError):
        ContinuousFrameModel([np.inf], [0.0], True, vectors=[[1, 0]])


def test_partial_operator_examples(rng):
    M = table_model(rng)
    full = partial_frame_operator(M, CellSubset.full(M))
    assert np.array_equal(full, cell_frame_operator(M))
    assert np.array_equal(partial_frame_operator(M, CellSubset.empty(M)), np.zeros((3, 3)))
    half = partial_frame_operator(unit_cell([1, 0]), [0.5])
    assert np.allclose(half, np.diag([0.5, 0]), atol=1e-16)


def test_partial_operator_checks():
    with pytest.raises(AtomicityError):
        partial_frame_operator(unit_cell([1, 0], divisible=False), [0.5])
    with pytest.raises(InvalidWeightError):
        partial_frame_operator(unit_cell([1, 0]), [1.5])


def test_quadrature_consistency_exact(rng):
    M = table_model(rng, n=12)
    for _ in range(20):
        idx = np.flatnonzero(rng.random(12) < 0.5)
        S_E = partial_frame_operator(M, CellSubset.from_indices(M, idx))
        S_F = frame_operator(equivalent_discrete(M).subset(idx)) if idx.size else np.zeros((3, 3))
        assert np.array_equal(S_E, S_F)


def test_monotone_in_subsets(rng):
    M = table_model(rng)
    for _ in range(20):
        s1 = rng.random(10) * M.weights
        s2 = np.minimum(M.weights, s1 + rng.random(10) * M.weights)
        assert psd_leq(partial_frame_operator(M, s1), partial_frame_operator(M, s2))


def test_select_subset_examples(rng):
    M = table_model(rng)
    E = select_subset_matching_weights(M, np.ones(10))
    assert np.allclose(E.sub_weights, M.weights)
    assert np.array_equal(partial_frame_operator(M, E), weighted_frame_operator(M, np.ones(10)))
    half = select_subset_matching_weights(unit_cell([1, 1j]), [0.5])
    assert half.sub_weights.tolist() == [0.5]
    phi = np.array([1, 1j])
    assert np.allclose(partial_frame_operator(unit_cell(phi), half), 0.5 * np.outer(phi, phi.conj()))


def test_select_subset_random_exact(rng):
    M = table_model(rng)
    for _ in range(100):
        tau = rng.random(10)
        E = select_subset_matching_weights(M, tau)
        diff = partial_frame_operator(M, E) - weighted_frame_operator(M, tau)
        assert oracles.opnorm(diff) <= 1e-12


def test_select_subset_atoms():
    M = ContinuousFrameModel([1.0, 1.0], [0.0, 1.0], False, vectors=[[1, 0], [0, 1]])
    E = select_subset_matching_weights(M, [1.0, 0.0])
    assert E.sub_weights.tolist() == [1.0, 0.0]
    with pytest.raises(AtomicityError):
        select_subset_matching_weights(M, [0.5, 0.0])


# countable approximation

def test_piecewise_constant_returned_unchanged(rng):
    M = table_model(rng)
    for eps in (0.5, 0.01):
        ap = approximate_by_countable(M, eps)
        assert ap.model is M and ap.error_bound == 6 * eps


def test_zero_oscillation_keeps_cells():
    CF = finite_fourier_frame(8, [0, 1])
    ap = approximate_by_countable(CF, 0.1, ZeroOracle())
    assert len(ap.model) == 8 and np.isclose(ap.error_bound, 0.6) and ap.splits == 0


def test_fourier_refinement_against_finer_grid(rng):
    CF = finite_fourier_frame(8, [0, 1, 2])
    for eps in (0.1, 0.01):
        ap = approximate_by_countable(CF, eps, fourier_oracle(8, [0, 1, 2]))
        assert ap.error_bound == pytest.approx(6 * eps)
        owner, nodes, nw = quadrature_nodes(ap.model, 2)
        for _ in range(10):
            tau = rng.random(nw.size)
            # direct computation: exact vectors on the twice-finer grid against the cell values
            Vphi = oracles.characters(8, [0, 1, 2], nodes[:, 0])
            Vpsi = ap.model.vectors[owner]
            Sphi = oracles.frame_operator(Vphi, tau * nw)
            Spsi = oracles.frame_operator(Vpsi, tau * nw)
            dev = oracles.opnorm(Sphi - Spsi)
            assert dev <= 6 * eps
            assert abs(dev - approximation_deviation(CF, ap, tau, q=2)) <= 1e-12


def test_fourier_refinement_stays_parseval():
    ap = approximate_by_countable(finite_fourier_frame(8, [0, 1, 2]), 0.1,
                                  fourier_oracle(8, [0, 1, 2]))
    rep = frame_bounds(equivalent_discrete(ap.model))
    assert abs(rep.lower - 1) <= 1e-10 and abs(rep.upper - 1) <= 1e-10
    assert np.all(ap.oscillations <= ap.targets + 1e-15)


def test_refinement_errors():
    CF = finite_fourier_frame(8, [0, 1, 2])
    with pytest.raises(RefinementLimitError):
        approximate_by_countable(CF, 0.001, fourier_oracle(8, [0, 1, 2]), max_cells=64)
    with pytest.raises(InvalidInputError):
        approximate_by_countable(CF, 2.0)
    atoms = CF.replace(divisible=np.zeros(8, dtype=bool))
    with pytest.raises(IrreducibleCellError):
        approximate_by_countable(atoms, 0.1, fourier_oracle(8, [0, 1, 2]))


def test_oracles():
    ev = lambda P: np.exp(1j * P)  # noqa: E731
    P = np.array([[0.0], [1.0]])
    ext = np.array([[[0.0, 1.0]], [[0.5, 1.5]]])
    lip = LipschitzOracle(1.0)
    assert np.allclose(lip(ev, P, ext), [1.0, 0.5])
    grid = GridSupOracle(4)(ev, P, ext)
    assert np.all(grid <= lip(ev, P, ext) + 1e-15) and np.all(grid > 0)
    assert np.array_equal(ZeroOracle()(ev, P, ext), [0, 0])
    assert isinstance(oracle_from_dict(lip.to_dict()), LipschitzOracle)
    assert oracle_from_dict({"kind": "grid", "q": 3}).q == 3


def test_model_json_round_trip(rng):
    M = table_model(rng)
    back = ContinuousFrameModel.from_dict(json.loads(json.dumps(M.to_dict())))
    assert np.array_equal(back.vectors, M.vectors) and np.array_equal(back.weights, M.weights)
    CF = finite_fourier_frame(8, [0, 3])
    back = ContinuousFrameModel.from_dict(json.loads(json.dumps(CF.to_dict())))
    assert np.array_equal(back.evaluate(np.array([[0.25]])), CF.evaluate(np.array([[0.25]])))
    assert back.declared_bounds == (1.0, 1.0)


def test_model_validation():
    with pytest.raises(InvalidInputError):
        ContinuousFrameModel([], [], True, vectors=np.zeros((0, 2)))
    with pytest.raises(InvalidInputError):
        ContinuousFrameModel([1.0], [[2.0]], True, vectors=[[1]], extents=[[[0.0, 1.0]]])
    with pytest.raises(InvalidInputError):
        ContinuousFrameModel([1.0], [0.0], True, vectors=[[2]], norm_cap=1.0)


@given(st.lists(st.floats(0, 1), min_size=6, max_size=6), st.integers(0, 1000))
def test_lyapunov_identity_property(tau, seed):
    M = table_model(np.random.default_rng(seed), n=6, d=2)
    E = select_subset_matching_weights(M, tau)
    assert operator_norm(partial_frame_operator(M, E) - weighted_frame_operator(M, tau)) <= 1e-12


def test_budget_rule_certified_sum(rng):
    from framedisc.exemplars import oracle_for, quadrature_wavelet_frame

    W = quadrature_wavelet_frame(K=1, scale_edges=[0.5, 1.0, 2.0])
    ap = approximate_by_countable(W, 0.1, oracle_for(W))
    assert ap.rule == "budget" and ap.certified_sum <= 0.6
    owner, nodes, nw = quadrature_nodes(ap.model, 2)
    Vphi, Vpsi = W.evaluate(nodes), ap.model.vectors[owner]
    for _ in range(10):
        tau = rng.random(nw.size)
        dev = oracles.opnorm(oracles.frame_operator(Vphi, tau * nw)
                             - oracles.frame_operator(Vpsi, tau * nw))
        assert dev <= ap.certified_sum


def test_rule_selection():
    CF = finite_fourier_frame(8, [0, 1, 2])
    orc = fourier_oracle(8, [0, 1, 2])
    assert approximate_by_countable(CF, 0.1, orc).rule == "lemma"
    ap = approximate_by_countable(CF, 0.1, orc, rule="budget")
    assert ap.rule == "budget" and ap.certified_sum <= 0.6 and len(ap.model) < 4096
    with pytest.raises(RefinementLimitError):
        approximate_by_countable(CF, 0.001, orc, max_cells=64, rule="lemma")
    assert approximate_by_countable(CF, 0.01, orc, max_cells=1024).rule == "budget"
    with pytest.raises(InvalidInputError):
        approximate_by_countable(CF, 0.1, orc, rule="exact")
