"""Continuous frames over a cell-partitioned measure space.

A model is a finite list of cells.  Cell ``n`` carries a weight ``mu_n``,
a sample point ``t_n`` (a coordinate vector in the parameter space), a
divisibility flag (divisible cells model non-atomic pieces, the others
atoms) and optionally an axis-aligned box ``extent`` containing ``t_n``.
The measure inside a box is taken uniform with total mass ``mu_n``.

Vectors come from a vectorised ``evaluator(points) -> (n, d)`` array; a
model without evaluator is piecewise constant, its value on each cell
being the stored vector at the sample point.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AtomicityError,
    InvalidInputError,
    InvalidWeightError,
    IrreducibleCellError,
    NotBesselError,
    RefinementLimitError,
    ShapeError,
)
from .frame_model import FrameSystem, frame_operator, quadratic_sum
from .operator_core import operator_norm

WEIGHT_RTOL = 1e-12


@dataclass(frozen=True)
class MeasureCell:
    id: str
    weight: float
    point: tuple
    divisible: bool
    extent: tuple = None


class ContinuousFrameModel:
    """Immutable cell model of a continuous frame.

    ``norm_cap`` is the bound ``N`` with ``||phi_t||^2 <= N``; when given it is
    checked at every sample point.  ``generator`` is an optional
    ``{"name", "params"}`` record naming the exemplar that produced the
    evaluator, used for serialisation.
    """

    def __init__(self, weights, points, divisible, vectors=None, evaluator=None,
                 extents=None, ids=None, norm_cap=None, declared_bounds=None,
                 label="", generator=None, depth=None):
        w = np.array(weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise InvalidInputError("a model needs a non-empty 1-d weight list")
        n = w.size
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise InvalidWeightError("cell weights must be non-negative")
        P = np.array(points, dtype=np.float64)
        if P.ndim == 1:
            P = P[:, None]
        if P.ndim != 2 or P.shape[0] != n:
            raise ShapeError(f"points of shape {P.shape} for {n} cells")
        if not np.all(np.isfinite(P)):
            raise InvalidInputError("sample points must be finite")
        div = np.array(divisible, dtype=bool)
        if div.shape == ():
            div = np.full(n, bool(div))
        if div.shape != (n,):
            raise ShapeError("one divisibility flag per cell")
        ext = None
        if extents is not None:
            ext = np.array(extents, dtype=np.float64)
            if ext.shape != P.shape + (2,):
                raise ShapeError(f"extents of shape {ext.shape}, expected {P.shape + (2,)}")
            if np.any(ext[..., 0] > P + 1e-12 * (1 + np.abs(P))) or np.any(
                    ext[..., 1] < P - 1e-12 * (1 + np.abs(P))):
                raise InvalidInputError("sample point outside its cell extent")
        if evaluator is None and vectors is None:
            raise InvalidInputError("either an evaluator or a vector table is required")
        if vectors is None:
            vectors = evaluator(P)
        V = np.array(vectors, dtype=np.complex128)
        if V.ndim != 2 or V.shape[0] != n or V.shape[1] == 0:
            raise ShapeError(f"vector table of shape {V.shape} for {n} cells")
        if not np.all(np.isfinite(V)):
            raise InvalidInputError("vectors must be finite at every sample point")
        sq = np.sum(np.abs(V) ** 2, axis=1)
        if np.any(np.isinf(w) & (sq > 0)):
            raise NotBesselError("infinite cell weight carries a nonzero vector")
        if norm_cap is not None:
            norm_cap = float(norm_cap)
            if np.any(sq > norm_cap * (1 + 1e-12) + 1e-300):
                raise InvalidInputError(f"vector norm^2 {sq.max():.6g} exceeds the cap {norm_cap:.6g}")
        if ids is None:
            ids = [str(i) for i in range(n)]
        ids = [str(i) for i in ids]
        if len(ids) != n:
            raise ShapeError("one id per cell")
        for arr in (w, P, div, V):
            arr.setflags(write=False)
        if ext is not None:
            ext.setflags(write=False)
        self.weights = w
        self.points = P
        self.divisible = div
        self.vectors = V
        self.extents = ext
        self.ids = tuple(ids)
        self.evaluator = evaluator
        self.norm_cap = norm_cap
        self.declared_bounds = None if declared_bounds is None else tuple(map(float, declared_bounds))
        self.label = str(label)
        self.generator = generator
        self.depth = np.zeros(n, dtype=np.int64) if depth is None else np.asarray(depth, dtype=np.int64)
        self._cells = None

    def __len__(self):
        return self.weights.size

    @property
    def dimension(self):
        return self.vectors.shape[1]

    @property
    def parameter_dimension(self):
        return self.points.shape[1]

    @property
    def piecewise_constant(self):
        return self.evaluator is None

    @property
    def cells(self):
        if self._cells is None:
            ext = self.extents
            self._cells = tuple(
                MeasureCell(
                    self.ids[i], float(self.weights[i]), tuple(self.points[i].tolist()),
                    bool(self.divisible[i]),
                    None if ext is None else tuple(map(tuple, ext[i].tolist())))
                for i in range(len(self)))
        return self._cells

    def squared_norms(self):
        return np.sum(np.abs(self.vectors) ** 2, axis=1)

    def active_mask(self):
        """Cells that contribute to operators: finite weight and nonzero vector."""
        return np.isfinite(self.weights) & (self.squared_norms() > 0)

    def evaluate(self, points):
        if self.evaluator is None:
            raise InvalidInputError("piecewise-constant model has no evaluator")
        P = np.asarray(points, dtype=np.float64)
        if P.ndim == 1:
            P = P[:, None]
        return np.asarray(self.evaluator(P), dtype=np.complex128)

    def replace(self, **changes):
        """New model with some constructor arguments replaced."""
        args = dict(
            weights=self.weights, points=self.points, divisible=self.divisible,
            vectors=self.vectors, evaluator=self.evaluator, extents=self.extents,
            ids=self.ids, norm_cap=self.norm_cap, declared_bounds=self.declared_bounds,
            label=self.label, generator=self.generator, depth=self.depth)
        if "points" in changes and "vectors" not in changes:
            args["vectors"] = None
        args.update(changes)
        return ContinuousFrameModel(**args)

    def frozen(self):
        """The piecewise-constant model ``psi_t = phi_{t_n}`` on the same cells."""
        return self.replace(evaluator=None, generator=None)

    def to_dict(self):
        out = {
            "dimension": int(self.dimension),
            "label": self.label,
            "cells": [],
        }
        for i in range(len(self)):
            w = float(self.weights[i])
            cell = {
                "id": self.ids[i],
                "weight": "inf" if np.isinf(w) else w,
                "point": [float(x) for x in self.points[i]],
                "divisible": bool(self.divisible[i]),
            }
            if self.extents is not None:
                cell["extent"] = [[float(a), float(b)] for a, b in self.extents[i]]
            out["cells"].append(cell)
        if self.generator is not None:
            out["generator"] = self.generator
        else:
            out["vectors"] = [[[float(z.real), float(z.imag)] for z in v] for v in self.vectors]
        if self.norm_cap is not None:
            out["norm_cap"] = self.norm_cap
        if self.declared_bounds is not None:
            out["declared_bounds"] = list(self.declared_bounds)
        return out

    @classmethod
    def from_dict(cls, data):
        cells = data["cells"]
        if not cells:
            raise InvalidInputError("a model needs at least one cell")
        weights = [float("inf") if c["weight"] == "inf" else float(c["weight"]) for c in cells]
        points = [c["point"] for c in cells]
        divisible = [bool(c.get("divisible", False)) for c in cells]
        extents = None
        if all("extent" in c for c in cells):
            extents = [c["extent"] for c in cells]
        ids = [c.get("id", str(i)) for i, c in enumerate(cells)]
        kwargs = dict(
            extents=extents, ids=ids, norm_cap=data.get("norm_cap"),
            declared_bounds=data.get("declared_bounds"), label=data.get("label", ""))
        if "generator" in data:
            from .exemplars import evaluator_from_generator

            gen = data["generator"]
            return cls(weights, points, divisible, evaluator=evaluator_from_generator(gen),
                       generator=gen, **kwargs)
        if "vectors" not in data:
            raise InvalidInputError("model needs a 'vectors' table or a 'generator'")
        vecs = [[complex(re, im) for re, im in v] for v in data["vectors"]]
        V = np.array(vecs, dtype=np.complex128)
        if V.ndim != 2 or V.shape[1] != int(data["dimension"]):
            raise ShapeError("vector table does not match the declared dimension")
        return cls(weights, points, divisible, vectors=V, **kwargs)

    def __repr__(self):
        kind = "piecewise-constant" if self.piecewise_constant else "evaluated"
        return f"ContinuousFrameModel(cells={len(self)}, d={self.dimension}, {kind}, label={self.label!r})"


@dataclass
class CellSubset:
    """A measurable subset given by the measure it takes from each cell."""

    sub_weights: np.ndarray

    @classmethod
    def full(cls, CF):
        return cls(np.array(CF.weights, dtype=np.float64))

    @classmethod
    def empty(cls, CF):
        return cls(np.zeros(len(CF)))

    @classmethod
    def from_indices(cls, CF, indices):
        s = np.zeros(len(CF))
        idx = np.asarray(indices, dtype=np.intp)
        s[idx] = CF.weights[idx]
        return cls(s)

    def to_list(self):
        return ["inf" if np.isinf(x) else float(x) for x in self.sub_weights]


def _check_subset(CF, E):
    s = np.asarray(E.sub_weights if isinstance(E, CellSubset) else E, dtype=np.float64)
    if s.shape != (len(CF),):
        raise ShapeError(f"{s.size} sub-weights for {len(CF)} cells")
    w = CF.weights
    if np.any(np.isnan(s)) or np.any(s < 0):
        raise InvalidWeightError("sub-weights must be non-negative")
    finite = np.isfinite(w)
    over = finite & (s > w * (1 + WEIGHT_RTOL) + 1e-300)
    if np.any(over):
        i = int(np.flatnonzero(over)[0])
        raise InvalidWeightError(f"cell {CF.ids[i]}: sub-weight {s[i]} exceeds weight {w[i]}")
    frac = finite & (s > 0) & (s < w * (1 - WEIGHT_RTOL)) & ~CF.divisible
    if np.any(frac):
        i = int(np.flatnonzero(frac)[0])
        raise AtomicityError(f"fractional selection on atomic cell {CF.ids[i]}")
    return np.minimum(s, np.where(finite, w, np.inf))


_quadratic_sum = quadratic_sum


def equivalent_discrete(CF, label=None):
    """The discrete system ``{sqrt(mu_n) phi_{t_n}}`` as weights on vectors.

    Zero-vector cells of infinite weight are dropped.
    """
    keep = np.isfinite(CF.weights)
    if not np.any(keep):
        raise InvalidInputError("no cell of finite weight")
    return FrameSystem(CF.vectors[keep], CF.weights[keep], CF.label if label is None else label)


def cell_frame_operator(CF):
    """Frame operator of the cell quadrature, ``sum_n mu_n phi_{t_n} phi_{t_n}^*``."""
    return frame_operator(equivalent_discrete(CF))


def partial_frame_operator(CF, E):
    """``S_{phi,E}`` for a selection of sub-weights (cell quadrature)."""
    s = _check_subset(CF, E)
    coeff = np.where(CF.active_mask(), s, 0.0)
    return _quadratic_sum(CF.vectors, coeff)


def weighted_frame_operator(CF, tau):
    """``S_{sqrt(tau) phi, X}`` for ``tau`` constant on each cell."""
    t = _check_tau(CF, tau)
    coeff = np.where(CF.active_mask(), t * np.where(np.isfinite(CF.weights), CF.weights, 0.0), 0.0)
    return _quadratic_sum(CF.vectors, coeff)


def _check_tau(CF, tau):
    t = np.asarray(tau, dtype=np.float64)
    if t.shape == ():
        t = np.full(len(CF), float(t))
    if t.shape != (len(CF),):
        raise ShapeError(f"{t.size} weights for {len(CF)} cells")
    if not np.all(np.isfinite(t)) or np.any(t < 0) or np.any(t > 1):
        raise InvalidWeightError("tau must lie in [0, 1]")
    return t


def select_subset_matching_weights(CF, tau):
    """The subset taking measure ``tau_n mu_n`` from cell ``n``.

    On a piecewise-constant model its partial frame operator equals the
    weighted operator ``S_{sqrt(tau) psi, X}`` term by term.
    """
    t = _check_tau(CF, tau)
    frac = (t > 0) & (t < 1) & ~CF.divisible & CF.active_mask()
    if np.any(frac):
        i = int(np.flatnonzero(frac)[0])
        raise AtomicityError(f"fractional weight {t[i]} on atomic cell {CF.ids[i]}")
    w = CF.weights
    s = np.where(np.isfinite(w), t * np.where(np.isfinite(w), w, 0.0), np.where(t > 0, np.inf, 0.0))
    # atoms are either taken whole or not at all
    s = np.where(~CF.divisible & (t >= 1), w, s)
    return CellSubset(s)


# oscillation oracles: oracle(evaluate, points, extents) -> per-cell bound on
# sup over the cell of ||phi_t - phi_{t_n}||


class ZeroOracle:
    """For models already constant on every cell."""

    def __call__(self, evaluate, points, extents):
        return np.zeros(points.shape[0])


class LipschitzOracle:
    """``L * (distance from the sample point to the farthest box corner)``."""

    def __init__(self, lipschitz):
        self.lipschitz = float(lipschitz)

    def __call__(self, evaluate, points, extents):
        if extents is None:
            return np.zeros(points.shape[0])
        reach = np.maximum(points - extents[..., 0], extents[..., 1] - points)
        return self.lipschitz * np.sqrt(np.sum(reach ** 2, axis=1))

    def to_dict(self):
        return {"kind": "lipschitz", "lipschitz": self.lipschitz}


class GridSupOracle:
    """Largest deviation from the sample value over the ``q``-per-axis
    midpoint grid used by ``quadrature_nodes``.

    Sound for measurements taken on that same grid; a heuristic otherwise.
    """

    def __init__(self, q=4):
        self.q = int(q)

    def __call__(self, evaluate, points, extents):
        if extents is None:
            return np.zeros(points.shape[0])
        owner, nodes, _ = _nodes(points, extents, np.ones(points.shape[0]), self.q)
        diff = evaluate(nodes) - evaluate(points)[owner]
        dev = np.sqrt(np.sum(np.abs(diff) ** 2, axis=1))
        out = np.zeros(points.shape[0])
        np.maximum.at(out, owner, dev)
        return out

    def to_dict(self):
        return {"kind": "grid", "q": self.q}


def oracle_from_dict(data):
    kind = data.get("kind")
    if kind == "lipschitz":
        return LipschitzOracle(data["lipschitz"])
    if kind == "grid":
        return GridSupOracle(data.get("q", 4))
    if kind == "zero":
        return ZeroOracle()
    raise InvalidInputError(f"unknown oscillation oracle {kind!r}")


def _nodes(points, extents, weights, q):
    """Midpoints of a ``q``-per-axis sub-box grid in every cell.

    Degenerate axes collapse onto the sample coordinate.  Returns
    ``(owner cell, node points, node weights)``.
    """
    n, k = points.shape
    if extents is None:
        return np.arange(n), points.copy(), np.array(weights, dtype=np.float64)
    frac = (np.arange(q) + 0.5) / q
    grids = np.stack(np.meshgrid(*([frac] * k), indexing="ij"), axis=-1).reshape(-1, k)
    lo = extents[..., 0]
    width = extents[..., 1] - lo
    nodes = lo[:, None, :] + grids[None, :, :] * width[:, None, :]
    flat = width == 0
    nodes = np.where(flat[:, None, :], points[:, None, :], nodes)
    owner = np.repeat(np.arange(n), grids.shape[0])
    nw = np.repeat(np.asarray(weights, dtype=np.float64) / grids.shape[0], grids.shape[0])
    return owner, nodes.reshape(-1, k), nw


def quadrature_nodes(CF, q=4):
    """Sub-box quadrature of the cell measure: ``(owner, points, weights)``."""
    return _nodes(CF.points, CF.extents, CF.weights, q)


def _shell_index(norms):
    # Y_0 = {||phi|| < 1}, Y_n = {2^{n-1} <= ||phi|| < 2^n}
    _, e = np.frexp(norms)
    return np.where(norms < 1.0, 0, e).astype(np.int64)


def _weight_groups(shell, weights):
    """Greedy weight index ``m >= 1``: each ``(shell, m)`` group has mass <= 1."""
    m = np.ones(shell.size, dtype=np.int64)
    for n in np.unique(shell):
        idx = np.flatnonzero(shell == n)
        w = weights[idx]
        if w.sum() <= 1 + WEIGHT_RTOL:
            continue
        g, acc = 1, 0.0
        for j, wi in zip(idx, w):
            if acc > 0 and acc + wi > 1 + WEIGHT_RTOL:
                g, acc = g + 1, 0.0
            m[j] = g
            acc += wi
    return m


def _split(points, extents, weights, divisible, depth, ids, which):
    """Bisect every non-degenerate axis of the listed cells.

    Children keep the parent's relative sample position and replace the
    parent in place, so cell order is preserved.  Returns the new arrays
    and the parent index of every output cell.
    """
    n, k = points.shape
    split = np.zeros(n, dtype=bool)
    split[which] = True
    lo, hi = extents[..., 0], extents[..., 1]
    width = hi - lo
    live = (width > 0) & split[:, None]
    rel = np.where(width > 0, (points - lo) / np.where(width > 0, width, 1.0), 0.0)
    bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
    # child c of cell i exists iff its set bits all sit on live axes of i
    valid = np.all((bits[None, :, :] == 0) | live[:, None, :], axis=2)
    mid = lo + width / 2
    upper = bits[None, :, :].astype(bool) & live[:, None, :]
    lower = (~bits[None, :, :].astype(bool)) & live[:, None, :]
    clo = np.where(upper, mid[:, None, :], lo[:, None, :])
    chi = np.where(lower, mid[:, None, :], hi[:, None, :])
    cp = np.where(live[:, None, :], clo + rel[:, None, :] * (chi - clo), points[:, None, :])
    nchild = valid.sum(axis=1)
    sel = valid.ravel()
    parent = np.repeat(np.arange(n), 1 << k)[sel]
    child = np.tile(np.arange(1 << k), n)[sel]
    P = cp.reshape(-1, k)[sel]
    E = np.stack([clo, chi], axis=-1).reshape(-1, k, 2)[sel]
    W = (weights / nchild)[parent]
    D = divisible[parent]
    DEP = depth[parent] + split[parent]
    IDS = [f"{ids[p]}.{c}" if split[p] else ids[p] for p, c in zip(parent.tolist(), child.tolist())]
    return P, E, W, D, DEP, IDS, parent


@dataclass
class CountableApproximation:
    """Piecewise-constant approximation together with its certificate.

    ``origin[j]`` is the index of the input cell that refined cell ``j``
    came from; ``scale`` the internal normalisation ``c`` (vectors times
    ``c``, measure over ``c^2``) used to place cells in shells.  ``rule``
    names the stopping rule that was met (see ``approximate_by_countable``)
    and ``certified_sum`` is ``sum_c mu_c osc_c (2 ||psi_c|| + osc_c)``,
    itself a bound on the operator distance for every ``tau``.
    """

    model: ContinuousFrameModel
    error_bound: float
    epsilon: float
    origin: np.ndarray
    scale: float
    splits: int
    max_depth: int
    targets: np.ndarray = field(repr=False)
    oscillations: np.ndarray = field(repr=False)
    rule: str = "lemma"
    certified_sum: float = 0.0

    def summary(self):
        return {
            "epsilon": self.epsilon,
            "error_bound": self.error_bound,
            "rule": self.rule,
            "certified_sum": self.certified_sum,
            "cells_in": int(self.origin.max() + 1) if self.origin.size else 0,
            "cells_out": len(self.model),
            "splits": self.splits,
            "max_depth": self.max_depth,
            "scale": self.scale,
        }


APPROXIMATION_RULES = ("auto", "lemma", "budget")


def approximate_by_countable(CF, epsilon, oracle=None, max_depth=30, max_cells=1 << 18,
                             normalize=True, rule="auto"):
    """Refine ``CF`` into a piecewise-constant model within ``6 * epsilon``.

    With ``rule="lemma"`` cells are refined until a cell whose sample value
    lies in norm shell ``n`` and weight group ``m`` oscillates by at most
    ``epsilon / (4^n 2^(m+1))``.  With ``rule="budget"`` the cells with the
    largest terms ``mu_c osc_c (2 ||psi_c|| + osc_c)`` are split until the
    terms sum to at most ``6 * epsilon``; since
    ``||phi phi^* - psi psi^*|| <= ||phi - psi|| (||phi|| + ||psi||)`` the sum
    bounds the operator distance directly.  ``"auto"`` tries the shell rule
    and falls back to the budget rule when it runs past ``max_cells`` or
    ``max_depth``.  Either way, for every ``tau: X -> [0, 1]``,
    ``||S_{sqrt(tau) phi} - S_{sqrt(tau) psi}|| <= 6 * epsilon`` where ``psi``
    is the returned model.  Requires ``0 < epsilon <= 1``.
    """
    epsilon = float(epsilon)
    if not (0 < epsilon <= 1):
        raise InvalidInputError("epsilon must lie in (0, 1]")
    if rule not in APPROXIMATION_RULES:
        raise InvalidInputError(f"rule must be one of {APPROXIMATION_RULES}")
    if oracle is None:
        oracle = ZeroOracle()
    if CF.piecewise_constant:
        n = len(CF)
        return CountableApproximation(CF, 6 * epsilon, epsilon, np.arange(n), 1.0, 0,
                                      int(CF.depth.max()), np.full(n, np.inf), np.zeros(n),
                                      rule="lemma" if rule == "auto" else rule)
    if rule == "budget":
        return _refine(CF, epsilon, oracle, max_depth, max_cells, normalize, "budget")
    try:
        return _refine(CF, epsilon, oracle, max_depth, max_cells, normalize, "lemma")
    except RefinementLimitError:
        if rule == "lemma":
            raise
    return _refine(CF, epsilon, oracle, max_depth, max_cells, normalize, "budget")


def _budget_selection(terms, allowance):
    """Largest terms whose removal would cover twice the excess over ``allowance``."""
    total = float(terms.sum())
    order = np.argsort(-terms, kind="stable")
    cum = np.cumsum(terms[order])
    k = int(np.searchsorted(cum, min(total, 2 * (total - allowance)))) + 1
    return np.sort(order[:k])


def _refine(CF, epsilon, oracle, max_depth, max_cells, normalize, rule):
    evaluate = CF.evaluate
    P = np.array(CF.points)
    E = None if CF.extents is None else np.array(CF.extents)
    W = np.array(CF.weights)
    D = np.array(CF.divisible)
    DEP = np.array(CF.depth)
    IDS = list(CF.ids)
    origin = np.arange(len(CF))
    V = np.array(CF.vectors)

    finite_div = np.isfinite(W) & D
    c2 = max(1.0, float(W[finite_div].sum())) if normalize else 1.0
    c = np.sqrt(c2)
    allowance = 6 * epsilon
    splits = 0
    while True:
        norms = np.sqrt(np.sum(np.abs(V) ** 2, axis=1))
        active = np.isfinite(W) & (W > 0) & (norms > 0)
        osc = np.zeros(len(W))
        idx = np.flatnonzero(active)
        if idx.size:
            osc[idx] = oracle(evaluate, P[idx], None if E is None else E[idx])
        atoms_bad = active & ~D & (osc > 1e-14 * (1 + norms))
        if np.any(atoms_bad):
            i = int(np.flatnonzero(atoms_bad)[0])
            raise IrreducibleCellError(
                f"atomic cell {IDS[i]} varies by {osc[i]:.3e}; atoms must be constant")
        terms = np.where(active & D, np.where(active, W, 0.0) * osc * (2 * norms + osc), 0.0)
        if rule == "lemma":
            shell = _shell_index(c * norms)
            sw = np.where(active & D, W / c2, 0.0)
            m = _weight_groups(np.where(D, shell, -1), sw)
            target = epsilon / (4.0 ** shell * 2.0 ** (m + 1)) / c
            need = active & D & ((osc > target) | (sw > 1 + WEIGHT_RTOL))
            which = np.flatnonzero(need)
        else:
            target = terms
            which = (_budget_selection(terms, allowance) if terms.sum() > allowance
                     else np.zeros(0, dtype=np.intp))
        if which.size == 0:
            break
        if E is None:
            raise IrreducibleCellError(
                f"cell {IDS[which[0]]} needs refinement but has no extent")
        flat = ~np.any(E[which, :, 1] > E[which, :, 0], axis=1)
        if np.any(flat):
            i = int(which[np.flatnonzero(flat)[0]])
            raise IrreducibleCellError(f"cell {IDS[i]} cannot be split (zero extent)")
        if np.any(DEP[which] >= max_depth):
            raise RefinementLimitError(f"refinement exceeded depth {max_depth}")
        P, E, W, D, DEP, IDS, par = _split(P, E, W, D, DEP, IDS, which)
        if len(W) > max_cells:
            raise RefinementLimitError(f"refinement exceeded {max_cells} cells")
        origin = origin[par]
        V = np.asarray(evaluate(P), dtype=np.complex128)
        splits += which.size

    model = ContinuousFrameModel(
        W, P, D, vectors=V, extents=E, ids=IDS, norm_cap=CF.norm_cap,
        declared_bounds=CF.declared_bounds, label=CF.label, depth=DEP)
    return CountableApproximation(model, 6 * epsilon, epsilon, origin, float(c), splits,
                                  int(DEP.max()), target, osc, rule, float(terms.sum()))


def _node_vectors(CF, owner, nodes):
    if CF.piecewise_constant:
        return CF.vectors[owner]
    return CF.evaluate(nodes)


def fine_weighted_operator(CF, tau_nodes, q=4):
    """``S_{sqrt(tau) phi}`` by sub-box quadrature, ``tau`` given per node."""
    owner, nodes, nw = quadrature_nodes(CF, q)
    fin = np.isfinite(nw)
    coeff = np.where(fin, np.asarray(tau_nodes, dtype=np.float64) * np.where(fin, nw, 0.0), 0.0)
    return _quadratic_sum(_node_vectors(CF, owner, nodes), coeff)


def approximation_deviation(CF, approx, tau_nodes, q=4):
    """Measured ``||S_{sqrt(tau) phi} - S_{sqrt(tau) psi}||`` on the quadrature
    grid of the refined cells, with ``tau`` given per quadrature node."""
    M = approx.model
    owner, nodes, nw = quadrature_nodes(M, q)
    t = np.asarray(tau_nodes, dtype=np.float64)
    if t.shape != nw.shape:
        raise ShapeError(f"{t.size} node weights for {nw.size} nodes")
    fin = np.isfinite(nw)
    coeff = np.where(fin, t * np.where(fin, nw, 0.0), 0.0)
    Vphi = _node_vectors(CF, owner, nodes)
    Vpsi = M.vectors[owner]
    D = _quadratic_sum(Vphi, coeff) - _quadratic_sum(Vpsi, coeff)
    return operator_norm(D)
