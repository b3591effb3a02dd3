"""Frame partitions: Weaver-type searches, bisection and uniform partitions.

The existence of a good partition is not constructive, so partitions are
found by search (exhaustive enumeration or i.i.d. random labels) and every
result carries a certificate that can be rechecked from the raw frame.
"""

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._backend import kernels
from .errors import (
    DomainError,
    HypothesisError,
    InvalidInputError,
    NotBesselError,
    SearchBudgetError,
    SearchFailure,
)
from .frame_model import FrameSystem, canonical_parseval, frame_bounds, frame_operator
from .operator_core import extreme_eigenvalues, operator_norm

BUDGET_ENV = "FRAMEDISC_SEARCH_BUDGET"
DEFAULT_BUDGET = 1 << 20
DEFAULT_TRIALS = 100_000
BESSEL_TOL = 1e-9
CERT_TOL = 1e-9
_CHUNK = 1 << 15
_TIE_RTOL = 1e-12
_TIE_ATOL = 1e-15


def search_budget():
    """Largest number of assignments an exhaustive search may enumerate."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw == "":
        return DEFAULT_BUDGET
    try:
        value = int(float(raw))
    except ValueError:
        raise InvalidInputError(f"{BUDGET_ENV}={raw!r} is not a number") from None
    if value < 1:
        raise InvalidInputError(f"{BUDGET_ENV} must be positive")
    return value


@dataclass(frozen=True)
class PartitionSpec:
    r: int
    proportions: tuple

    def __post_init__(self):
        r = int(self.r)
        t = tuple(float(x) for x in self.proportions)
        if r < 1:
            raise InvalidInputError("arity must be >= 1")
        if len(t) != r:
            raise InvalidInputError(f"{len(t)} proportions for {r} blocks")
        if any(not (x > 0) for x in t):
            raise InvalidInputError("proportions must be positive")
        if abs(sum(t) - 1) > 1e-12:
            raise InvalidInputError(f"proportions sum to {sum(t)!r}, not 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "proportions", t)

    @classmethod
    def uniform(cls, r):
        return cls(r, (1.0 / r,) * r)


def weaver_target(r, delta, t):
    """``t (1 + sqrt(r delta))^2``."""
    return t * (1 + math.sqrt(r * delta)) ** 2


def two_value_target(delta, t):
    """Tighter two-block target ``t (1 + 2 sqrt(e (1 - e)))`` with ``e = 2 delta``.

    Only meaningful for ``r = 2`` and ``2 delta < 1/2``; otherwise the
    plain target is returned.
    """
    e = 2 * delta
    if e >= 0.5:
        return weaver_target(2, delta, t)
    return t * (1 + 2 * math.sqrt(e) * math.sqrt(1 - e))


def block_targets(spec, delta, tighter=False):
    if tighter and spec.r == 2:
        return np.array([two_value_target(delta, t) for t in spec.proportions])
    return np.array([weaver_target(spec.r, delta, t) for t in spec.proportions])


def block_operators(F, assignment, r):
    """Stack of ``sum_{i in block k} a_i phi_i phi_i^*``."""
    a = np.asarray(assignment, dtype=np.int64)
    P = F.outer_products()
    out = np.zeros((r, F.dimension, F.dimension), dtype=np.complex128)
    np.add.at(out, a, P)
    return (out + np.conj(np.swapaxes(out, 1, 2))) / 2


def block_bounds(F, assignment, r):
    """Per-block ``(lambda_min, lambda_max)`` recomputed from scratch."""
    lo, hi = np.zeros(r), np.zeros(r)
    for k, Sk in enumerate(block_operators(F, assignment, r)):
        lo[k], hi[k] = extreme_eigenvalues(Sk)
    return lo, hi


@dataclass
class PartitionCertificate:
    assignment: list
    r: int
    proportions: list
    delta: float
    targets: list
    per_block_lower: list
    per_block_upper: list
    satisfied: bool
    vacuous_target: bool
    objective: float
    target_rule: str
    search: dict = field(default_factory=dict)

    def blocks(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        return [np.flatnonzero(a == k) for k in range(self.r)]

    def to_dict(self):
        return {
            "assignment": [int(x) for x in self.assignment],
            "r": int(self.r),
            "proportions": [float(x) for x in self.proportions],
            "delta": float(self.delta),
            "targets": [float(x) for x in self.targets],
            "per_block_lower": [float(x) for x in self.per_block_lower],
            "per_block_upper": [float(x) for x in self.per_block_upper],
            "satisfied": bool(self.satisfied),
            "vacuous_target": bool(self.vacuous_target),
            "objective": float(self.objective),
            "target_rule": self.target_rule,
            "search": dict(self.search),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in (
            "assignment", "r", "proportions", "delta", "targets", "per_block_lower",
            "per_block_upper", "satisfied", "vacuous_target", "objective", "target_rule")},
            search=dict(d.get("search", {})))


def _certificate(F, spec, assignment, tighter, search, bessel):
    delta = F.delta
    targets = block_targets(spec, delta, tighter)
    lo, hi = block_bounds(F, assignment, spec.r)
    return PartitionCertificate(
        assignment=[int(x) for x in assignment],
        r=spec.r,
        proportions=list(spec.proportions),
        delta=delta,
        targets=targets.tolist(),
        per_block_lower=lo.tolist(),
        per_block_upper=hi.tolist(),
        satisfied=bool(np.all(hi <= targets + CERT_TOL)),
        vacuous_target=bool(targets.min() >= bessel),
        objective=float(np.max(hi / targets)),
        target_rule="two-value" if (tighter and spec.r == 2) else "weaver",
        search=search,
    )


def verify_partition_certificate(F, cert, tol=1e-10):
    """Recompute a certificate's derived fields; return a list of mismatches."""
    problems = []
    a = np.asarray(cert.assignment, dtype=np.int64)
    if a.shape != (len(F),):
        return [f"assignment has {a.size} entries for {len(F)} vectors"]
    if np.any(a < 0) or np.any(a >= cert.r):
        return ["assignment label out of range"]
    try:
        spec = PartitionSpec(cert.r, tuple(cert.proportions))
    except InvalidInputError as exc:
        return [str(exc)]
    tighter = cert.target_rule == "two-value"
    ref = _certificate(F, spec, a, tighter, cert.search, operator_norm(frame_operator(F)))
    for name in ("delta", "targets", "per_block_lower", "per_block_upper", "objective"):
        got = np.asarray(getattr(cert, name), dtype=float)
        want = np.asarray(getattr(ref, name), dtype=float)
        if got.shape != want.shape or not np.allclose(got, want, rtol=tol, atol=tol):
            problems.append(f"{name}: recorded {got.tolist()} recomputed {want.tolist()}")
    for name in ("satisfied", "vacuous_target"):
        if bool(getattr(cert, name)) != bool(getattr(ref, name)):
            problems.append(f"{name}: recorded {getattr(cert, name)} recomputed {getattr(ref, name)}")
    return problems


def _scan_exhaustive(P, zeros, r, m, targets, total):
    best_val, best_idx = math.inf, -1
    for start in range(0, total, _CHUNK):
        count = min(_CHUNK, total - start)
        ext = kernels.exhaustive_block_extreme_eigs(P, zeros, r, start, count)
        obj = np.max(ext[:, :, 1] / targets, axis=1)
        cmin = float(obj.min())
        if cmin < best_val * (1 - _TIE_RTOL) - _TIE_ATOL:
            best_val = cmin
            first = int(np.argmax(obj <= cmin * (1 + _TIE_RTOL) + _TIE_ATOL))
            best_idx = start + first
    return best_idx, best_val


def _scan_random(P, zeros, spec, m, targets, seed, trials, batch, stop_on_success):
    rng = np.random.default_rng(seed)
    cum = np.cumsum(spec.proportions)
    batch = max(1, min(batch, (1 << 22) // max(1, m)))
    best_val, best_assign, run = math.inf, None, 0
    while run < trials:
        b = min(batch, trials - run)
        labels = np.searchsorted(cum, rng.random((b, m)), side="right")
        labels = np.minimum(labels, spec.r - 1).astype(np.int32)
        ext = kernels.block_extreme_eigs(P, zeros, labels)
        obj = np.max(ext[:, :, 1] / targets, axis=1)
        j = int(np.argmin(obj))
        run += b
        if obj[j] < best_val:
            best_val, best_assign = float(obj[j]), labels[j].copy()
        if stop_on_success and best_val <= 1.0:
            break
    return best_assign, best_val, run


def search_weaver_partition(F, spec, mode="auto", seed=0, trials=DEFAULT_TRIALS,
                            tighter=False, batch=2048, stop_on_success=True, budget=None):
    """Partition ``F`` into ``spec.r`` blocks meeting ``t_k (1 + sqrt(r delta))^2``.

    ``F`` must be Bessel with bound ``<= 1``.  Every assignment is scored by
    ``max_k ||block_k|| / target_k``.

    * ``exhaustive`` enumerates all ``r^m`` assignments in lexicographic
      order and returns the first one whose score is minimal (to a relative
      ``1e-12``).
    * ``randomized`` draws i.i.d. labels with probabilities ``t_k`` and keeps
      the best; it stops at the first success unless told otherwise.
    * ``auto`` is exhaustive within the search budget, randomized beyond.
    """
    if mode not in ("auto", "exhaustive", "randomized"):
        raise InvalidInputError(f"unknown search mode {mode!r}")
    S = frame_operator(F)
    bessel = operator_norm(S)
    if bessel > 1 + BESSEL_TOL:
        raise NotBesselError(f"Bessel bound {bessel:.12g} exceeds 1")
    m, r = len(F), spec.r
    targets = block_targets(spec, F.delta, tighter)
    budget = search_budget() if budget is None else int(budget)
    total = r ** m
    if mode == "auto":
        mode = "exhaustive" if total <= budget else "randomized"
    P = F.outer_products()
    zeros = np.zeros((r, F.dimension, F.dimension), dtype=np.complex128)
    if r == 1:
        assign = np.zeros(m, dtype=np.int64)
        search = {"mode": "exhaustive", "evaluated": 1}
    elif mode == "exhaustive":
        if total > budget:
            raise SearchBudgetError(f"{r}^{m} = {total} assignments exceed the budget {budget}")
        idx, _ = _scan_exhaustive(P, zeros, r, m, targets, total)
        assign = kernels.decode_assignments(idx, 1, m, r)[0]
        search = {"mode": "exhaustive", "evaluated": int(total), "rank": int(idx)}
    else:
        assign, _, run = _scan_random(P, zeros, spec, m, targets, seed, int(trials), batch,
                                      stop_on_success)
        search = {"mode": "randomized", "seed": int(seed), "trials": int(trials),
                  "trials_run": int(run), "stop_on_success": bool(stop_on_success)}
    search["backend"] = kernels.BACKEND
    return _certificate(F, spec, assign, tighter, search, bessel)


@dataclass(frozen=True)
class TwoSidedReport:
    deviations: list
    bound: float
    satisfied: bool

    def to_dict(self):
        return {"deviations": list(self.deviations), "bound": self.bound,
                "satisfied": self.satisfied}


def two_sided_certificate(F, cert, parseval_tol=1e-8):
    """``||sum_{I_k} phi_i phi_i^* - t_k I||`` per block against ``2 sqrt(r delta) + r delta``."""
    rep = frame_bounds(F)
    if not (abs(rep.lower - 1) <= parseval_tol and abs(rep.upper - 1) <= parseval_tol):
        raise HypothesisError(f"frame is not Parseval (bounds {rep.lower:.12g}, {rep.upper:.12g})")
    I = np.eye(F.dimension)
    devs = [operator_norm(Sk - t * I)
            for Sk, t in zip(block_operators(F, cert.assignment, cert.r), cert.proportions)]
    rd = cert.r * F.delta
    bound = 2 * math.sqrt(rd) + rd
    return TwoSidedReport(devs, bound, bool(max(devs) <= bound + CERT_TOL))


@dataclass
class BisectionResult:
    indices: tuple
    certificate: PartitionCertificate
    A: float
    B: float
    delta: float
    lower_target: float
    upper_target: float
    block_bounds: list
    satisfied: bool

    def systems(self, F):
        return tuple(F.subset(i) if i.size else None for i in self.indices)

    def to_dict(self):
        return {
            "indices": [i.tolist() for i in self.indices],
            "A": self.A, "B": self.B, "delta": self.delta,
            "lower_target": self.lower_target, "upper_target": self.upper_target,
            "block_bounds": [list(b) for b in self.block_bounds],
            "satisfied": self.satisfied,
            "certificate": self.certificate.to_dict(),
        }


def bisection_targets(A, B, delta):
    """``((1 - 5 sqrt(delta/A)) A / 2, (1 + 5 sqrt(delta/A)) B / 2)``."""
    c = 5 * math.sqrt(delta / A)
    return (1 - c) * A / 2, (1 + c) * B / 2


def bisect_frame(F, mode="auto", seed=0, trials=DEFAULT_TRIALS, tol=CERT_TOL, budget=None):
    """Split a frame with ``A > delta`` into two frames within the bisection bounds.

    Route: canonical Parseval frame, then a two-block search with equal
    proportions, then the blocks of the original vectors are measured.
    """
    rep = frame_bounds(F)
    A, B, delta = rep.lower, rep.upper, F.delta
    if not A > delta:
        raise HypothesisError(f"lower bound {A:.6g} does not exceed delta {delta:.6g}")
    G = canonical_parseval(F)
    cert = search_weaver_partition(G, PartitionSpec.uniform(2), mode=mode, seed=seed,
                                   trials=trials, budget=budget)
    lo_t, hi_t = bisection_targets(A, B, delta)
    lo, hi = block_bounds(F, cert.assignment, 2)
    bounds = [(float(lo[k]), float(hi[k])) for k in range(2)]
    ok = bool(np.all(lo >= lo_t - tol * max(1, A)) and np.all(hi <= hi_t + tol * max(1, B)))
    idx = tuple(cert.blocks())
    return BisectionResult(idx, cert, A, B, delta, lo_t, hi_t, bounds, ok and cert.satisfied)


@lru_cache(maxsize=None)
def universal_constant(tol=1e-16):
    """``prod_{j>=0} (1 + 2^{-1-j/2}) / (1 - 2^{-1-j/2})``, summed in logs."""
    total, j = 0.0, 0
    while True:
        x = 2.0 ** (-1 - j / 2)
        term = math.log1p(x) - math.log1p(-x)
        total += term
        if term < tol:
            break
        j += 1
    return math.exp(total)


@dataclass
class SouSchedule:
    """Stopping schedule for recursive bisection at ``delta = 1/K``.

    ``A_seq``/``B_seq`` follow the two recursions through index ``L + 1``.
    ``C_estimate = prod_{j<=L} (1 + C_j)/(1 - C_j)`` with
    ``C_j = 5 sqrt(delta / A_j)`` bounds ``B_{L+1} / A_{L+1}`` and also the
    ratio reached when each level's upper factor uses ``A_j``.
    """

    delta: float
    A_seq: list
    B_seq: list
    L: int
    C_estimate: float
    C_universal: float

    @property
    def blocks(self):
        return 2 ** (self.L + 1)

    def invariants(self):
        d, A, B, L = self.delta, self.A_seq, self.B_seq, self.L
        rec_a = all(abs(A[j + 1] - A[j] * (1 - 5 * math.sqrt(d / A[j])) / 2) <= 1e-12 * A[j]
                    for j in range(L + 1))
        rec_b = all(abs(B[j + 1] - B[j] * (1 + 5 * math.sqrt(d / B[j])) / 2) <= 1e-12 * B[j]
                    for j in range(L + 1))
        return {
            "start": A[0] == 1.0 and B[0] == 1.0,
            "recursion_A": rec_a,
            "recursion_B": rec_b,
            "A_above_100delta": all(A[j] >= 100 * d for j in range(L + 1)),
            "A_final_window": 25 * d <= A[L + 1] < 100 * d,
            "B_final_estimate": B[L + 1] <= self.C_estimate * A[L + 1] * (1 + 1e-12),
            "B_final_universal": B[L + 1] < self.C_universal * A[L + 1],
            "estimate_below_universal": self.C_estimate < self.C_universal,
        }

    def to_dict(self):
        return {"delta": self.delta, "A_seq": list(self.A_seq), "B_seq": list(self.B_seq),
                "L": self.L, "C_estimate": self.C_estimate, "C_universal": self.C_universal,
                "blocks": self.blocks}


def compute_sou_schedule(delta):
    delta = float(delta)
    if not (0 < delta < 0.01):
        raise DomainError(f"delta = {delta!r} must lie in (0, 1/100)")
    A, B = [1.0], [1.0]
    while A[-1] >= 100 * delta:
        a, b = A[-1], B[-1]
        A.append(a * (1 - 5 * math.sqrt(delta / a)) / 2)
        B.append(b * (1 + 5 * math.sqrt(delta / b)) / 2)
    L = len(A) - 2
    log_c = sum(math.log1p(5 * math.sqrt(delta / a)) - math.log1p(-5 * math.sqrt(delta / a))
                for a in A[:L + 1])
    return SouSchedule(delta, A, B, L, math.exp(log_c), universal_constant())


def partition_constants():
    """``(A_0, B_0) = (1, 100 C)`` with ``C`` the universal product."""
    return 1.0, 100.0 * universal_constant()


@dataclass
class UniformPartition:
    blocks: list
    block_bounds: list
    K: float
    schedule: SouSchedule = None
    levels: list = field(default_factory=list)
    window: tuple = (1.0, 100.0)
    schedule_window: tuple = None
    satisfied: bool = True

    def systems(self, F):
        return [F.subset(b) for b in self.blocks]

    def to_dict(self):
        return {
            "blocks": [b.tolist() for b in self.blocks],
            "block_bounds": [list(b) for b in self.block_bounds],
            "K": self.K,
            "schedule": None if self.schedule is None else self.schedule.to_dict(),
            "levels": [[b.to_dict() for b in lvl] for lvl in self.levels],
            "window": list(self.window),
            "schedule_window": None if self.schedule_window is None else list(self.schedule_window),
            "satisfied": self.satisfied,
        }


def _child_seed(seed, *path):
    return int(np.random.SeedSequence([int(seed), *path]).generate_state(1)[0])


def _measured(F, idx):
    if idx.size == 0:
        return (0.0, 0.0)
    rep = frame_bounds(F.subset(idx))
    return (rep.lower, rep.upper)


def partition_to_uniform(F, epsilon=1e-8, mode="auto", seed=0, trials=DEFAULT_TRIALS,
                         tol=CERT_TOL, budget=None):
    """Partition a tight frame of unit-ball vectors into frames with bounds in
    ``[1, 100 C]``.

    ``epsilon`` is the relative tolerance for tightness.  With ``K`` the
    frame constant and ``delta = 1/K``: if ``100 delta >= 1`` the frame is
    returned whole; otherwise ``L + 1`` rounds of bisection follow the
    stopping schedule, giving ``2^(L+1)`` blocks.
    """
    rep = frame_bounds(F)
    A, B = rep.lower, rep.upper
    if A <= 0 or (B - A) > epsilon * B:
        raise HypothesisError(f"frame is not tight (bounds {A:.12g}, {B:.12g})")
    if F.delta > 1 + 1e-12:
        raise HypothesisError(f"vector norm^2 {F.delta:.12g} exceeds 1")
    K = A
    if K < 1 - tol:
        raise HypothesisError(f"frame constant {K:.12g} is below 1")
    delta = 1.0 / K
    A0, B0 = partition_constants()
    everything = np.arange(len(F))
    if 100 * delta >= 1:
        bounds = [(A, B)]
        ok = A >= 1 - tol and B <= 100 + tol
        return UniformPartition([everything], bounds, K, window=(A0, B0), satisfied=bool(ok))
    sched = compute_sou_schedule(delta)
    current = [everything]
    levels = []
    for level in range(sched.L + 1):
        nxt, results = [], []
        for b, idx in enumerate(current):
            res = bisect_frame(F.subset(idx), mode=mode, seed=_child_seed(seed, level, b),
                               trials=trials, tol=tol, budget=budget)
            results.append(res)
            if not res.satisfied:
                levels.append(results)
                raise SearchFailure(
                    f"bisection failed at level {level}, block {b}",
                    certificate=res.certificate,
                    partial={"level": level, "blocks": [c.tolist() for c in current],
                             "completed": [[r.to_dict() for r in lvl] for lvl in levels]})
            nxt.extend(idx[i] for i in res.indices)
        levels.append(results)
        current = nxt
    bounds = [_measured(F, idx) for idx in current]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    ok = bool(np.all(lo >= A0 - tol) and np.all(hi <= B0 + tol))
    sw = (sched.A_seq[-1] / delta, sched.C_estimate * sched.A_seq[-1] / delta)
    return UniformPartition(current, bounds, K, sched, levels, (A0, B0), sw, ok)


@dataclass
class GeneralPartition:
    blocks: list
    block_bounds: list
    A: float
    B: float
    N: float
    window: tuple
    uniform: UniformPartition
    satisfied: bool

    def systems(self, F):
        return [F.subset(b) for b in self.blocks]

    def to_dict(self):
        return {
            "blocks": [b.tolist() for b in self.blocks],
            "block_bounds": [list(b) for b in self.block_bounds],
            "A": self.A, "B": self.B, "N": self.N,
            "window": list(self.window),
            "satisfied": self.satisfied,
            "uniform": self.uniform.to_dict(),
        }


def partition_general(F, N, mode="auto", seed=0, trials=DEFAULT_TRIALS, tol=CERT_TOL,
                      budget=None):
    """Partition a frame with bounds ``A <= B`` and ``||phi_i||^2 <= N <= A`` into
    frames with bounds in ``[A_0 N, B_0 N B / A]``."""
    N = float(N)
    if not N > 0:
        raise InvalidInputError("norm cap must be positive")
    rep = frame_bounds(F)
    A, B = rep.lower, rep.upper
    if not A > 0:
        raise HypothesisError("not a frame (zero lower bound)")
    if F.delta > N * (1 + 1e-12):
        raise HypothesisError(f"vector norm^2 {F.delta:.12g} exceeds the cap {N:.12g}")
    if N > A * (1 + tol):
        raise HypothesisError(f"norm cap {N:.12g} exceeds the lower frame bound {A:.12g}")
    T = canonical_parseval(F).scaled(math.sqrt(A / N))
    # the rescaled system is tight with constant A/N; clip rounding above 1
    if T.delta > 1:
        T = T.scaled(1 / math.sqrt(T.delta))
    uni = partition_to_uniform(T, epsilon=1e-8, mode=mode, seed=seed, trials=trials, tol=tol,
                               budget=budget)
    bounds = [_measured(F, idx) for idx in uni.blocks]
    A0, B0 = partition_constants()
    window = (A0 * N, B0 * N * B / A)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    scale = max(1.0, window[1])
    ok = bool(np.all(lo >= window[0] - tol * scale) and np.all(hi <= window[1] + tol * scale))
    return GeneralPartition(uni.blocks, bounds, A, B, N, window, uni, ok and uni.satisfied)
