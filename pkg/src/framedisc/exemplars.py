"""Example frame families with checkable tightness, plus a density count.

* ``finite_fourier_frame``: characters of ``Z_M`` restricted to a support,
  as a continuous frame over ``[0, M)`` with measure ``dt / M``.
* ``finite_gabor_frame``: all time-frequency shifts of a window on ``Z_d``.
* ``gabor_modulation_frame``: the same with a continuous modulation
  parameter.
* ``quadrature_wavelet_frame``: the affine family on a frequency grid with
  measure ``da db / a^2``.
"""

from dataclasses import dataclass

import numpy as np

from .continuous_frame import ContinuousFrameModel, GridSupOracle, LipschitzOracle
from .errors import AdmissibilityError, InvalidInputError
from .frame_model import FrameSystem


def _support(M, support):
    S = np.unique(np.asarray(list(support), dtype=np.int64) % M)
    if S.size == 0:
        raise InvalidInputError("support must be non-empty")
    return S


def fourier_evaluator(M, support):
    S = _support(M, support).astype(np.float64)

    def evaluate(P):
        return np.exp(2j * np.pi * P[:, :1] * S[None, :] / M)

    return evaluate


def finite_fourier_frame(M, support=None):
    """Characters ``x -> exp(2 pi i t x / M)`` on ``S``, ``t`` in ``[0, M)``.

    Cells are the unit intervals ``[t, t+1)`` with weight ``1/M`` and left
    endpoint samples; the model is Parseval, and stays so under dyadic
    refinement of the cells.  ``||phi_t||^2 = |S|``.
    """
    M = int(M)
    if M < 1:
        raise InvalidInputError("group size must be >= 1")
    S = _support(M, range(M) if support is None else support)
    t = np.arange(M, dtype=np.float64)
    return ContinuousFrameModel(
        np.full(M, 1.0 / M), t, True,
        evaluator=fourier_evaluator(M, S),
        extents=np.stack([t, t + 1], axis=1)[:, None, :],
        norm_cap=float(S.size), declared_bounds=(1.0, 1.0),
        label=f"fourier M={M} S={S.tolist()}",
        generator={"name": "fourier", "params": {"M": M, "support": S.tolist()}})


def fourier_oracle(M, support):
    S = _support(M, support).astype(np.float64)
    return LipschitzOracle(2 * np.pi / M * np.sqrt(np.sum(S ** 2)))


def _window(g):
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 1 or g.size == 0:
        raise InvalidInputError("window must be a non-empty vector")
    if not np.any(g != 0):
        raise InvalidInputError("window must be nonzero")
    return g


def finite_gabor_frame(g):
    """``{M_l T_k g : k, l in Z_d}``, tight with constant ``d ||g||^2``."""
    g = _window(g)
    d = g.size
    n = np.arange(d)
    shifts = np.stack([np.roll(g, k) for k in range(d)])
    chars = np.exp(2j * np.pi * np.outer(n, n) / d)
    vecs = (chars[None, :, :] * shifts[:, None, :]).reshape(d * d, d)
    return FrameSystem(vecs, label=f"gabor d={d}")


def gabor_evaluator(g):
    g = _window(g)
    d = g.size
    n = np.arange(d)

    def evaluate(P):
        k = np.rint(P[:, 0]).astype(np.int64)
        w = P[:, 1:2]
        return np.exp(2j * np.pi * w * n[None, :] / d) * g[(n[None, :] - k[:, None]) % d]

    return evaluate


def gabor_modulation_frame(g):
    """Translations on ``Z_d`` times continuous modulations ``w in [0, d)``.

    The window is rescaled to ``||g||^2 = d`` and cell ``(k, [l, l+1))``
    gets weight ``1/d^2``, so the total measure is 1 and the model is
    Parseval.
    """
    g = _window(g)
    d = g.size
    g = g * np.sqrt(d) / np.linalg.norm(g)
    k, l = np.meshgrid(np.arange(d, dtype=float), np.arange(d, dtype=float), indexing="ij")
    k, l = k.ravel(), l.ravel()
    P = np.stack([k, l], axis=1)
    ext = np.stack([np.stack([k, k], axis=1), np.stack([l, l + 1], axis=1)], axis=1)
    return ContinuousFrameModel(
        np.full(d * d, 1.0 / d ** 2), P, True,
        evaluator=gabor_evaluator(g), extents=ext,
        norm_cap=float(d) * (1 + 1e-12), declared_bounds=(1.0, 1.0),
        label=f"gabor-modulation d={d}",
        generator={"name": "gabor_modulation",
                   "params": {"window": [[float(z.real), float(z.imag)] for z in g]}})


def gabor_oracle(g):
    g = _window(g)
    d = g.size
    g = g * np.sqrt(d) / np.linalg.norm(g)
    n = np.arange(d)
    moment = max(np.sum(n ** 2 * np.abs(np.roll(g, k)) ** 2) for k in range(d))
    return LipschitzOracle(2 * np.pi / d * np.sqrt(moment))


HAAR_ADMISSIBILITY = 2 * np.log(2)


def haar_samples(n_samples=64):
    """Midpoint samples of the Haar wavelet on ``[0, 1)``, normalised so that
    the admissibility integral equals 1."""
    x = (np.arange(n_samples) + 0.5) / n_samples
    psi = np.where(x < 0.5, 1.0, -1.0) / np.sqrt(HAAR_ADMISSIBILITY)
    return x, psi.astype(np.complex128)


class _Transform:
    """Riemann-sum Fourier transform of sampled ``psi`` with a cache per scale."""

    def __init__(self, x, psi):
        self.x = np.asarray(x, dtype=np.float64)
        self.psi = np.asarray(psi, dtype=np.complex128)
        self.dx = float(self.x[1] - self.x[0]) if self.x.size > 1 else 1.0
        self._cache = {}

    def __call__(self, w):
        w = np.asarray(w, dtype=np.float64)
        return np.exp(-2j * np.pi * np.multiply.outer(w, self.x)) @ self.psi * self.dx

    def at_scales(self, a, xi):
        """``psi_hat(a_j xi_k)`` for unique scales, cached."""
        ua, inv = np.unique(a, return_inverse=True)
        missing = [s for s in ua.tolist() if s not in self._cache]
        if missing:
            vals = self(np.outer(missing, xi))
            for s, row in zip(missing, vals):
                self._cache[s] = row
            if len(self._cache) > 1 << 16:
                self._cache.clear()
        table = np.array([self._cache[s] if s in self._cache else self(s * xi) for s in ua.tolist()])
        return table[inv]


def admissibility(transform, lo=1e-5, hi=None, n=20000):
    """``int |psi_hat(w)|^2 / |w| dw`` by the trapezoid rule in ``log |w|``.

    The sampled transform is periodic, so the range stops at the Nyquist
    frequency by default.
    """
    if hi is None:
        hi = 0.5 / transform.dx
    s = np.linspace(np.log(lo), np.log(hi), n)
    w = np.exp(s)
    vals = np.abs(transform(w)) ** 2 + np.abs(transform(-w)) ** 2
    return float(np.sum((vals[1:] + vals[:-1]) / 2 * np.diff(s)))


def wavelet_evaluator(x, psi, K, dxi):
    T = _Transform(x, psi)
    k = np.concatenate([-np.arange(K, 0, -1), np.arange(1, K + 1)]).astype(np.float64)
    xi = k * dxi

    def evaluate(P):
        a, b = P[:, 0], P[:, 1]
        hat = T.at_scales(a, xi)
        return (np.sqrt(np.abs(a))[:, None] * hat * np.exp(-2j * np.pi * np.outer(b, xi))
                * np.sqrt(dxi))

    evaluate.transform = T
    evaluate.xi = xi
    return evaluate


def quadrature_wavelet_frame(x=None, psi=None, K=4, dxi=0.25, scale_edges=None,
                             n_scales=24, n_shifts=None, admissibility_tol=0.1):
    """Affine family ``phi_{a,b}(xi) = sqrt|a| psi_hat(a xi) e^{-2 pi i b xi}``
    on the frequency bins ``xi = k * dxi``, ``0 < |k| <= K`` (so ``d = 2K``).

    Scale cells are ``[e_j, e_{j+1}]`` and their mirror images, shift cells
    split one period ``[0, 1/dxi)`` into ``n_shifts > 2K`` pieces.  Cell
    weights are the exact ``da db / a^2`` masses.  The frame is tight in the
    continuum limit; the grid bounds are reported, not assumed.
    """
    if x is None and psi is None:
        x, psi = haar_samples()
    if x is None or psi is None:
        raise InvalidInputError("give both sample positions and values, or neither")
    x = np.asarray(x, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.complex128)
    if scale_edges is None:
        scale_edges = np.geomspace(0.05, 40.0, int(n_scales) + 1)
    edges = np.asarray(scale_edges, dtype=np.float64)
    if n_shifts is None:
        n_shifts = 2 * K + 1
    K, n_shifts = int(K), int(n_shifts)
    if edges.size < 2 or n_shifts < 1 or K < 1:
        raise InvalidInputError("empty scale or shift grid")
    if np.any(edges <= 0) or np.any(np.diff(edges) <= 0):
        raise InvalidInputError("scale edges must be positive and increasing")
    if n_shifts <= 2 * K:
        raise InvalidInputError(f"need more than {2 * K} shifts for {2 * K} frequency bins")
    ev = wavelet_evaluator(x, psi, K, dxi)
    adm = admissibility(ev.transform)
    if abs(adm - 1) > admissibility_tol:
        raise AdmissibilityError(f"admissibility integral {adm:.4f} is not within "
                                 f"{admissibility_tol} of 1")
    period = 1.0 / dxi
    db = period / n_shifts
    lo, hi = edges[:-1], edges[1:]
    mass_a = 1.0 / lo - 1.0 / hi
    mid = np.sqrt(lo * hi)
    rows_p, rows_e, rows_w = [], [], []
    for sign in (1.0, -1.0):
        for j in range(lo.size):
            alo, ahi = sorted((sign * lo[j], sign * hi[j]))
            for s in range(n_shifts):
                rows_p.append((sign * mid[j], s * db))
                rows_e.append(((alo, ahi), (s * db, (s + 1) * db)))
                rows_w.append(mass_a[j] * db)
    P = np.array(rows_p)
    amax = np.geomspace(edges[0], edges[-1], 4096)
    norms = np.abs(amax) * np.sum(np.abs(ev.transform.at_scales(amax, ev.xi)) ** 2, axis=1) * dxi
    cap = float(norms.max()) * 1.01
    params = {"K": K, "dxi": float(dxi), "x": x.tolist(),
              "psi": [[float(z.real), float(z.imag)] for z in psi]}
    model = ContinuousFrameModel(
        rows_w, P, True, evaluator=ev, extents=np.array(rows_e), norm_cap=cap,
        label=f"wavelet K={K} scales={lo.size} shifts={n_shifts}",
        generator={"name": "wavelet", "params": params})
    return model


def wavelet_oracle(q=4):
    return GridSupOracle(q)


def evaluator_from_generator(gen):
    name, p = gen.get("name"), gen.get("params", {})
    if name == "fourier":
        return fourier_evaluator(int(p["M"]), p["support"])
    if name == "gabor_modulation":
        return gabor_evaluator([complex(re, im) for re, im in p["window"]])
    if name == "wavelet":
        psi = [complex(re, im) for re, im in p["psi"]]
        return wavelet_evaluator(p["x"], psi, int(p["K"]), float(p["dxi"]))
    raise InvalidInputError(f"unknown generator {name!r}")


def oracle_for(model):
    """Default oscillation oracle for an exemplar model."""
    gen = model.generator or {}
    name, p = gen.get("name"), gen.get("params", {})
    if name == "fourier":
        return fourier_oracle(int(p["M"]), p["support"])
    if name == "gabor_modulation":
        return gabor_oracle([complex(re, im) for re, im in p["window"]])
    return GridSupOracle(4)


@dataclass(frozen=True)
class DensityReport:
    max_density: float
    window: float
    densest_start: float
    bound: float
    satisfied: bool

    def to_dict(self):
        return dict(self.__dict__)


def beurling_density_check(points, support_measure, C, window):
    """Largest ``#(Lambda ∩ [s, s + window]) / window`` over windows starting
    at points of ``Lambda`` (counted with multiplicity), against ``4 C |S|``."""
    window = float(window)
    if not window > 0:
        raise InvalidInputError("window length must be positive")
    lam = np.sort(np.asarray(points, dtype=np.float64).ravel())
    bound = 4.0 * float(C) * float(support_measure)
    if lam.size == 0:
        return DensityReport(0.0, window, float("nan"), bound, True)
    counts = np.searchsorted(lam, lam + window, side="right") - np.arange(lam.size)
    j = int(np.argmax(counts))
    dens = float(counts[j]) / window
    return DensityReport(dens, window, float(lam[j]), bound, dens <= bound)
