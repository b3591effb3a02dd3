"""Command-line front end.

Every computing subcommand reads a frame-system or cell-model document and
writes an envelope ``{kind, version, inputs, params, result, seed, digest}``.
``verify`` recomputes an envelope from its recorded inputs.

Exit codes: 0 success with a satisfied result, 1 unsatisfied result or
verification mismatch, 2 malformed input, 3 violated hypothesis, 4 search
or refinement budget exhausted.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import io
from .continuous_frame import ContinuousFrameModel, equivalent_discrete
from .errors import (
    DiscretizationTooCoarseError,
    FrameError,
    HypothesisError,
    RefinementLimitError,
    SearchBudgetError,
    SearchFailure,
)
from .frame_model import FrameSystem, frame_bounds, frame_operator
from .operator_core import eigenvalues

EXIT_OK, EXIT_UNSATISFIED, EXIT_MALFORMED, EXIT_HYPOTHESIS, EXIT_BUDGET = 0, 1, 2, 3, 4
VERIFY_TOL = 1e-10
# fields that may legitimately differ between machines
_UNCOMPARED = {"backend"}


# ---------------------------------------------------------------- documents

def _parse_input(doc):
    kind = io.document_kind(doc)
    if kind == "envelope":
        raise io.MalformedDocumentError(
            "expected a frame system or a cell model, got a certificate envelope",
            ["pass the envelope to 'verify', or its inputs.document to other subcommands"])
    io.validate(doc, kind)
    if kind == "frame_system":
        return kind, FrameSystem.from_dict(doc)
    return kind, ContinuousFrameModel.from_dict(doc)


def _as_discrete(kind, obj):
    return obj if kind == "frame_system" else equivalent_discrete(obj)


def _as_model(kind, obj):
    if kind == "continuous_model":
        return obj
    F = obj
    return ContinuousFrameModel(F.effective_weights, np.arange(len(F), dtype=float), False,
                                vectors=F.vectors, label=F.label)


def _default_oracle(model):
    from .exemplars import oracle_for

    return None if model.piecewise_constant else oracle_for(model)


def _budget(value):
    from .partition_engine import search_budget

    return search_budget() if value is None else int(value)


# ------------------------------------------------------------ computations
# Each takes (input kind, parsed input, params, seed) and returns a result
# dict with a boolean "satisfied"; verify calls them again.

def compute_analyze(kind, obj, params, seed):
    F = _as_discrete(kind, obj)
    rep = frame_bounds(F)
    out = rep.to_dict()
    out["eigenvalues"] = eigenvalues(frame_operator(F)).tolist()
    out["count"] = len(F)
    out["dimension"] = F.dimension
    if kind == "continuous_model":
        out["declared_bounds"] = obj.declared_bounds
        out["norm_cap"] = obj.norm_cap
        out["max_squared_norm"] = float(np.max(obj.squared_norms()))
    out["satisfied"] = bool(rep.lower > 0)
    return out


def compute_partition(kind, obj, params, seed):
    from .partition_engine import (
        PartitionSpec,
        partition_to_uniform,
        search_weaver_partition,
        two_sided_certificate,
    )

    F = _as_discrete(kind, obj)
    if params["scheme"] == "uniform":
        res = partition_to_uniform(F, epsilon=params["epsilon"], mode=params["mode"], seed=seed,
                                   trials=params["trials"], budget=params["budget"])
        return res.to_dict()
    r = params["r"]
    t = params["proportions"]
    spec = PartitionSpec.uniform(r) if t is None else PartitionSpec(r, tuple(t))
    cert = search_weaver_partition(F, spec, mode=params["mode"], seed=seed,
                                   trials=params["trials"], tighter=params["tighter"],
                                   budget=params["budget"])
    out = cert.to_dict()
    rep = frame_bounds(F)
    if abs(rep.lower - 1) <= 1e-8 and abs(rep.upper - 1) <= 1e-8:
        out["two_sided"] = two_sided_certificate(F, cert).to_dict()
    return out


def _weights_for(params, n):
    w = params["weights"]
    if isinstance(w, (int, float)):
        return np.full(n, float(w))
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise io.MalformedDocumentError(f"{w.size} weights for {n} vectors or cells")
    return w


def compute_lyapunov(kind, obj, params, seed):
    from .lyapunov import continuous_lyapunov, subset_for_scalar, subset_for_weights

    eps = params["epsilon"]
    if kind == "continuous_model":
        tau = _weights_for(params, len(obj))
        cert = continuous_lyapunov(obj, tau, eps, oracle=_default_oracle(obj), q=params["q"],
                                   max_cells=params["max_cells"])
        return cert.to_dict()
    F = obj
    search = dict(mode=params["mode"], seed=seed, trials=params["trials"],
                  budget=params["budget"])
    if isinstance(params["weights"], (int, float)):
        cert = subset_for_scalar(F, eps, float(params["weights"]), C=params["C"], **search)
    else:
        cert = subset_for_weights(F, _weights_for(params, len(F)), eps, C=params["C"],
                                  C0=params["C0"], **search)
    return cert.to_dict()


def compute_sample(kind, obj, params, seed):
    from .sampler import sample_scalable_general

    F = _as_discrete(kind, obj)
    a = np.sqrt(F.effective_weights)
    V = FrameSystem(F.vectors, label=F.label)
    N = params["N"]
    if N is None:
        N = float(np.max(V.squared_norms()))
    res = sample_scalable_general(V, a, N, params["epsilon"], mode=params["mode"], seed=seed,
                                  trials=params["trials"], max_replicated=params["max_replicated"])
    return res.to_dict()


def compute_discretize(kind, obj, params, seed):
    from .sampler import discretize_continuous

    model = _as_model(kind, obj)
    res = discretize_continuous(model, params["epsilon"], N=params["N"],
                                oracle=_default_oracle(model), mode=params["mode"], seed=seed,
                                trials=params["trials"], max_cells=params["max_cells"],
                                max_replicated=params["max_replicated"])
    return res.to_dict()


COMPUTE = {
    "analyze": compute_analyze,
    "partition": compute_partition,
    "lyapunov": compute_lyapunov,
    "sample": compute_sample,
    "discretize": compute_discretize,
}


# ------------------------------------------------------------------ verify

def compare(recorded, recomputed, tol=VERIFY_TOL, path="result"):
    """List of differences between two JSON values; numbers to ``tol``."""
    problems = []
    if isinstance(recorded, dict) and isinstance(recomputed, dict):
        for k in sorted(set(recorded) | set(recomputed)):
            if k in _UNCOMPARED:
                continue
            if k not in recorded or k not in recomputed:
                problems.append(f"{path}.{k}: present in only one of recorded/recomputed")
                continue
            problems.extend(compare(recorded[k], recomputed[k], tol, f"{path}.{k}"))
        return problems
    if isinstance(recorded, list) and isinstance(recomputed, list):
        if len(recorded) != len(recomputed):
            return [f"{path}: length {len(recorded)} recorded, {len(recomputed)} recomputed"]
        for i, (a, b) in enumerate(zip(recorded, recomputed)):
            problems.extend(compare(a, b, tol, f"{path}[{i}]"))
        return problems
    num = (int, float)
    if (isinstance(recorded, num) and isinstance(recomputed, num)
            and not isinstance(recorded, bool) and not isinstance(recomputed, bool)):
        if not math.isclose(recorded, recomputed, rel_tol=tol, abs_tol=tol):
            problems.append(f"{path}: recorded {recorded!r}, recomputed {recomputed!r}")
        return problems
    if recorded != recomputed or type(recorded) is not type(recomputed):
        problems.append(f"{path}: recorded {recorded!r}, recomputed {recomputed!r}")
    return problems


def verify_envelope(doc, tol=VERIFY_TOL):
    """Check digest, recompute the result from the recorded inputs, and for
    partition certificates recheck the recorded assignment directly."""
    io.validate(doc, "envelope")
    problems = []
    want = io.digest(doc)
    if doc["digest"] != want:
        problems.append(f"digest: recorded {doc['digest']}, recomputed {want}")
    kind, obj = _parse_input(doc["inputs"]["document"])
    if doc["inputs"].get("type", kind) != kind:
        problems.append(f"inputs.type: recorded {doc['inputs']['type']!r}, document is {kind!r}")
    fn = COMPUTE[doc["kind"]]
    result = io.plain(fn(kind, obj, doc["params"], doc["seed"]))
    problems.extend(compare(doc["result"], result, tol))
    if doc["kind"] == "partition" and doc["params"].get("scheme") == "weaver":
        from .partition_engine import PartitionCertificate, verify_partition_certificate

        try:
            cert = PartitionCertificate.from_dict(doc["result"])
            problems.extend(f"certificate: {p}" for p in
                            verify_partition_certificate(_as_discrete(kind, obj), cert, tol))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"certificate: unreadable ({exc})")
    return problems


# -------------------------------------------------------------------- demo

def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _complexes(text):
    return [complex(x.strip().replace(" ", "")) for x in text.split(",") if x.strip()]


def build_demo(args):
    from . import exemplars as ex

    if args.family == "fourier":
        support = None if args.support is None else _ints(args.support)
        model = ex.finite_fourier_frame(args.M, support)
        return equivalent_discrete(model).to_dict() if args.discrete else model.to_dict()
    if args.family == "gabor":
        if args.window is not None:
            g = np.array(_complexes(args.window))
        else:
            rng = np.random.default_rng(args.seed)
            g = rng.standard_normal(args.d) + 1j * rng.standard_normal(args.d)
        if args.discrete:
            return ex.finite_gabor_frame(g).to_dict()
        return ex.gabor_modulation_frame(g).to_dict()
    model = ex.quadrature_wavelet_frame(K=args.K, dxi=args.dxi, n_scales=args.n_scales,
                                        n_shifts=args.n_shifts)
    return equivalent_discrete(model).to_dict() if args.discrete else model.to_dict()


# ------------------------------------------------------------------ parser

def _proportions(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _weights_arg(text):
    """``uniform:t`` or a path to a JSON list."""
    if text.startswith("uniform:"):
        try:
            return float(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad constant weight {text!r}") from None
    return text


def _common(p, seed=True, search=True):
    p.add_argument("input", nargs="?", default="-", help="input JSON file, '-' for stdin")
    p.add_argument("-o", "--output", default="-", help="output file (default stdout)")
    p.add_argument("--csv", default=None, help="also write a field,value CSV summary")
    p.add_argument("--indent", type=int, default=None, help="pretty-print the JSON")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if search:
        p.add_argument("--mode", choices=["auto", "exhaustive", "randomized"], default="auto")
        p.add_argument("--trials", type=int, default=100_000)
        p.add_argument("--budget", type=int, default=None,
                       help="exhaustive-search budget (default: FRAMEDISC_SEARCH_BUDGET or 2^20)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="framedisc",
        description="Frame bounds, partitions, subset selection and discretization of frames.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="frame bounds of a frame system or cell model")
    _common(p, seed=False, search=False)

    p = sub.add_parser("partition", help="Weaver-type or uniform partition with certificate")
    _common(p)
    p.add_argument("--scheme", choices=["weaver", "uniform"], default="weaver")
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--proportions", type=_proportions, default=None,
                   help="comma-separated t_k (default uniform)")
    p.add_argument("--tighter", action="store_true", help="two-value target for r = 2")
    p.add_argument("--epsilon", type=float, default=1e-8,
                   help="tightness tolerance for --scheme uniform")

    p = sub.add_parser("lyapunov", help="subset whose operator approximates a weighted one")
    _common(p)
    p.add_argument("--weights", type=_weights_arg, required=True,
                   help="uniform:t or a JSON file holding one weight per vector/cell")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--C0", type=float, default=None)
    p.add_argument("--q", type=int, default=4, help="quadrature nodes per axis")
    p.add_argument("--max-cells", type=int, default=1 << 18)

    for name, text in (("sample", "sampling function of a scalable frame"),
                       ("discretize", "sample a continuous frame into a discrete one")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--N", type=float, default=None, help="norm cap (default from the input)")
        p.add_argument("--max-replicated", type=int, default=1 << 17)
        if name == "discretize":
            p.add_argument("--max-cells", type=int, default=1 << 18)

    p = sub.add_parser("demo", help="emit an exemplar model")
    p.add_argument("family", choices=["fourier", "gabor", "wavelet"])
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--indent", type=int, default=None)
    p.add_argument("--discrete", action="store_true",
                   help="emit the finite frame system instead of the cell model")
    p.add_argument("--M", type=int, default=8)
    p.add_argument("--support", default=None, help="comma-separated frequencies")
    p.add_argument("--window", default=None, help="comma-separated complex window, e.g. 1,0.5+1j")
    p.add_argument("--d", type=int, default=4, help="random window length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--dxi", type=float, default=0.25)
    p.add_argument("--n-scales", type=int, default=24)
    p.add_argument("--n-shifts", type=int, default=None)

    p = sub.add_parser("verify", help="recompute a certificate envelope from its inputs")
    p.add_argument("input", nargs="?", default="-")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--indent", type=int, default=None)
    p.add_argument("--tol", type=float, default=VERIFY_TOL)
    return parser


def params_from_args(args):
    from .lyapunov import DEFAULT_C, DEFAULT_C0

    cmd = args.command
    if cmd == "analyze":
        return {}
    out = {"mode": args.mode, "trials": args.trials}
    if cmd == "partition":
        out.update(scheme=args.scheme, r=args.r, proportions=args.proportions,
                   tighter=args.tighter, epsilon=args.epsilon, budget=_budget(args.budget))
    elif cmd == "lyapunov":
        w = args.weights
        if isinstance(w, str):
            w = io.load(w)
            if not isinstance(w, list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in w):
                raise io.MalformedDocumentError("weights file must hold a JSON list of numbers")
        out.update(weights=w, epsilon=args.epsilon,
                   C=DEFAULT_C if args.C is None else args.C,
                   C0=DEFAULT_C0 if args.C0 is None else args.C0,
                   q=args.q, max_cells=args.max_cells, budget=_budget(args.budget))
    else:
        out.update(epsilon=args.epsilon, N=args.N, max_replicated=args.max_replicated)
        if cmd == "discretize":
            out["max_cells"] = args.max_cells
    return out


# -------------------------------------------------------------------- main

def _report(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **io.plain(extra)}, sort_keys=True),
          file=sys.stderr)


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "demo":
            io.write(build_demo(args), args.output, args.indent)
            return EXIT_OK
        if args.command == "verify":
            doc = io.load(args.input)
            problems = verify_envelope(doc, args.tol)
            io.write({"kind": doc.get("kind"), "ok": not problems, "problems": problems},
                     args.output, args.indent)
            return EXIT_OK if not problems else EXIT_UNSATISFIED
        doc = io.load(args.input)
        kind, obj = _parse_input(doc)
        params = params_from_args(args)
        seed = getattr(args, "seed", None)
        result = COMPUTE[args.command](kind, obj, params, seed)
        env = io.envelope(args.command, {"type": kind, "document": doc}, params, result, seed)
        io.write(env, args.output, args.indent)
        if args.csv:
            io.write_csv({"result": env["result"], "seed": seed, "digest": env["digest"]},
                         args.csv)
        return EXIT_OK if env["result"]["satisfied"] else EXIT_UNSATISFIED
    except io.MalformedDocumentError as exc:
        _report("malformed", str(exc), diagnostics=exc.diagnostics)
        return EXIT_MALFORMED
    except HypothesisError as exc:
        _report("hypothesis", str(exc), precondition=type(exc).__name__)
        return EXIT_HYPOTHESIS
    except (SearchBudgetError, RefinementLimitError) as exc:
        _report("budget", str(exc), limit=type(exc).__name__)
        return EXIT_BUDGET
    except SearchFailure as exc:
        cert = None if exc.certificate is None else exc.certificate.to_dict()
        _report("search_failed", str(exc), certificate=cert)
        return EXIT_UNSATISFIED
    except DiscretizationTooCoarseError as exc:
        _report("too_coarse", str(exc), suggested_epsilon=exc.suggested_epsilon)
        return EXIT_UNSATISFIED
    except (FrameError, KeyError, TypeError) as exc:
        _report("malformed", f"{type(exc).__name__}: {exc}")
        return EXIT_MALFORMED


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
