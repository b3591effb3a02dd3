"""JSON documents: canonical encoding, digests, envelopes and schema checks.

Floats are written with ``repr``, the shortest string that parses back to
the same double, so every document round-trips exactly.
"""

import hashlib
import json
import sys
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .errors import InvalidInputError

FORMAT_VERSION = 1
DIGEST_FIELDS = ("kind", "version", "inputs", "params", "result", "seed")


class MalformedDocumentError(InvalidInputError):
    """A document that is not JSON or does not match its schema."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


def plain(obj):
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if x != x or x in (float("inf"), float("-inf")):
            return repr(x)
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent=None):
    """Canonical JSON: sorted keys, no NaN, stable separators."""
    seps = (",", ":") if indent is None else (",", ": ")
    return json.dumps(plain(obj), sort_keys=True, separators=seps, indent=indent,
                      allow_nan=False, ensure_ascii=True)


def digest(doc):
    payload = {k: doc.get(k) for k in DIGEST_FIELDS}
    return hashlib.sha256(dumps(payload).encode("ascii")).hexdigest()


def envelope(kind, inputs, params, result, seed):
    from . import __version__

    doc = plain({"kind": kind, "version": __version__, "inputs": inputs, "params": params,
                 "result": result, "seed": seed})
    doc["digest"] = digest(doc)
    return doc


def read_text(path):
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise MalformedDocumentError(f"cannot read {path}: {exc.strerror}") from None


def loads(text, source="<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(
            f"{source} is not valid JSON", [f"line {exc.lineno} column {exc.colno}: {exc.msg}"]
        ) from None


def load(path):
    return loads(read_text(path), "stdin" if path in (None, "-") else path)


def write(doc, path=None, indent=None):
    text = dumps(doc, indent=indent) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


@lru_cache(maxsize=None)
def schema(name):
    text = resources.files("framedisc").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name):
    """Raise ``MalformedDocumentError`` listing every schema violation."""
    validator = jsonschema.Draft202012Validator(schema(name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        diags = [f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors[:20]]
        raise MalformedDocumentError(f"document does not match the {name} schema", diags)
    return doc


def document_kind(doc):
    """``frame_system``, ``continuous_model`` or ``envelope``."""
    if not isinstance(doc, dict):
        raise MalformedDocumentError("top-level JSON value must be an object")
    if "kind" in doc and "digest" in doc:
        return "envelope"
    if "cells" in doc:
        return "continuous_model"
    if "vectors" in doc:
        return "frame_system"
    raise MalformedDocumentError(
        "cannot tell the document type", ["expected 'vectors', 'cells' or an envelope"])


def flatten(obj, prefix=""):
    """``(key, value)`` rows of every scalar leaf, for CSV summaries."""
    rows = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows.extend(flatten(obj[k], f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            rows.extend(flatten(v, f"{prefix}[{i}]"))
    else:
        rows.append((prefix, obj))
    return rows


def write_csv(doc, path):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "value"])
        for k, v in flatten(plain(doc)):
            w.writerow([k, "" if v is None else (repr(v) if isinstance(v, float) else v)])
