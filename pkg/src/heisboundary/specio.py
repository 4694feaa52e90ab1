"""JSON spec files and reports.

Spec format::

    {"n": 1, "label": "optional", "derivation": {"matrix": [[1, 0, 0], [0, 2, 0], [0, 0, 3]]}}
    {"n": 1, "derivation": {"spectral": [{"eigenvalue": 1, "eigenvectors": [[1, 0, 0], [0, 1, 0]]},
                                         {"eigenvalue": 2, "eigenvectors": [[0, 0, 1]]}]}}
"""
from __future__ import annotations

import json
import numbers

import numpy as np

from .derivation import DerivationSpec
from .errors import DimensionError, SchemaError, SpecSyntaxError


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise SchemaError(field, f"expected a number, got {type(value).__name__}")
    if not np.isfinite(value):
        raise SchemaError(field, "must be finite")
    return float(value)


def _vector(value, field, length):
    if not isinstance(value, list):
        raise SchemaError(field, "expected a list of numbers")
    if len(value) != length:
        raise DimensionError(f"{field}: expected length {length}, got {len(value)}")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def spec_from_dict(data) -> DerivationSpec:
    if not isinstance(data, dict):
        raise SchemaError("<root>", "expected a JSON object")
    if "n" not in data:
        raise SchemaError("n", "missing required field")
    n = data["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError("n", "must be a positive integer")
    label = data.get("label")
    if label is not None and not isinstance(label, str):
        raise SchemaError("label", "must be a string")
    if "derivation" not in data:
        raise SchemaError("derivation", "missing required field")
    der = data["derivation"]
    if not isinstance(der, dict):
        raise SchemaError("derivation", "expected an object with 'matrix' or 'spectral'")
    forms = [k for k in ("matrix", "spectral") if k in der]
    if len(forms) != 1:
        raise SchemaError("derivation", "expected exactly one of 'matrix' or 'spectral'")
    unknown = set(der) - {"matrix", "spectral"}
    if unknown:
        raise SchemaError(f"derivation.{sorted(unknown)[0]}", "unknown field")
    dim = 2 * n + 1
    if forms[0] == "matrix":
        rows = der["matrix"]
        if not isinstance(rows, list):
            raise SchemaError("derivation.matrix", "expected a list of rows")
        if len(rows) != dim:
            raise DimensionError(f"derivation.matrix: expected {dim} rows for n={n}, got {len(rows)}")
        matrix = [_vector(r, f"derivation.matrix[{i}]", dim) for i, r in enumerate(rows)]
        return DerivationSpec(n, matrix=np.array(matrix), label=label)
    entries = der["spectral"]
    if not isinstance(entries, list) or not entries:
        raise SchemaError("derivation.spectral", "expected a nonempty list")
    blocks = []
    for i, entry in enumerate(entries):
        where = f"derivation.spectral[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(where, "expected an object")
        for key in ("eigenvalue", "eigenvectors"):
            if key not in entry:
                raise SchemaError(f"{where}.{key}", "missing required field")
        value = _number(entry["eigenvalue"], f"{where}.eigenvalue")
        vecs = entry["eigenvectors"]
        if not isinstance(vecs, list) or not vecs:
            raise SchemaError(f"{where}.eigenvectors", "expected a nonempty list of vectors")
        blocks.append((value, [_vector(v, f"{where}.eigenvectors[{j}]", dim) for j, v in enumerate(vecs)]))
    return DerivationSpec(n, spectral=tuple(blocks), label=label)


def parse_spec(text: str) -> DerivationSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return spec_from_dict(data)


def spec_to_dict(spec: DerivationSpec) -> dict:
    out = {"n": spec.n}
    if spec.label is not None:
        out["label"] = spec.label
    if spec.matrix is not None:
        out["derivation"] = {"matrix": spec.matrix.tolist()}
    else:
        out["derivation"] = {
            "spectral": [{"eigenvalue": a, "eigenvectors": v.tolist()} for a, v in spec.spectral]
        }
    return out


def serialize_spec(spec: DerivationSpec) -> str:
    return dumps(spec_to_dict(spec))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, numbers.Integral):
        return int(obj)
    if isinstance(obj, numbers.Real):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
