"""Model-file parsing and deterministic JSON/CSV emission.

Model files are JSON, schema_version "1".  Complex entries are [re, im]
pairs; matrices are row-major nested arrays of such pairs.  Parsing errors
carry the JSON path of the offending field.  Report serialization is byte
deterministic: keys sorted, floats rendered with 17 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classical import RateMatrix
from .model import FIXTURE_FAMILIES, ModelSpec

SCHEMA_VERSION = "1"


class ModelFileError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ModelFile:
    label: str
    spec: Optional[ModelSpec]
    classical: Optional[RateMatrix]
    family: Optional[str]
    params: dict


def _complex_entry(value, path: str) -> complex:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ModelFileError(path, f"expected [re, im] pair, got {value!r}")
    return complex(value[0], value[1])


def _matrix(value, dim: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != dim:
        raise ModelFileError(path, f"expected {dim} rows")
    out = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != dim:
            raise ModelFileError(f"{path}[{i}]", f"expected {dim} entries")
        for j, entry in enumerate(row):
            out[i, j] = _complex_entry(entry, f"{path}[{i}][{j}]")
    return out


def parse_model(doc: dict) -> ModelFile:
    if not isinstance(doc, dict):
        raise ModelFileError("$", "model file must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFileError(
            "schema_version", f"expected {SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}"
        )
    label = doc.get("label", "")
    params = doc.get("params", {}) or {}
    family = doc.get("family")
    if family is not None and family not in FIXTURE_FAMILIES:
        raise ModelFileError("family", f"unknown model family {family!r}")

    spec = None
    if "dim" in doc:
        dim = doc["dim"]
        if not isinstance(dim, int) or dim <= 0:
            raise ModelFileError("dim", "must be a positive integer")
        h = _matrix(doc.get("hamiltonian"), dim, "hamiltonian")
        raw_jumps = doc.get("jump_ops", [])
        if not isinstance(raw_jumps, list):
            raise ModelFileError("jump_ops", "expected a list of matrices")
        jumps = tuple(
            _matrix(entry, dim, f"jump_ops[{k}]") for k, entry in enumerate(raw_jumps)
        )
        if "p0_basis" in doc:
            idx = doc["p0_basis"]
            if (
                not isinstance(idx, list)
                or not idx
                or not all(isinstance(i, int) and 0 <= i < dim for i in idx)
            ):
                raise ModelFileError("p0_basis", f"expected basis indices in [0, {dim})")
            p0 = np.zeros((dim, dim), dtype=complex)
            for i in idx:
                p0[i, i] = 1.0
        elif "p0_matrix" in doc:
            p0 = _matrix(doc["p0_matrix"], dim, "p0_matrix")
        else:
            raise ModelFileError("p0_basis", "model needs p0_basis or p0_matrix")
        try:
            spec = ModelSpec(dim=dim, hamiltonian=h, jump_ops=jumps, p0=p0, label=label)
        except ValueError as exc:
            raise ModelFileError("$", str(exc)) from exc

    classical = None
    if "classical" in doc:
        block = doc["classical"]
        if not isinstance(block, dict):
            raise ModelFileError("classical", "expected an object")
        rates = block.get("rate_matrix")
        if not isinstance(rates, list) or not rates:
            raise ModelFileError("classical.rate_matrix", "expected a nonempty matrix")
        n = len(rates)
        q = np.zeros((n, n))
        for i, row in enumerate(rates):
            if not isinstance(row, list) or len(row) != n:
                raise ModelFileError(f"classical.rate_matrix[{i}]", f"expected {n} entries")
            for j, entry in enumerate(row):
                if not isinstance(entry, (int, float)) or isinstance(entry, bool):
                    raise ModelFileError(
                        f"classical.rate_matrix[{i}][{j}]", "expected a number"
                    )
                q[i, j] = entry
        absorbing = block.get("absorbing_set")
        if not isinstance(absorbing, list) or not absorbing:
            raise ModelFileError("classical.absorbing_set", "expected a nonempty list")
        try:
            classical = RateMatrix(n=n, q=q, absorbing_set=tuple(absorbing))
        except ValueError as exc:
            raise ModelFileError("classical", str(exc)) from exc

    if spec is None and classical is None:
        raise ModelFileError("$", "model file defines neither a quantum nor a classical model")
    return ModelFile(label=label, spec=spec, classical=classical, family=family, params=params)


def load_model(path) -> ModelFile:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFileError("$", f"invalid JSON: {exc}") from exc
    return parse_model(doc)


def matrix_to_json(mat: np.ndarray):
    mat = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def model_to_doc(spec: ModelSpec, family: str = None, params: dict = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "label": spec.label,
        "dim": spec.dim,
        "hamiltonian": matrix_to_json(spec.hamiltonian),
        "jump_ops": [matrix_to_json(l) for l in spec.jump_ops],
        "p0_matrix": matrix_to_json(spec.p0),
    }
    if family:
        doc["family"] = family
    if params:
        doc["params"] = params
    return doc


# ---------------------------------------------------------------------------
# Deterministic JSON emission
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if x != x:
        raise ValueError("NaN is not serializable in reports")
    if x in (float("inf"), float("-inf")):
        raise ValueError("infinity is not serializable in reports")
    return format(float(x), ".17g")


def dumps(obj, indent: int = 0) -> str:
    """JSON text with sorted keys and 17-significant-digit floats."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
            items.append(f"{json.dumps(key)}: {dumps(obj[key])}")
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return dumps(matrix_to_json(obj))
        return dumps(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj)!r}")
