"""Readers and writers for operator files.

Pauli-sum text format, one term per line::

    # H2 stand-in
    -1.0458 II
    0.25 ZZ

Dense-matrix format, a JSON document::

    {"dimension": 2, "entries": [[[1, 0], [0, -1]], [[0, 1], [1, 0]]]}

``entries`` is row-major; each entry is a ``[re, im]`` pair.  A flat list of
``dimension**2`` pairs is accepted as well.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import NonHermitianError, ParseError, StructuralError
from .operators import DenseHermitian, PauliString, PauliSum, PauliTerm, canonicalize


def parse_pauli_sum(text: str, path=None) -> PauliSum:
    terms = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected '<coefficient> <string>', got {raw.strip()!r}", lineno, path)
        coef_txt, label = parts
        try:
            coef = float(coef_txt)
        except ValueError:
            raise ParseError(f"bad coefficient {coef_txt!r}", lineno, path) from None
        if not math.isfinite(coef):
            raise ParseError(f"non-finite coefficient {coef_txt!r}", lineno, path)
        try:
            s = PauliString.from_label(label)
        except StructuralError as exc:
            raise ParseError(str(exc), lineno, path) from None
        if n is None:
            n = s.n
        elif s.n != n:
            raise ParseError(f"string {label!r} has {s.n} qubits, earlier lines have {n}", lineno, path)
        terms.append(PauliTerm(coef, s))
    if n is None:
        raise ParseError("no terms found", None, path)
    return canonicalize(PauliSum(n, terms))


def load_pauli_sum(path) -> PauliSum:
    path = Path(path)
    return parse_pauli_sum(path.read_text(), path=str(path))


def format_pauli_sum(op: PauliSum) -> str:
    lines = [f"{t.coefficient!r} {t.string.label}" for t in op.terms]
    return "\n".join(lines) + "\n"


def save_pauli_sum(op: PauliSum, path) -> None:
    if len(op) == 0:
        # an empty file cannot carry the qubit count
        raise StructuralError("cannot serialize the zero operator")
    Path(path).write_text(format_pauli_sum(op))


def _entries_to_matrix(doc, path):
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object with 'dimension' and 'entries'", None, path)
    try:
        dim = int(doc["dimension"])
        entries = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing or invalid field: {exc}", None, path) from None
    if dim < 1:
        raise ParseError("dimension must be positive", None, path)
    arr = np.asarray(entries, dtype=float)
    if arr.shape == (dim * dim, 2):
        arr = arr.reshape(dim, dim, 2)
    if arr.shape != (dim, dim, 2):
        raise ParseError(
            f"entries shape {arr.shape} does not match dimension {dim} with [re, im] pairs",
            None, path,
        )
    return arr[..., 0] + 1j * arr[..., 1]


def parse_dense(text: str, path=None, atol: float = 1e-12) -> DenseHermitian:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    m = _entries_to_matrix(doc, path)
    try:
        return DenseHermitian(m, atol=atol)
    except NonHermitianError as exc:
        raise NonHermitianError(f"{path or '<string>'}: {exc}") from None


def load_dense(path, atol: float = 1e-12) -> DenseHermitian:
    path = Path(path)
    return parse_dense(path.read_text(), path=str(path), atol=atol)


def matrix_to_document(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    return {
        "dimension": int(m.shape[0]),
        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def save_dense(op, path) -> None:
    m = op.entries if isinstance(op, DenseHermitian) else np.asarray(op)
    Path(path).write_text(json.dumps(matrix_to_document(m)) + "\n")


def vector_to_document(v) -> dict:
    """Statevector dump in the dense entry format (a single column)."""
    v = np.asarray(v, dtype=complex)
    return {"dimension": int(v.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in v]}
