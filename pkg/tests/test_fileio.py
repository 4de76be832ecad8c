from __future__ import annotations

import numpy as np
import pytest

from conftest import random_pauli_items
from tsqes.errors import NonHermitianError, ParseError
from tsqes.fileio import load_dense, load_pauli_sum, parse_pauli_sum, save_dense, save_pauli_sum
from tsqes.operators import PauliSum, canonicalize


def test_identity_line(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("-1.0458 II\n")
    op = load_pauli_sum(p)
    assert op.qubit_count == 2
    assert op.as_list() == [(-1.0458, "II")]


def test_round_trip(tmp_path, rng):
    op = canonicalize(PauliSum.from_list(random_pauli_items(rng, 3, 9)))
    save_pauli_sum(op, tmp_path / "h.txt")
    assert load_pauli_sum(tmp_path / "h.txt") == op


def test_bad_letter_names_line():
    with pytest.raises(ParseError) as info:
        parse_pauli_sum("# header\n0.5 ZZ\n1.0 QZ\n", path="h.txt")
    assert info.value.line == 3
    assert "h.txt:3" in str(info.value)


def test_dense_round_trip(tmp_path, rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = a + a.conj().T
    save_dense(m, tmp_path / "m.json")
    np.testing.assert_allclose(load_dense(tmp_path / "m.json").entries, m, atol=1e-15)


def test_dense_rejects_non_hermitian(tmp_path):
    (tmp_path / "m.json").write_text('{"dimension": 2, "entries": [[[0,0],[1,0]],[[0,0],[0,0]]]}')
    with pytest.raises(NonHermitianError):
        load_dense(tmp_path / "m.json")


def test_dense_shape_error(tmp_path):
    (tmp_path / "m.json").write_text('{"dimension": 3, "entries": [[[0,0],[1,0]],[[1,0],[0,0]]]}')
    with pytest.raises(ParseError):
        load_dense(tmp_path / "m.json")
