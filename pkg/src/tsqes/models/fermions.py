"""Fermionic operators, the Jordan-Wigner map and the SSH-Hubbard chain.

Mode ``j`` maps to qubit ``j``, i.e. label position ``j`` of a Pauli string, so
mode 0 is the most significant bit of a computational-basis index.  Under
Jordan-Wigner ``a_j^dagger -> Z_0 ... Z_{j-1} (X_j - i Y_j)/2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonHermitianError, StructuralError
from ..operators import DenseHermitian, HermitianOperator, PauliString, PauliSum, PauliTerm, canonicalize

IMAG_ATOL = 1e-12


@dataclass(frozen=True)
class FermionicTerm:
    """``coefficient * prod(op)`` with ``op = (mode, dagger)`` applied left to right."""

    operators: tuple[tuple[int, bool], ...]
    coefficient: float = 1.0

    def __post_init__(self):
        ops = tuple((int(m), bool(d)) for m, d in self.operators)
        if any(m < 0 for m, _ in ops):
            raise StructuralError("mode indices must be nonnegative")
        object.__setattr__(self, "operators", ops)
        if not math.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    def conjugate(self) -> "FermionicTerm":
        return FermionicTerm(tuple((m, not d) for m, d in reversed(self.operators)), self.coefficient)


def creation(mode: int) -> tuple[int, bool]:
    return (mode, True)


def annihilation(mode: int) -> tuple[int, bool]:
    return (mode, False)


def hopping(i: int, j: int, amplitude: float) -> list[FermionicTerm]:
    """``amplitude (a_i^dagger a_j + a_j^dagger a_i)``."""
    return [FermionicTerm(((i, True), (j, False)), amplitude),
            FermionicTerm(((j, True), (i, False)), amplitude)]


def number(i: int) -> FermionicTerm:
    return FermionicTerm(((i, True), (i, False)))


# complex Pauli polynomials: {(xmask, zmask): coefficient}, P(x, z) = i^{|x&z|} X^x Z^z

def _popcount(v: int) -> int:
    return bin(v).count("1")


def _mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            x, z = x1 ^ x2, z1 ^ z2
            e = (_popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)) % 4
            key = (x, z)
            out[key] = out.get(key, 0) + c1 * c2 * (1j ** e)
    return out


def _ladder(mode: int, dagger: bool, n: int) -> dict:
    bit = 1 << (n - 1 - mode)
    zstring = 0
    for q in range(mode):
        zstring |= 1 << (n - 1 - q)
    # (X -+ iY)/2 on the mode, Z on every lower mode
    sign = -1 if dagger else 1
    return {(bit, zstring): 0.5, (bit, zstring | bit): sign * 0.5j}


def jordan_wigner(terms, mode_count: int, add_conjugates: bool = False) -> PauliSum:
    """Qubit image of a sum of fermionic terms.

    With ``add_conjugates`` every term's Hermitian conjugate is appended;
    otherwise the supplied sum must already be Hermitian.
    """
    terms = list(terms)
    if add_conjugates:
        terms = terms + [t.conjugate() for t in terms]
    total: dict = {}
    for term in terms:
        poly = {(0, 0): complex(term.coefficient)}
        for mode, dagger in term.operators:
            if mode >= mode_count:
                raise StructuralError(f"mode {mode} out of range for {mode_count} modes")
            poly = _mul(poly, _ladder(mode, dagger, mode_count))
        for k, c in poly.items():
            total[k] = total.get(k, 0) + c
    out = []
    for (x, z), c in total.items():
        if abs(c.imag) > IMAG_ATOL:
            raise NonHermitianError(
                f"Jordan-Wigner image has imaginary coefficient {c.imag:.3e}; supply conjugate terms"
            )
        if c.real != 0:
            out.append(PauliTerm(float(c.real), PauliString(mode_count, x, z)))
    return canonicalize(PauliSum(mode_count, out))


@dataclass(frozen=True)
class SSHHubbardParams:
    t1: float = 1.0
    t2: float = 1.0
    U: float = 10.0
    n_sites: int = 6
    n_electrons: int = 6

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be a positive even integer (A/B cells)")
        if not 0 <= self.n_electrons <= 2 * self.n_sites:
            raise ValueError("n_electrons must lie in [0, 2 n_sites]")

    @property
    def n_cells(self) -> int:
        return self.n_sites // 2

    @property
    def mode_count(self) -> int:
        return 2 * self.n_sites


def ssh_mode(cell: int, d: int) -> int:
    """Mode of d_{cell, d}; d = 1 A-up, 2 B-up, 3 A-down, 4 B-down."""
    return 4 * cell + (d - 1)


def ssh_hubbard_terms(p: SSHHubbardParams) -> list[FermionicTerm]:
    terms = []
    for i in range(p.n_cells):
        for a, b in ((1, 2), (3, 4)):
            terms += hopping(ssh_mode(i, a), ssh_mode(i, b), -p.t1)
        if i + 1 < p.n_cells:
            for a, b in ((2, 1), (4, 3)):
                terms += hopping(ssh_mode(i, a), ssh_mode(i + 1, b), -p.t2)
        if p.U != 0:
            for a, b in ((1, 3), (2, 4)):
                terms.append(FermionicTerm(((ssh_mode(i, a), True), (ssh_mode(i, a), False),
                                            (ssh_mode(i, b), True), (ssh_mode(i, b), False)), p.U))
    return terms


def build_ssh_hubbard(p: SSHHubbardParams) -> PauliSum:
    """Open SSH chain with on-site Hubbard U, mapped to ``2 n_sites`` qubits.

    Mode ordering is cell-major then d-index, see :func:`ssh_mode`.
    """
    return jordan_wigner(ssh_hubbard_terms(p), p.mode_count)


def number_sector_basis(mode_count: int, n_particles: int) -> np.ndarray:
    """Ascending basis indices with exactly ``n_particles`` set bits."""
    if not 0 <= n_particles <= mode_count:
        raise ValueError("need 0 <= n_particles <= mode_count")
    idx = [sum(1 << b for b in bits) for bits in itertools.combinations(range(mode_count), n_particles)]
    return np.array(sorted(idx), dtype=np.int64)


def restrict_to_sector(op: HermitianOperator, basis_indices) -> DenseHermitian:
    """Block of ``op`` on the span of the given basis states.

    ``op`` must conserve the sector; leakage is not detected.  Pauli sums are restricted term by term on
    the sector indices, so the full matrix is never materialized.
    """
    idx = np.asarray(basis_indices, dtype=np.int64)
    m = idx.shape[0]
    block = np.zeros((m, m), dtype=complex)
    if isinstance(op, PauliSum):
        cols = np.arange(m)
        for term in op.terms:
            s = term.string
            rows_full = idx ^ s.xmask
            rows = np.searchsorted(idx, rows_full)
            inside = (rows < m) & (idx[np.minimum(rows, m - 1)] == rows_full)
            # single strings may leave the sector; for a conserving sum those parts cancel
            parity = np.bitwise_count(idx & s.zmask).astype(np.int64) & 1
            phase = (1j ** (s.y_count % 4)) * (1 - 2 * parity)
            np.add.at(block, (rows[inside], cols[inside]), term.coefficient * phase[inside])
    else:
        full = op.to_matrix()
        block = full[np.ix_(idx, idx)]
    return DenseHermitian(block, atol=1e-10)


def embed_from_sector(vector, basis_indices, dimension: int) -> np.ndarray:
    out = np.zeros(dimension, dtype=complex)
    out[np.asarray(basis_indices)] = vector
    return out
