"""Reference implementations that share no code with the package.

Matrices come from explicit Kronecker products and evolutions from
``scipy.linalg.expm``; nothing here goes through an eigendecomposition
cache or bit tricks.
"""
from __future__ import annotations

import itertools
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(label: str) -> np.ndarray:
    return reduce(np.kron, [PAULI[c] for c in label])


def pauli_sum_matrix(items) -> np.ndarray:
    items = list(items)
    n = len(items[0][1])
    m = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for c, label in items:
        m += c * pauli_matrix(label)
    return m


def random_hermitian(dim: int, rng) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_state(dim: int, rng) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def interference_operator(h: np.ndarray, e_s: float, t: float, subspace: int) -> np.ndarray:
    """(U_f + U_b)/2 or (U_f - U_b)/2 from matrix exponentials."""
    shifted = h - e_s * np.eye(h.shape[0])
    uf = expm(-1j * shifted * t)
    ub = expm(1j * shifted * t)
    return (uf + ub) / 2 if subspace == 0 else (uf - ub) / 2


def filtered(h, psi, e_s, t, k, subspace=0) -> np.ndarray:
    """Unnormalized k-fold interference applied to psi."""
    op = interference_operator(h, e_s, t, subspace)
    v = np.asarray(psi, dtype=complex)
    for _ in range(k):
        v = op @ v
    return v


def energy_trace(h, psi, e_s, t, k_max, subspace=0) -> list[float]:
    op = interference_operator(h, e_s, t, subspace)
    v = np.asarray(psi, dtype=complex)
    out = [float(np.vdot(v, h @ v).real)]
    for _ in range(k_max):
        v = op @ v
        v = v / np.linalg.norm(v)
        out.append(float(np.vdot(v, h @ v).real))
    return out


# fermions, built from sparse Kronecker products

_SP = {k: sp.csr_matrix(v) for k, v in PAULI.items()}
_LOWER = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))  # |0><1|, occupied = |1>


def annihilator(mode: int, n_modes: int) -> sp.csr_matrix:
    """Jordan-Wigner a_j with mode j as the j-th Kronecker factor."""
    factors = [_SP["Z"]] * mode + [_LOWER] + [_SP["I"]] * (n_modes - mode - 1)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)


def ssh_hubbard_sparse(t1, t2, U, n_sites) -> sp.csr_matrix:
    n_modes = 2 * n_sites
    a = [annihilator(j, n_modes) for j in range(n_modes)]
    num = [x.conj().T @ x for x in a]
    h = sp.csr_matrix((2 ** n_modes, 2 ** n_modes), dtype=complex)

    def mode(cell, d):
        return 4 * cell + d - 1

    def hop(i, j, amp):
        return amp * (a[i].conj().T @ a[j] + a[j].conj().T @ a[i])

    for c in range(n_sites // 2):
        for x, y in ((1, 2), (3, 4)):
            h = h + hop(mode(c, x), mode(c, y), -t1)
        if c + 1 < n_sites // 2:
            for x, y in ((2, 1), (4, 3)):
                h = h + hop(mode(c, x), mode(c + 1, y), -t2)
        for x, y in ((1, 3), (2, 4)):
            h = h + U * num[mode(c, x)] @ num[mode(c, y)]
    return h.tocsr()


def fixed_weight_indices(n_bits: int, weight: int) -> np.ndarray:
    return np.array([i for i in range(2 ** n_bits) if bin(i).count("1") == weight])


def free_fermion_spectrum(single_particle: np.ndarray) -> np.ndarray:
    """All many-body energies: sums over occupied subsets of single-particle levels."""
    e = np.linalg.eigvalsh(single_particle)
    sums = [sum(c) for r in range(len(e) + 1) for c in itertools.combinations(e, r)]
    return np.sort(np.array(sums, dtype=float))
