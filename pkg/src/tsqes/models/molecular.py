"""Molecular Hamiltonian stand-ins.

Only spectra are available for the molecules studied, so two routes build a
Hamiltonian with a prescribed spectrum:

* :func:`build_h2` with coefficients from :func:`h2_alphas_for_spectrum`, which
  keeps the two-qubit H2 structure ``a0 II + a1 ZI + a2 IZ + a3 ZZ + a4 XX + a5 YY``;
* :func:`synth_spectrum`, a seeded random-unitary conjugation ``V diag(E) V^dagger``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..operators import DenseHermitian, PauliSum

# H2 at R = 1.25 Angstrom, ascending
H2_R125_SPECTRUM = (-1.0458, -0.8428, -0.4166, -0.1878)
# (ground/top mixing in span{|01>,|10>}, first/second excited mixing in span{|00>,|11>})
H2_DEFAULT_MIXING = (0.15, -0.35)
# (|00> + 2|01> + |10> + |11>)/sqrt(7)
H2_INITIAL_AMPLITUDES = (1.0, 2.0, 1.0, 1.0)

_H2_LABELS = ("II", "ZI", "IZ", "ZZ", "XX", "YY")


@dataclass(frozen=True)
class H2Coefficients:
    alpha: tuple[float, float, float, float, float, float]
    distance: float | None = None

    def __post_init__(self):
        a = tuple(float(x) for x in self.alpha)
        if len(a) != 6:
            raise ValueError("H2 Hamiltonian has exactly six coefficients")
        if not all(math.isfinite(x) for x in a):
            raise ValueError("H2 coefficients must be finite")
        object.__setattr__(self, "alpha", a)


def build_h2(c: H2Coefficients) -> PauliSum:
    items = [(a, lbl) for a, lbl in zip(c.alpha, _H2_LABELS)]
    return PauliSum.from_list(items, qubit_count=2)


def h2_alphas_for_spectrum(eigenvalues=H2_R125_SPECTRUM, mixing=H2_DEFAULT_MIXING,
                           distance: float | None = None) -> H2Coefficients:
    """Solve the inverse problem: H2-form coefficients with a given spectrum.

    The H2 form commutes with ZZ, so it splits into a block on {|01>, |10>}
    (off-diagonal a4 + a5) and a block on {|00>, |11>} (off-diagonal a4 - a5).
    The lowest and highest eigenvalues go to the first block with lower
    eigenvector ``cos(m0)|01> + sin(m0)|10>``; the middle two go to the second
    with lower eigenvector ``cos(m1)|00> + sin(m1)|11>``.
    """
    e = sorted(float(x) for x in eigenvalues)
    if len(e) != 4:
        raise ValueError("a two-qubit Hamiltonian has four eigenvalues")
    lo, mid_lo, mid_hi, hi = e
    m0, m1 = mixing

    def block(e_low, e_high, angle):
        c, s = math.cos(angle), math.sin(angle)
        diag_first = e_low * c * c + e_high * s * s
        diag_second = e_low * s * s + e_high * c * c
        off = (e_low - e_high) * c * s
        return diag_first, diag_second, off

    d01, d10, b = block(lo, hi, m0)
    d00, d11, r = block(mid_lo, mid_hi, m1)
    alpha = (
        (d00 + d11 + d01 + d10) / 4,
        (d00 - d11 + d01 - d10) / 4,
        (d00 - d11 - d01 + d10) / 4,
        (d00 + d11 - d01 - d10) / 4,
        (b + r) / 2,
        (b - r) / 2,
    )
    return H2Coefficients(alpha, distance)


def h2_standin(eigenvalues=H2_R125_SPECTRUM, mixing=H2_DEFAULT_MIXING) -> PauliSum:
    return build_h2(h2_alphas_for_spectrum(eigenvalues, mixing))


def random_unitary(dimension: int, seed) -> np.ndarray:
    """Haar-distributed unitary from a seeded complex Ginibre QR."""
    rng = np.random.default_rng(seed)
    z = (rng.normal(size=(dimension, dimension)) + 1j * rng.normal(size=(dimension, dimension)))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def synth_spectrum(eigenvalues, seed: int = 0) -> DenseHermitian:
    e = np.asarray(eigenvalues, dtype=float).reshape(-1)
    if not np.all(np.isfinite(e)):
        raise ValueError("eigenvalues must be finite")
    v = random_unitary(e.shape[0], seed)
    return DenseHermitian((v * e) @ v.conj().T)
