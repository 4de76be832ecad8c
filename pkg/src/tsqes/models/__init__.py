"""Hamiltonian constructors for the systems studied with the solver."""
from __future__ import annotations

from ..fileio import load_dense, load_pauli_sum
from .fermions import (
    FermionicTerm,
    SSHHubbardParams,
    build_ssh_hubbard,
    embed_from_sector,
    jordan_wigner,
    number_sector_basis,
    restrict_to_sector,
)
from .kane_mele import KaneMeleParams, build_kane_mele_ribbon, momentum_grid
from .molecular import H2Coefficients, build_h2, h2_alphas_for_spectrum, h2_standin, synth_spectrum

__all__ = [
    "FermionicTerm",
    "H2Coefficients",
    "KaneMeleParams",
    "SSHHubbardParams",
    "build_h2",
    "build_kane_mele_ribbon",
    "build_ssh_hubbard",
    "embed_from_sector",
    "h2_alphas_for_spectrum",
    "h2_standin",
    "jordan_wigner",
    "load_dense",
    "load_pauli_sum",
    "momentum_grid",
    "number_sector_basis",
    "restrict_to_sector",
    "synth_spectrum",
]
