"""Time-symmetric interference eigensolver: exact statevector and Monte-Carlo realizations."""
from __future__ import annotations

__version__ = "0.1.0"

from .operators import DenseHermitian, PauliString, PauliSum, PauliTerm, one_norm, spectral_interval
from .qmc import QmcConfig, estimate_observable
from .solver import SolverConfig, SolverResult, run_iteration_free, run_iterative
from .statevector import SpectralDecomposition, StateVector, decompose

__all__ = [
    "__version__",
    "DenseHermitian",
    "PauliString",
    "PauliSum",
    "PauliTerm",
    "QmcConfig",
    "SolverConfig",
    "SolverResult",
    "SpectralDecomposition",
    "StateVector",
    "decompose",
    "estimate_observable",
    "one_norm",
    "run_iteration_free",
    "run_iterative",
    "spectral_interval",
]
