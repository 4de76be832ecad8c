"""Exact statevectors and evolution in the eigenbasis of a Hermitian operator.

Every evolution here is diagonal in the eigenbasis of ``H``: the forward
operator ``exp(-i(H - e_s)t)`` multiplies eigencomponent ``i`` by
``exp(-i(E_i - e_s)t)``, and the interference step ``(U_f + U_b)/2`` by
``cos((E_i - e_s)t)``.  The difference branch ``(U_f - U_b)/2`` equals
``-i sin((H - e_s)t)``; the ``-i`` is a global phase and is dropped, so
subspace-1 states compare equal only up to a global phase.

Interference shrinks the norm geometrically.  States are therefore kept at
unit norm and the logarithm of the true norm is carried in ``log_norm``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DestructiveInterferenceError, DimensionMismatchError, NonHermitianError
from .operators import DEFAULT_DENSE_QUBIT_CAP, HermitianOperator

UNDERFLOW_NORM = 1e-300
FORWARD, BACKWARD = "forward", "backward"


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    log_norm: float = 0.0

    def __post_init__(self):
        amps = self.amplitudes
        if not (isinstance(amps, np.ndarray) and amps.dtype == complex and not amps.flags.writeable):
            amps = _frozen(amps)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be a 1-d vector")
        object.__setattr__(self, "amplitudes", amps)
        if not math.isfinite(self.log_norm):
            raise ValueError("log_norm must be finite")

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = True) -> "StateVector":
        a = np.asarray(amplitudes, dtype=complex)
        if normalize:
            nrm = np.linalg.norm(a)
            if nrm == 0:
                raise ValueError("cannot normalize the zero vector")
            a = a / nrm
        return cls(a)

    @classmethod
    def basis(cls, dimension: int, index: int) -> "StateVector":
        a = np.zeros(dimension, dtype=complex)
        a[index] = 1.0
        return cls(a)

    @classmethod
    def uniform(cls, dimension: int) -> "StateVector":
        """Equal-weight superposition, the |+>^n state for qubit registers."""
        return cls(np.full(dimension, 1 / math.sqrt(dimension), dtype=complex))

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        """|<a|b>|^2 of the stored (unit) amplitudes; insensitive to global phase."""
        return abs(self.overlap(other)) ** 2


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.eigenvalues, dtype=float)
        v = np.array(self.eigenvectors, dtype=complex)
        if v.shape != (w.shape[0], w.shape[0]):
            raise ValueError("eigenvector matrix must be square and match the eigenvalues")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def dimension(self) -> int:
        return self.eigenvalues.shape[0]

    def coefficients(self, state) -> np.ndarray:
        """Eigenbasis components a_i = <E_i|psi>."""
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        if amps.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"state of dimension {amps.shape[0]} against a {self.dimension}-dim spectrum"
            )
        return self.eigenvectors.conj().T @ amps

    def synthesize(self, coefficients) -> np.ndarray:
        return self.eigenvectors @ coefficients

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def eigenstate(self, index: int) -> StateVector:
        return StateVector(self.eigenvectors[:, index])

    def apply_function(self, state, values) -> np.ndarray:
        """f(H)|psi> for f given by its values on the eigenvalues."""
        return self.synthesize(values * self.coefficients(state))


def decompose(op: HermitianOperator, cap: int = DEFAULT_DENSE_QUBIT_CAP,
              atol: float = 1e-8) -> SpectralDecomposition:
    m = op.to_matrix(cap) if isinstance(op, HermitianOperator) else np.asarray(op, dtype=complex)
    residual = float(np.max(np.abs(m - m.conj().T)))
    if residual > atol:
        raise NonHermitianError(f"symmetrization residual {residual:.3e} exceeds {atol:g}")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return SpectralDecomposition(w, v)


def _check_dim(state: StateVector, d: SpectralDecomposition):
    if state.dimension != d.dimension:
        raise DimensionMismatchError(
            f"state of dimension {state.dimension} against a {d.dimension}-dim spectrum"
        )


def phases(d: SpectralDecomposition, e_s: float, t: float) -> np.ndarray:
    """theta_i = (E_i - e_s) t."""
    return (d.eigenvalues - e_s) * t


def evolve(state: StateVector, d: SpectralDecomposition, e_s: float, t: float,
           direction: str = FORWARD) -> StateVector:
    """Apply U_f = exp(-i(H - e_s)t) or U_b = exp(+i(H - e_s)t)."""
    _check_dim(state, d)
    if direction == FORWARD:
        sign = -1.0
    elif direction == BACKWARD:
        sign = 1.0
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    factors = np.exp(sign * 1j * phases(d, e_s, t))
    return StateVector(d.apply_function(state, factors), state.log_norm)


def multipliers(d: SpectralDecomposition, e_s: float, t: float, subspace: int) -> np.ndarray:
    """Per-eigenvalue multiplier of one interference step: cos (subspace 0) or sin (1)."""
    theta = phases(d, e_s, t)
    if subspace == 0:
        return np.cos(theta)
    if subspace == 1:
        return np.sin(theta)
    raise ValueError(f"subspace must be 0 or 1, got {subspace!r}")


def interference_step(state: StateVector, d: SpectralDecomposition, e_s: float, t: float,
                      subspace: int) -> StateVector:
    """One post-selected LCU round, renormalized with the norm folded into log_norm."""
    _check_dim(state, d)
    new = d.apply_function(state, multipliers(d, e_s, t, subspace))
    nrm = float(np.linalg.norm(new))
    if not nrm > UNDERFLOW_NORM:
        raise DestructiveInterferenceError(
            "iterate vanished: the initial state has no weight on the surviving eigencomponents"
        )
    return StateVector(new / nrm, state.log_norm + math.log(nrm))


def expectation(state: StateVector, op: HermitianOperator, atol: float = 1e-10) -> float:
    if state.dimension != op.dimension:
        raise DimensionMismatchError(
            f"state of dimension {state.dimension} against a {op.dimension}-dim operator"
        )
    val = np.vdot(state.amplitudes, op.apply(state.amplitudes))
    if abs(val.imag) > atol * max(1.0, abs(val.real)):
        raise NonHermitianError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


@dataclass(frozen=True)
class AmplificationFactors:
    """lambda_{i0} = 2 cos((E_i - e_s)t) and lambda_{i1} = 2 sin((E_i - e_s)t).

    The (-i)^k phase that accompanies the sine branch is not included.
    """

    cos_branch: np.ndarray
    sin_branch: np.ndarray

    def for_subspace(self, subspace: int) -> np.ndarray:
        return self.cos_branch if subspace == 0 else self.sin_branch


def amplification_factors(d: SpectralDecomposition, e_s: float, t: float) -> AmplificationFactors:
    theta = phases(d, e_s, t)
    return AmplificationFactors(2 * np.cos(theta), 2 * np.sin(theta))
