"""Hermitian operators in Pauli-sum and dense form.

A Pauli string over n qubits is stored as two packed bit planes, ``xmask`` and
``zmask``: letter ``I`` is (0, 0), ``X`` is (1, 0), ``Z`` is (0, 1) and ``Y`` is
(1, 1).  Character ``q`` of a label acts on qubit ``q``, which is the bit
``n - 1 - q`` of a computational-basis index, so ``"XI"`` equals
``kron(X, I)``.

With that encoding the action on a basis state is a permutation with a phase,

    P |b> = i^{|x & z|} (-1)^{|b & z|} |b ^ x>,

and no dense matrix is needed to apply a Pauli sum to a vector.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonHermitianError,
    ResourceLimitError,
    StructuralError,
)

DEFAULT_DENSE_QUBIT_CAP = 14
ZERO_COEFFICIENT_EPS = 1e-15
HERMITIAN_ATOL = 1e-12

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {bits: letter for letter, bits in _LETTER_BITS.items()}
_I_POWERS = np.array([1, 1j, -1, -1j])


def _popcount(a):
    # bitwise_count yields uint8; widen so sign arithmetic cannot wrap
    return np.bitwise_count(a).astype(np.int64)


@dataclass(frozen=True)
class PauliString:
    """An n-qubit tensor product of I, X, Y, Z."""

    n: int
    xmask: int
    zmask: int

    def __post_init__(self):
        if self.n < 1:
            raise StructuralError("a Pauli string needs at least one qubit")
        limit = 1 << self.n
        if not (0 <= self.xmask < limit and 0 <= self.zmask < limit):
            raise StructuralError("mask wider than the qubit count")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        if not label:
            raise StructuralError("empty Pauli label")
        n = len(label)
        x = z = 0
        for q, ch in enumerate(label):
            try:
                xb, zb = _LETTER_BITS[ch]
            except KeyError:
                raise StructuralError(f"invalid Pauli letter {ch!r} in {label!r}") from None
            bit = n - 1 - q
            x |= xb << bit
            z |= zb << bit
        return cls(n, x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @property
    def label(self) -> str:
        out = []
        for q in range(self.n):
            bit = self.n - 1 - q
            out.append(_BITS_LETTER[((self.xmask >> bit) & 1, (self.zmask >> bit) & 1)])
        return "".join(out)

    @property
    def is_identity(self) -> bool:
        return self.xmask == 0 and self.zmask == 0

    @property
    def y_count(self) -> int:
        return (self.xmask & self.zmask).bit_count()

    def __str__(self):
        return self.label

    def __lt__(self, other):
        return self.label < other.label

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix, built from the permutation form."""
        dim = 1 << self.n
        cols = np.arange(dim, dtype=np.int64)
        rows = cols ^ self.xmask
        phase = _I_POWERS[self.y_count % 4] * (1 - 2 * (_popcount(cols & self.zmask) & 1))
        m = np.zeros((dim, dim), dtype=complex)
        m[rows, cols] = phase
        return m


def apply_pauli_string(s: PauliString, v: np.ndarray) -> np.ndarray:
    """Return ``s @ v`` without forming a matrix."""
    v = np.asarray(v)
    dim = 1 << s.n
    if v.shape[0] != dim:
        raise DimensionMismatchError(f"vector of length {v.shape[0]} for a {s.n}-qubit string")
    idx = np.arange(dim, dtype=np.int64)
    src = idx ^ s.xmask
    sign = 1 - 2 * (_popcount(src & s.zmask) & 1)
    if v.ndim > 1:
        sign = sign.reshape((-1,) + (1,) * (v.ndim - 1))
    return _I_POWERS[s.y_count % 4] * sign * v[src]


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    string: PauliString

    def __post_init__(self):
        c = self.coefficient
        if isinstance(c, (complex, np.complexfloating)):
            if c.imag != 0:
                raise TypeError(
                    f"Pauli coefficients must be real for a Hermitian sum, got {c!r}"
                )
            c = c.real
        c = float(c)
        if not math.isfinite(c):
            raise ValueError(f"non-finite Pauli coefficient {c!r}")
        object.__setattr__(self, "coefficient", c)


class HermitianOperator(abc.ABC):
    """Common surface of Pauli sums and dense Hermitian matrices."""

    @property
    @abc.abstractmethod
    def dimension(self) -> int: ...

    @abc.abstractmethod
    def apply(self, v: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def one_norm(self) -> float: ...

    @abc.abstractmethod
    def to_matrix(self, cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray: ...

    def dense_available(self, cap: int = DEFAULT_DENSE_QUBIT_CAP) -> bool:
        return self.dimension <= (1 << cap)

    def __matmul__(self, v):
        return self.apply(v)


class PauliSum(HermitianOperator):
    """Real-weighted sum of Pauli strings on a fixed number of qubits.

    The constructor keeps terms as given; :func:`canonicalize` merges repeated
    strings and drops vanishing weights.  Builders in this package always return
    canonical sums.
    """

    def __init__(self, qubit_count: int, terms: Iterable[PauliTerm] = ()):
        if qubit_count < 1:
            raise StructuralError("qubit_count must be positive")
        terms = tuple(terms)
        for term in terms:
            if term.string.n != qubit_count:
                raise StructuralError(
                    f"string {term.string.label} has length {term.string.n}, "
                    f"expected {qubit_count}"
                )
        self._n = qubit_count
        self._terms = terms

    @classmethod
    def from_list(cls, items: Sequence[tuple[float, str]], qubit_count: int | None = None,
                  canonical: bool = True) -> "PauliSum":
        """Build from ``[(coefficient, label), ...]``."""
        terms = [PauliTerm(c, PauliString.from_label(lbl)) for c, lbl in items]
        if qubit_count is None:
            if not terms:
                raise StructuralError("cannot infer qubit count from an empty term list")
            qubit_count = terms[0].string.n
        out = cls(qubit_count, terms)
        return canonicalize(out) if canonical else out

    @classmethod
    def zero(cls, qubit_count: int) -> "PauliSum":
        return cls(qubit_count, ())

    @property
    def qubit_count(self) -> int:
        return self._n

    @property
    def terms(self) -> tuple[PauliTerm, ...]:
        return self._terms

    @property
    def dimension(self) -> int:
        return 1 << self._n

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, self._terms))

    def __repr__(self):
        body = ", ".join(f"{t.coefficient:+.6g}*{t.string.label}" for t in self._terms[:6])
        more = ", ..." if len(self._terms) > 6 else ""
        return f"PauliSum({self._n}q: {body}{more})"

    def as_list(self) -> list[tuple[float, str]]:
        return [(t.coefficient, t.string.label) for t in self._terms]

    def identity_coefficient(self) -> float:
        return sum(t.coefficient for t in self._terms if t.string.is_identity)

    def coefficients(self) -> np.ndarray:
        return np.array([t.coefficient for t in self._terms], dtype=float)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"vector of length {v.shape[0]} for a {self._n}-qubit operator"
            )
        out = np.zeros_like(v)
        # Fixed sequential order keeps the reduction deterministic.
        for term in self._terms:
            out += term.coefficient * apply_pauli_string(term.string, v)
        return out

    def one_norm(self) -> float:
        return float(sum(abs(t.coefficient) for t in self._terms))

    def to_matrix(self, cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray:
        if self._n > cap:
            raise ResourceLimitError(
                f"{self._n} qubits exceeds the dense cap of {cap}"
            )
        dim = self.dimension
        m = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim, dtype=np.int64)
        for term in self._terms:
            s = term.string
            rows = cols ^ s.xmask
            phase = _I_POWERS[s.y_count % 4] * (1 - 2 * (_popcount(cols & s.zmask) & 1))
            m[rows, cols] += term.coefficient * phase
        return m

    def __add__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other._n != self._n:
            raise StructuralError("qubit counts differ")
        return canonicalize(PauliSum(self._n, self._terms + other._terms))

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating, np.integer)):
            return NotImplemented
        return canonicalize(
            PauliSum(self._n, [PauliTerm(scalar * t.coefficient, t.string) for t in self._terms])
        )

    __rmul__ = __mul__


def canonicalize(sum_: PauliSum) -> PauliSum:
    """Merge repeated strings, drop |c| < 1e-15, order strings lexicographically."""
    n = sum_.qubit_count
    acc: dict[tuple[int, int], float] = {}
    strings: dict[tuple[int, int], PauliString] = {}
    for term in sum_.terms:
        s = term.string
        if s.n != n:
            raise StructuralError(f"string {s.label} does not match {n} qubits")
        key = (s.xmask, s.zmask)
        acc[key] = acc.get(key, 0.0) + term.coefficient
        strings[key] = s
    kept = [
        PauliTerm(c, strings[key]) for key, c in acc.items() if abs(c) >= ZERO_COEFFICIENT_EPS
    ]
    kept.sort(key=lambda t: t.string.label)
    return PauliSum(n, kept)


class DenseHermitian(HermitianOperator):
    """An explicit Hermitian matrix (tight-binding blocks, file-loaded data).

    The stored matrix is the Hermitian part of the input; inputs further than
    ``atol`` from Hermitian are rejected.
    """

    def __init__(self, entries, atol: float = HERMITIAN_ATOL):
        m = np.array(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise StructuralError(f"expected a square matrix, got shape {m.shape}")
        residual = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if residual > atol:
            raise NonHermitianError(f"matrix is not Hermitian (max |H - H^dagger| = {residual:.3e})")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self._m = m
        self._one_norm = None

    @property
    def dimension(self) -> int:
        return self._m.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._m

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"vector of length {v.shape[0]} for a {self.dimension}-dim operator"
            )
        return self._m @ v

    def one_norm(self) -> float:
        """Sum of |Pauli weights| of the matrix zero-padded to a qubit register."""
        if self._one_norm is None:
            self._one_norm = pauli_decompose(self._m).one_norm()
        return self._one_norm

    def to_matrix(self, cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray:
        if self.dimension > (1 << cap):
            raise ResourceLimitError(f"dimension {self.dimension} exceeds the dense cap 2^{cap}")
        return self._m

    def __eq__(self, other):
        if not isinstance(other, DenseHermitian):
            return NotImplemented
        return self._m.shape == other._m.shape and bool(np.array_equal(self._m, other._m))

    __hash__ = None

    def __repr__(self):
        return f"DenseHermitian(dimension={self.dimension})"


def apply(op: HermitianOperator, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def one_norm(op: HermitianOperator) -> float:
    return op.one_norm()


def to_dense(op: HermitianOperator, cap: int = DEFAULT_DENSE_QUBIT_CAP) -> DenseHermitian:
    if isinstance(op, DenseHermitian):
        op.to_matrix(cap)
        return op
    return DenseHermitian(op.to_matrix(cap))


def pauli_decompose(matrix, tol: float = 1e-12) -> PauliSum:
    """Pauli weights ``Tr(P M) / 2^n`` of a Hermitian matrix.

    Dimensions that are not a power of two are zero-padded to the next one.
    Runs in O(n 4^n) by transforming one (row, column) qubit pair at a time.
    """
    m = np.asarray(matrix, dtype=complex)
    dim = m.shape[0]
    n = max(1, math.ceil(math.log2(dim))) if dim > 1 else 1
    full = 1 << n
    if full != dim:
        padded = np.zeros((full, full), dtype=complex)
        padded[:dim, :dim] = m
        m = padded
    # (r_0..r_{n-1}, c_0..c_{n-1}) -> (r_0, c_0, r_1, c_1, ...) -> one axis of 4 per qubit
    t = m.reshape((2,) * (2 * n))
    order = [ax for q in range(n) for ax in (q, n + q)]
    t = t.transpose(order).reshape((4,) * n)
    # rows: I, X, Y, Z; columns: 2r + c
    basis = 0.5 * np.array(
        [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1j, -1j, 0], [1, 0, 0, -1]], dtype=complex
    )
    for axis in range(n):
        t = np.moveaxis(np.tensordot(basis, t, axes=([1], [axis])), 0, axis)
    coeffs = t.reshape(-1)
    if np.max(np.abs(coeffs.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        raise NonHermitianError("matrix has complex Pauli weights")
    letters = "IXYZ"
    items = []
    for flat in np.flatnonzero(np.abs(coeffs.real) > tol):
        digits = np.unravel_index(flat, (4,) * n)
        items.append((float(coeffs[flat].real), "".join(letters[d] for d in digits)))
    if not items:
        return PauliSum.zero(n)
    return PauliSum.from_list(items, qubit_count=n)


def spectral_interval(op: HermitianOperator, cap: int = DEFAULT_DENSE_QUBIT_CAP,
                      exact: bool | None = None) -> tuple[float, float]:
    """An interval containing every eigenvalue of ``op``.

    Exact (dense diagonalization) when the dense path fits under ``cap``;
    otherwise, for Pauli sums, ``[c0 - ||H||_1, c0 + ||H||_1]`` with ``c0`` the
    identity weight.  ``exact=False`` forces the bound.
    """
    if exact is None:
        exact = op.dense_available(cap)
    if exact:
        w = np.linalg.eigvalsh(op.to_matrix(cap))
        return float(w[0]), float(w[-1])
    if not isinstance(op, PauliSum):
        raise ResourceLimitError("no spectral bound available for a dense operator beyond the cap")
    c0 = op.identity_coefficient()
    norm = op.one_norm()
    return c0 - norm, c0 + norm


def is_hermitian_action(op: HermitianOperator, rng=None, trials: int = 3, atol: float = 1e-10) -> bool:
    """Check <u, Hv> == conj(<v, Hu>) on random vectors."""
    rng = np.random.default_rng(rng)
    d = op.dimension
    for _ in range(trials):
        u = rng.normal(size=d) + 1j * rng.normal(size=d)
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        lhs = np.vdot(u, op.apply(v))
        rhs = np.conj(np.vdot(v, op.apply(u)))
        if abs(lhs - rhs) > atol * max(1.0, abs(lhs)):
            return False
    return True
