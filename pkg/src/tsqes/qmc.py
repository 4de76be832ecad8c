"""Monte-Carlo realization of the interference filter with Hadamard tests.

With ``U = U_f = exp(-i(H - e_s)t)`` the filter has the binomial expansion

    cos^k((H - e_s)t) = E_{j ~ B(k, 1/2)} U^{2j - k},
    (-i sin((H - e_s)t))^k = E_{j ~ B(k, 1/2)} (-1)^{k - j} U^{2j - k},

so the denominator ``D = ||filter psi0||^2`` and numerator
``N(O) = <filter psi0| O |filter psi0>`` are expectations of single Hadamard-test
readouts over ``(k1, k2)`` (and a Pauli index ``n`` drawn with probability
``|c_n| / ||O||_1`` for N).  The estimate of ``<O>`` after k rounds is
``Re(N / D)``.

Hadamard-test convention: with branch0 on ancilla |0> and branch1 on |1>,
``<X> = Re<b0|b1>`` and ``<Y> = Im<b0|b1>``.  For D, ``b0 = psi0`` and
``b1 = U^{2(k1 - k2)} psi0`` and a sample is ``<X> + i<Y>``.  For N,
``b0 = sigma_n U^{2 k1 - k} psi0`` and ``b1 = U^{2 k2 - k} psi0`` and a sample is
``||O||_1 sign(c_n) (<X> - i<Y>)``.

Samples alternate X (even global index) and Y (odd).  Randomness is drawn in
fixed-size blocks, each from its own ``SeedSequence(seed, spawn_key=(branch,
block))`` stream, so the result depends only on the seed and never on the
number of workers.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import DimensionMismatchError, StructuralError, UnstableRatioError
from .operators import DenseHermitian, PauliString, PauliSum, apply_pauli_string, pauli_decompose
from .statevector import SpectralDecomposition, StateVector

SHOT_MODES = ("exact_expectation", "single_shot")
BLOCK_SIZE = 8192
_BRANCH_ID = {"D": 0, "N": 1}


@dataclass(frozen=True)
class QmcConfig:
    k: int
    e_s: float
    t: float
    n_D: int = 1 << 16
    n_N: int = 1 << 16
    seed: int = 0
    shot_mode: str = "exact_expectation"
    subspace: int = 0
    enumerate: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a nonnegative integer")
        if self.n_D < 1 or self.n_N < 1:
            raise ValueError("n_D and n_N must be >= 1")
        if self.shot_mode not in SHOT_MODES:
            raise ValueError(f"shot_mode must be one of {SHOT_MODES}")
        if self.subspace not in (0, 1):
            raise ValueError("subspace must be 0 or 1")
        if not (math.isfinite(self.e_s) and math.isfinite(self.t)):
            raise ValueError("e_s and t must be finite")


@dataclass(frozen=True)
class ComplexEstimate:
    value: complex
    standard_error: float
    sample_count: int
    standard_error_re: float = 0.0
    standard_error_im: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.standard_error) or self.standard_error < 0:
            raise ValueError("standard_error must be finite and nonnegative")
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")


@dataclass(frozen=True)
class ObservableEstimate:
    value: float
    standard_error: float
    D: ComplexEstimate
    N: ComplexEstimate


def sample_binomial(k: int, rng: np.random.Generator) -> int:
    """One draw from B(k, 1/2)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return int(rng.binomial(k, 0.5))


def _powers(d: SpectralDecomposition, coeffs, e_s, t, p):
    return d.synthesize(np.exp(-1j * p * (d.eigenvalues - e_s) * t) * coeffs)


def hadamard_test(psi0: StateVector, power, d: SpectralDecomposition, e_s: float, t: float,
                  basis: str = "X", insert: tuple[float, PauliString] | PauliString | None = None,
                  mode: str = "exact_expectation", rng: np.random.Generator | None = None) -> float:
    """Ancilla X or Y readout of one Hadamard-test circuit.

    ``power`` is either ``p`` (branches ``psi0`` and ``U^p psi0``) or a pair
    ``(p0, p1)`` giving ``insert U^{p0} psi0`` and ``U^{p1} psi0``.  ``insert``
    is a Pauli string or ``(sign, string)``.
    """
    if psi0.dimension != d.dimension:
        raise DimensionMismatchError(f"state of dimension {psi0.dimension} against a {d.dimension}-dim spectrum")
    p0, p1 = (0, power) if np.isscalar(power) else power
    c = d.coefficients(psi0)
    b0 = _powers(d, c, e_s, t, p0)
    b1 = _powers(d, c, e_s, t, p1)
    sign = 1.0
    if insert is not None:
        if isinstance(insert, tuple):
            sign, insert = insert
        if (1 << insert.n) != d.dimension:
            raise DimensionMismatchError("inserted Pauli string does not match the register")
        b0 = sign * apply_pauli_string(insert, b0)
    z = np.vdot(b0, b1)
    if basis == "X":
        exact = float(z.real)
    elif basis == "Y":
        exact = float(z.imag)
    else:
        raise ValueError("basis must be 'X' or 'Y'")
    if mode == "exact_expectation":
        return exact
    if mode == "single_shot":
        if rng is None:
            raise ValueError("single_shot mode needs an rng")
        return 1.0 if rng.random() < 0.5 * (1 + exact) else -1.0
    raise ValueError(f"mode must be one of {SHOT_MODES}")


def _as_pauli_sum(observable) -> PauliSum:
    if isinstance(observable, PauliSum):
        op = observable
    elif isinstance(observable, DenseHermitian):
        op = pauli_decompose(observable.entries)
    else:
        raise TypeError("observable must be a PauliSum or DenseHermitian")
    if len(op) == 0:
        raise StructuralError("observable is the zero operator")
    return op


class _Tables:
    """Exact Hadamard readouts for every (k1, k2) and Pauli index n."""

    def __init__(self, psi0: StateVector, d: SpectralDecomposition, cfg: QmcConfig, observable=None):
        if psi0.dimension != d.dimension:
            raise DimensionMismatchError(
                f"state of dimension {psi0.dimension} against a {d.dimension}-dim spectrum"
            )
        k = cfg.k
        c = d.coefficients(psi0)
        j = np.arange(k + 1)
        phase = np.exp(-1j * np.outer(2 * j - k, (d.eigenvalues - cfg.e_s) * cfg.t))
        # row a: U^{2a - k} psi0
        self.w = (d.eigenvectors @ (phase * c).T).T
        # (-1)^{k1 + k2} for the sine branch, absorbed into each readout
        parity = (1 - 2 * ((j[:, None] + j[None, :]) & 1)) if cfg.subspace == 1 else np.ones((k + 1, k + 1))
        self.sign = parity.astype(float)
        # D[k1, k2] = <U^{2k2-k} psi0 | U^{2k1-k} psi0> = <psi0|U^{2(k1-k2)}|psi0>
        self.D = self.w.conj() @ self.w.T
        self.D = self.D.T
        self.pmf = binom.pmf(j, k, 0.5)
        if observable is not None:
            op = _as_pauli_sum(observable)
            if op.dimension != d.dimension:
                raise DimensionMismatchError("observable and Hamiltonian dimensions differ")
            coef = op.coefficients()
            self.one_norm = float(np.abs(coef).sum())
            self.p = np.abs(coef) / self.one_norm
            self.csign = np.sign(coef)
            # N[n, k1, k2] = <sigma_n U^{2k1-k} psi0 | U^{2k2-k} psi0>
            tabs = []
            for term in op.terms:
                sw = apply_pauli_string(term.string, self.w.T).T
                tabs.append(sw.conj() @ self.w.T)
            self.N = np.array(tabs)


def _draw_block(tables: _Tables, cfg: QmcConfig, branch: str, block: int, start: int, count: int):
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(_BRANCH_ID[branch], block))
    rng = np.random.Generator(np.random.PCG64(ss))
    k1 = rng.binomial(cfg.k, 0.5, size=count)
    k2 = rng.binomial(cfg.k, 0.5, size=count)
    idx = np.arange(start, start + count)
    is_y = (idx & 1).astype(bool)
    if branch == "D":
        n = np.full(count, -1)
        z = tables.D[k1, k2]
    else:
        n = rng.choice(tables.p.shape[0], size=count, p=tables.p)
        z = tables.N[n, k1, k2]
    raw = np.where(is_y, z.imag, z.real)
    if cfg.shot_mode == "single_shot":
        u = rng.random(count)
        raw = np.where(u < 0.5 * (1 + raw), 1.0, -1.0)
    return idx, n, k1, k2, is_y, raw


def _blocks(total: int):
    out = []
    for b, start in enumerate(range(0, total, BLOCK_SIZE)):
        out.append((b, start, min(BLOCK_SIZE, total - start)))
    return out


def _sample(tables, cfg, branch, total, workers):
    jobs = _blocks(total)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _draw_block(tables, cfg, branch, *a), jobs))
    else:
        parts = [_draw_block(tables, cfg, branch, *a) for a in jobs]
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def _mean_se(x):
    if x.shape[0] == 0:
        return 0.0, 0.0
    if x.shape[0] == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.shape[0]))


def _estimate(values_re, values_im, count):
    mr, sr = _mean_se(values_re)
    mi, si = _mean_se(values_im)
    return ComplexEstimate(complex(mr, mi), math.hypot(sr, si), count, sr, si)


def _trace_rows(branch, idx, n, k1, k2, is_y, raw):
    for i in range(idx.shape[0]):
        yield (int(idx[i]), branch, "" if n[i] < 0 else int(n[i]), int(k1[i]), int(k2[i]),
               "Y" if is_y[i] else "X", float(raw[i]))


def _enumerated_D(tables: _Tables) -> complex:
    w = np.outer(tables.pmf, tables.pmf) * tables.sign
    return complex(np.sum(w * tables.D))


def _enumerated_N(tables: _Tables) -> complex:
    w = np.outer(tables.pmf, tables.pmf) * tables.sign
    per_n = np.einsum("nab,ab->n", tables.N.conj(), w)
    return complex(tables.one_norm * np.sum(tables.p * tables.csign * per_n))


def estimate_D(psi0: StateVector, d: SpectralDecomposition, cfg: QmcConfig, workers: int = 1,
               trace: list | None = None, _tables: _Tables | None = None) -> ComplexEstimate:
    """Denominator estimate; pass a list as ``trace`` to collect per-sample rows."""
    tables = _tables or _Tables(psi0, d, cfg)
    if cfg.enumerate:
        n_terms = (cfg.k + 1) ** 2
        return ComplexEstimate(_enumerated_D(tables), 0.0, n_terms)
    idx, n, k1, k2, is_y, raw = _sample(tables, cfg, "D", cfg.n_D, workers)
    val = raw * tables.sign[k1, k2]
    if trace is not None:
        trace.extend(_trace_rows("D", idx, n, k1, k2, is_y, raw))
    return _estimate(val[~is_y], val[is_y], cfg.n_D)


def estimate_N(psi0: StateVector, d: SpectralDecomposition, observable, cfg: QmcConfig, workers: int = 1,
               trace: list | None = None, _tables: _Tables | None = None) -> ComplexEstimate:
    """Numerator estimate; every sample lies in [-||O||_1, ||O||_1]."""
    tables = _tables or _Tables(psi0, d, cfg, observable)
    if cfg.enumerate:
        n_terms = tables.p.shape[0] * (cfg.k + 1) ** 2
        return ComplexEstimate(_enumerated_N(tables), 0.0, n_terms)
    idx, n, k1, k2, is_y, raw = _sample(tables, cfg, "N", cfg.n_N, workers)
    scale = tables.one_norm * tables.csign[n] * tables.sign[k1, k2]
    if trace is not None:
        trace.extend(_trace_rows("N", idx, n, k1, k2, is_y, raw))
    # N sample is ||O||_1 sign(c_n) (<X> - i<Y>)
    return _estimate(scale[~is_y] * raw[~is_y], -scale[is_y] * raw[is_y], cfg.n_N)


def ratio_estimate(N: ComplexEstimate, D: ComplexEstimate) -> tuple[float, float]:
    """Re(N/D) with a first-order propagated standard error."""
    if abs(D.value) == 0 or abs(D.value) <= 3 * D.standard_error:
        raise UnstableRatioError(
            f"denominator {D.value:.3e} is within 3 standard errors ({D.standard_error:.3e}) of zero"
        )
    r = N.value / D.value
    dd = D.value
    mod4 = abs(dd) ** 4
    w = N.value / dd ** 2
    var = ((dd.real * N.standard_error_re) ** 2 + (dd.imag * N.standard_error_im) ** 2) / mod4
    var += (w.real * D.standard_error_re) ** 2 + (w.imag * D.standard_error_im) ** 2
    return float(r.real), float(math.sqrt(var))


def estimate_observable(psi0: StateVector, d: SpectralDecomposition, observable, cfg: QmcConfig,
                        workers: int = 1, trace: list | None = None) -> ObservableEstimate:
    tables = _Tables(psi0, d, cfg, observable)
    D = estimate_D(psi0, d, cfg, workers, trace, _tables=tables)
    N = estimate_N(psi0, d, observable, cfg, workers, trace, _tables=tables)
    value, se = ratio_estimate(N, D)
    return ObservableEstimate(value, se, D, N)


def filtered_state(psi0: StateVector, d: SpectralDecomposition, k: int, e_s: float, t: float,
                   subspace: int = 0) -> np.ndarray:
    """Unnormalized cos^k (or (-i sin)^k) applied to psi0, the statevector oracle."""
    theta = (d.eigenvalues - e_s) * t
    m = np.cos(theta) ** k if subspace == 0 else (-1j * np.sin(theta)) ** k
    return d.synthesize(m * d.coefficients(psi0))


def exact_D(psi0, d, k, e_s, t, subspace=0) -> float:
    v = filtered_state(psi0, d, k, e_s, t, subspace)
    return float(np.vdot(v, v).real)


def exact_N(psi0, d, observable, k, e_s, t, subspace=0) -> complex:
    v = filtered_state(psi0, d, k, e_s, t, subspace)
    return complex(np.vdot(v, observable.apply(v)))


QMC_TRACE_FIELDS = ("sample_index", "branch", "n", "k1", "k2", "basis", "raw_value")


def qmc_trace_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(QMC_TRACE_FIELDS)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


@dataclass(frozen=True)
class SampleBudget:
    """Sample counts and the precisions they buy.

    ``n_D``/``n_N`` are totals over both readout bases.
    """

    n_D: int
    n_N: int
    K: float
    delta: float
    epsilon_D: float
    epsilon_N: float

    def __post_init__(self):
        if self.n_D < 2 * self.K / self.epsilon_D ** 2 * (1 - 1e-12):
            raise ValueError("n_D below the Hoeffding requirement 2K/epsilon_D^2")


def bound_parameter(delta: float) -> float:
    """K = 2 ln(8/delta), from delta = 8 exp(-K/2)."""
    if not 0 < delta:
        raise ValueError("delta must be positive")
    return 2 * math.log(8 / delta)


def required_samples(epsilon: float, delta: float, o_one_norm: float, a_s: float, lambda_s: float,
                     c: float, q: float) -> SampleBudget:
    """Asymptotic sample orders with their implied Hoeffding precisions.

    ``n_D ~ K (||O||_1 + 1)^2 / (a_s^4 epsilon^{4cq})`` and
    ``n_N ~ K ||O||_1^2 / (a_s^4 epsilon^{4cq})``; ``lambda_s`` is the per-step
    multiplier normalized to at most 1 and must lie in ``(2^-q, 1)``.  The
    returned precisions invert ``n >= 2K/epsilon_D^2`` and
    ``n >= 2K ||O||_1^2/epsilon_N^2``.
    """
    for name, v in (("epsilon", epsilon), ("delta", delta), ("o_one_norm", o_one_norm),
                    ("a_s", a_s), ("lambda_s", lambda_s), ("c", c), ("q", q)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    if not 2.0 ** (-q) < lambda_s < 1:
        raise ValueError("lambda_s must lie in (2^-q, 1)")
    K = bound_parameter(delta)
    denom = a_s ** 4 * epsilon ** (4 * c * q)
    n_D = math.ceil(K * (o_one_norm + 1) ** 2 / denom)
    n_N = math.ceil(K * o_one_norm ** 2 / denom)
    eps_D = math.sqrt(2 * K / n_D)
    eps_N = o_one_norm * math.sqrt(2 * K / n_N)
    return SampleBudget(n_D, n_N, K, delta, eps_D, eps_N)


def lambda_form_samples(epsilon: float, delta: float, o_one_norm: float, a_s: float,
                        lambda_s: float, c: float) -> tuple[int, int]:
    """The same orders written with ``lambda_s^{4k}``, ``k = c log2(1/epsilon)``."""
    K = bound_parameter(delta)
    k = c * math.log2(1 / epsilon)
    denom = a_s ** 4 * lambda_s ** (4 * k)
    return math.ceil(K * (o_one_norm + 1) ** 2 / denom), math.ceil(K * o_one_norm ** 2 / denom)


def hoeffding_budget(epsilon: float, delta: float, o_one_norm: float, d_lower: float) -> SampleBudget:
    """Pre-asymptotic budget that makes ``|Re(N/D) - <O>| <= epsilon`` w.p. >= 1 - delta.

    ``d_lower`` is a lower bound on D, e.g. ``a_s^2 cos^{2k}((E_s - e_s)t)``.
    With ``|D-bar - D| <= eps_D`` and ``|N-bar - N| <= eps_N`` the ratio error is
    at most ``((||O||_1 + 1) eps_D + eps_N) / (D - eps_D)``; choosing
    ``eps_N = (||O||_1 + 1) eps_D`` and ``eps_D = epsilon d_lower / (2(||O||_1+1) + epsilon)``
    makes that exactly ``epsilon``.  Each complex modulus is covered by
    bounding both parts to ``eps/sqrt(2)``, with ``2K/(eps/sqrt(2))^2`` samples
    per basis; four parts failing with probability ``2 exp(-K)`` each stay
    below ``delta`` for ``K = 2 ln(8/delta)``.
    """
    if not (epsilon > 0 and 0 < delta < 1 and o_one_norm > 0 and d_lower > 0):
        raise ValueError("need epsilon > 0, 0 < delta < 1, o_one_norm > 0, d_lower > 0")
    K = bound_parameter(delta)
    eps_D = epsilon * d_lower / (2 * (o_one_norm + 1) + epsilon)
    eps_N = (o_one_norm + 1) * eps_D
    per_basis_D = math.ceil(2 * K / (eps_D / math.sqrt(2)) ** 2)
    per_basis_N = math.ceil(2 * K * o_one_norm ** 2 / (eps_N / math.sqrt(2)) ** 2)
    return SampleBudget(2 * per_basis_D, 2 * per_basis_N, K, delta, eps_D, eps_N)
