"""Iterative and iteration-free time-symmetric eigensolver.

One round applies ``(U_f + U_b)/2 = cos((H - e_s)t)`` (subspace 0) or
``(U_f - U_b)/2 = -i sin((H - e_s)t)`` (subspace 1) to the working register and
renormalizes.  Subspace 0 amplifies the eigencomponent whose eigenvalue is
closest to ``e_s``; subspace 1 the farthest, provided every phase
``(E_i - e_s)t`` lies in ``[-pi/2, pi/2]``.

Iteration runs in the eigenbasis of ``H``: the iterate is stored as its
eigen-coefficients, so a step costs O(dim) and energies are exact weighted
sums of eigenvalues.  Each step is the engine's interference step expressed
on coefficients.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import ConstraintViolationError, DegenerateRatioError, DestructiveInterferenceError
from .operators import DEFAULT_DENSE_QUBIT_CAP, HermitianOperator
from .statevector import (
    SpectralDecomposition,
    StateVector,
    UNDERFLOW_NORM,
    decompose,
    multipliers,
)

CONSTRAINT_MODES = ("enforce", "warn", "off")
SUPPORT_ATOL = 1e-10
LEVEL_ATOL = 1e-9
TIE_RTOL = 1e-9


class ConstraintWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    e_s: float
    t: float
    subspace: int = 0
    k_max: int = 1000
    energy_tolerance: float = 1e-10
    constraint_mode: str = "warn"

    def __post_init__(self):
        if not math.isfinite(self.e_s) or not math.isfinite(self.t):
            raise ValueError("e_s and t must be finite")
        if self.t == 0:
            raise ValueError("t must be nonzero")
        if self.subspace not in (0, 1):
            raise ValueError("subspace must be 0 or 1")
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError("k_max must be a positive integer")
        if not self.energy_tolerance > 0:
            raise ValueError("energy_tolerance must be positive")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise ValueError(f"constraint_mode must be one of {CONSTRAINT_MODES}")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    energy: float
    log_norm: float
    step_success_probability: float


@dataclass(frozen=True)
class Diagnostics:
    """Post-hoc check of which eigenvalue the interference actually favours.

    ``target_energy`` maximizes |multiplier| over the eigencomponents present in
    psi0; ``intended_energy`` is the nearest (subspace 0) or farthest
    (subspace 1) of those.
    """

    target_energy: float
    intended_energy: float
    target_matches_intended: bool
    degenerate_target: bool
    constraint_satisfied: bool
    messages: tuple[str, ...] = ()


@dataclass(frozen=True)
class SolverResult:
    trace: tuple[IterationRecord, ...]
    final_state: StateVector
    final_energy: float
    cumulative_success_probability: float
    converged: bool
    config: SolverConfig | None = None
    diagnostics: Diagnostics | None = None

    def __post_init__(self):
        if not self.trace:
            raise ValueError("trace must be nonempty")

    @property
    def iterations(self) -> int:
        return self.trace[-1].k

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.trace])


def check_time_constraint(interval, e_s: float, t: float) -> bool:
    lo, hi = interval
    if lo > hi:
        raise ValueError("interval must satisfy lo <= hi")
    return abs(t) * max(abs(lo - e_s), abs(hi - e_s)) <= math.pi / 2


def _support(coeffs: np.ndarray) -> np.ndarray:
    return np.abs(coeffs) > SUPPORT_ATOL


def _diagnose(d: SpectralDecomposition, coeffs, cfg: SolverConfig) -> Diagnostics:
    e = d.eigenvalues
    supp = _support(coeffs)
    mags = np.abs(multipliers(d, cfg.e_s, cfg.t, cfg.subspace))
    dist = np.abs(e - cfg.e_s)
    cand = np.flatnonzero(supp)
    best = cand[np.argmax(mags[cand])]
    tied = cand[np.isclose(mags[cand], mags[best], rtol=TIE_RTOL, atol=1e-14)]
    degenerate = bool(np.any(np.abs(e[tied] - e[best]) > LEVEL_ATOL))
    intended = cand[np.argmin(dist[cand])] if cfg.subspace == 0 else cand[np.argmax(dist[cand])]
    matches = abs(e[best] - e[intended]) <= LEVEL_ATOL
    ok = check_time_constraint((float(e[0]), float(e[-1])), cfg.e_s, cfg.t)
    msgs = []
    if not ok:
        worst = e[0] if abs(e[0] - cfg.e_s) >= abs(e[-1] - cfg.e_s) else e[-1]
        msgs.append(
            f"time constraint violated: |(E - e_s) t| = {abs((worst - cfg.e_s) * cfg.t):.6g} > pi/2 "
            f"at eigenvalue E = {worst:.10g}"
        )
    if degenerate:
        levels = sorted({round(float(x), 12) for x in e[tied]})
        msgs.append(f"|multiplier| tie between distinct eigenvalues {levels}; the iterate keeps their span")
    if not matches:
        which = "nearest" if cfg.subspace == 0 else "farthest"
        msgs.append(
            f"interference favours E = {e[best]:.10g}, not the {which} eigenvalue "
            f"E = {e[intended]:.10g} relative to e_s = {cfg.e_s:g}"
        )
    return Diagnostics(float(e[best]), float(e[intended]), bool(matches), degenerate, ok, tuple(msgs))


def _constraint_gate(d: SpectralDecomposition, cfg: SolverConfig, diag: Diagnostics):
    if cfg.constraint_mode == "off" or diag.constraint_satisfied:
        return
    msg = diag.messages[0]
    if cfg.constraint_mode == "enforce":
        raise ConstraintViolationError(msg)
    warnings.warn(msg, ConstraintWarning, stacklevel=3)


def run_iterative(op: HermitianOperator, psi0: StateVector, cfg: SolverConfig,
                  decomposition: SpectralDecomposition | None = None,
                  cap: int = DEFAULT_DENSE_QUBIT_CAP) -> SolverResult:
    """Iterate interference rounds until consecutive energies agree to tolerance.

    The trace starts with the ``k = 0`` record of psi0 itself.  Pass a
    precomputed ``decomposition`` of ``op`` to skip diagonalization.
    """
    d = decomposition if decomposition is not None else decompose(op, cap)
    coeffs = d.coefficients(psi0)
    nrm = float(np.linalg.norm(coeffs))
    if not math.isclose(nrm, 1.0, rel_tol=0, abs_tol=1e-8):
        raise ValueError(f"psi0 must be normalized (norm {nrm:.12g})")
    diag = _diagnose(d, coeffs, cfg)
    _constraint_gate(d, cfg, diag)

    e = d.eigenvalues
    mult = multipliers(d, cfg.e_s, cfg.t, cfg.subspace)
    c = coeffs / nrm
    log_norm = 0.0
    energy = float(np.dot(np.abs(c) ** 2, e))
    trace = [IterationRecord(0, energy, 0.0, 1.0)]
    converged = False
    for k in range(1, cfg.k_max + 1):
        c = mult * c
        step = float(np.linalg.norm(c))
        if not step > UNDERFLOW_NORM:
            raise DestructiveInterferenceError(
                "iterate vanished: the initial state has no weight on the surviving eigencomponents"
            )
        c /= step
        log_norm += math.log(step)
        new_energy = float(np.dot(np.abs(c) ** 2, e))
        trace.append(IterationRecord(k, new_energy, log_norm, min(1.0, step * step)))
        if abs(new_energy - energy) < cfg.energy_tolerance:
            converged = True
            break
        energy = new_energy
    final = StateVector(d.synthesize(c), log_norm)
    return SolverResult(
        trace=tuple(trace),
        final_state=final,
        final_energy=trace[-1].energy,
        cumulative_success_probability=math.exp(2 * log_norm),
        converged=converged,
        config=cfg,
        diagnostics=diag,
    )


@dataclass(frozen=True)
class IterationFreeResult:
    state0: StateVector
    p0: float
    state1: StateVector
    p1: float

    def __iter__(self):
        return iter((self.state0, self.p0, self.state1, self.p1))


def iteration_free_multipliers(theta, k: int, sign: int) -> np.ndarray:
    """Eigenvalue image of ``U_b^k ((1 + sign U_f^2)/2)^k`` by binomial expansion.

    With ``U_f = exp(-i theta)`` this equals ``cos(theta)^k`` for sign +1 and
    ``(i sin(theta))^k`` for sign -1.
    """
    theta = np.asarray(theta, dtype=float)
    acc = np.zeros(theta.shape, dtype=complex)
    for j in range(k + 1):
        acc += comb(k, j, exact=True) * sign ** j * np.exp(-2j * j * theta)
    return np.exp(1j * k * theta) * acc / 2 ** k


def _post_selected(d, coeffs, mult):
    out = mult * coeffs
    p = float(np.linalg.norm(out) ** 2)
    if p <= 0:
        return StateVector(np.zeros(d.dimension, dtype=complex), 0.0), 0.0
    amps = d.synthesize(out / math.sqrt(p))
    return StateVector(amps, 0.5 * math.log(p)), p


def run_iteration_free(op: HermitianOperator, psi0: StateVector, e_s: float, t: float, k: int,
                       decomposition: SpectralDecomposition | None = None,
                       cap: int = DEFAULT_DENSE_QUBIT_CAP) -> IterationFreeResult:
    """k-ancilla circuit post-selected on all-zero and all-one ancilla outcomes.

    A zero-probability branch is returned as a zero vector with ``p = 0``.
    """
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    if t == 0:
        raise ValueError("t must be nonzero")
    d = decomposition if decomposition is not None else decompose(op, cap)
    coeffs = d.coefficients(psi0)
    theta = (d.eigenvalues - e_s) * t
    s0, p0 = _post_selected(d, coeffs, iteration_free_multipliers(theta, k, +1))
    s1, p1 = _post_selected(d, coeffs, iteration_free_multipliers(theta, k, -1))
    return IterationFreeResult(s0, p0, s1, p1)


def iteration_free_register(matrix, psi0, e_s: float, t: float, k: int):
    """Literal (n + k)-qubit simulation of the iteration-free circuit.

    Ancillas start in |0>, get a Hadamard, each controls ``U_f^2`` on the work
    register, then a second Hadamard.  Post-selecting all ancillas on ``b``
    leaves ``((1 + (-1)^b U_f^2)/2)^k psi0``; the deterministic ``U_b^k`` is
    applied afterwards.  Returns unnormalized post-selected vectors for
    outcomes 0...0 and 1...1.  Only for small k; used as a cross-check.
    """
    from scipy.linalg import expm

    if k > 4:
        raise ValueError("register simulation is limited to k <= 4")
    h = np.asarray(matrix, dtype=complex)
    n = h.shape[0]
    shifted = h - e_s * np.eye(n)
    uf2 = expm(-2j * shifted * t)
    ub = expm(1j * shifted * t)
    had = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

    # register layout: ancillas (most significant) then work
    state = np.zeros(2 ** k * n, dtype=complex)
    state[:n] = np.asarray(psi0, dtype=complex)
    state = state.reshape((2,) * k + (n,))
    for a in range(k):
        state = np.moveaxis(np.tensordot(had, state, axes=([1], [a])), 0, a)
    for a in range(k):
        idx = [slice(None)] * k + [slice(None)]
        idx[a] = 1
        sub = state[tuple(idx)]
        state[tuple(idx)] = np.tensordot(sub, uf2, axes=([-1], [1]))
    for a in range(k):
        state = np.moveaxis(np.tensordot(had, state, axes=([1], [a])), 0, a)
    ubk = np.linalg.matrix_power(ub, k)
    zero = state[(0,) * k]
    one = state[(1,) * k]
    return ubk @ zero, ubk @ one


@dataclass(frozen=True)
class ConvergencePrediction:
    k_bound: int
    overlap_lower_bound: float
    error_upper_bound: float
    k: int = 0


def predict_k(epsilon: float, a_s: float, h_one_norm: float, lambda_s: float, lambda_t: float,
              k: int | None = None) -> ConvergencePrediction:
    """Iterations sufficient for energy error ``epsilon`` and the bounds at ``k``.

    ``k`` defaults to ``k_bound``.  ``lambda_s`` and ``lambda_t`` are the
    largest and second-largest |multiplier| over the eigencomponents present.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < a_s <= 1:
        raise ValueError("a_s must lie in (0, 1]")
    ls, lt = abs(lambda_s), abs(lambda_t)
    if math.isclose(ls, lt, rel_tol=1e-12, abs_tol=0.0):
        raise DegenerateRatioError("lambda_s equals lambda_t: no contraction, k is unbounded")
    if ls < lt:
        raise ValueError("need |lambda_s| > |lambda_t|")
    a2 = a_s * a_s
    scale = h_one_norm / a2
    if lt == 0:
        k_bound = 0 if epsilon >= scale else 1
        ratio = 0.0
    else:
        ratio = lt / ls
        k_bound = max(0, math.ceil(math.log(scale / epsilon) / (2 * math.log(ls / lt))))
    kk = k_bound if k is None else int(k)
    r2k = ratio ** (2 * kk) if kk > 0 else 1.0
    return ConvergencePrediction(
        k_bound=k_bound,
        overlap_lower_bound=a2 / (a2 + (1 - a2) * r2k),
        error_upper_bound=scale * r2k,
        k=kk,
    )


@dataclass(frozen=True)
class ConvergenceParameters:
    lambda_s: float
    lambda_t: float
    a_s: float
    target_energy: float


def convergence_parameters(d: SpectralDecomposition, psi0: StateVector, e_s: float, t: float,
                           subspace: int = 0) -> ConvergenceParameters:
    """Oracle lambda_s, lambda_t and a_s from the eigendecomposition.

    Degenerate eigenvalues are merged into one level; a_s is the norm of psi0's
    projection onto the target level.
    """
    coeffs = d.coefficients(psi0)
    e = d.eigenvalues
    mags = np.abs(multipliers(d, e_s, t, subspace))
    weights = np.abs(coeffs) ** 2
    levels: list[list[int]] = []
    for i in np.argsort(e, kind="stable"):
        if levels and abs(e[i] - e[levels[-1][0]]) <= LEVEL_ATOL:
            levels[-1].append(int(i))
        else:
            levels.append([int(i)])
    lv = [(float(mags[g[0]]), float(weights[g].sum()), float(e[g[0]])) for g in levels]
    lv = [x for x in lv if x[1] > SUPPORT_ATOL ** 2]
    lv.sort(key=lambda x: -x[0])
    ls, w, es = lv[0]
    lt = lv[1][0] if len(lv) > 1 else 0.0
    return ConvergenceParameters(ls, lt, math.sqrt(w), es)


def energy_magnitude(state: StateVector, op: HermitianOperator) -> float:
    """sqrt(<psi|H^2|psi>) = ||H psi||, insensitive to the sign of the energy."""
    hv = op.apply(state.amplitudes)
    return float(math.sqrt(max(0.0, np.vdot(hv, hv).real)))


@dataclass(frozen=True)
class Bandwidth:
    value: float
    converged: bool

    def __float__(self):
        return self.value


def bandwidth(ground: SolverResult, top: SolverResult) -> Bandwidth:
    """Top minus ground energy, flagged unconverged if either run was."""
    return Bandwidth(top.final_energy - ground.final_energy, ground.converged and top.converged)


TRACE_FIELDS = ("k", "energy", "log_norm", "step_success_probability")
SUMMARY_FIELDS = ("final_energy", "converged", "iterations", "cumulative_success_probability")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_to_csv(result: SolverResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for r in result.trace:
        w.writerow([_fmt(getattr(r, f)) for f in TRACE_FIELDS])
    return buf.getvalue()


def summary_record(result: SolverResult) -> dict:
    return {
        "final_energy": result.final_energy,
        "converged": result.converged,
        "iterations": result.iterations,
        "cumulative_success_probability": result.cumulative_success_probability,
    }
