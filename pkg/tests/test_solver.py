from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import H2_E_S, H2_SPECTRUM, H2_T
from oracles import energy_trace, filtered, random_hermitian, random_state
from tsqes.errors import ConstraintViolationError, DegenerateRatioError, DestructiveInterferenceError
from tsqes.operators import DenseHermitian, one_norm
from tsqes.solver import (
    ConstraintWarning,
    SolverConfig,
    bandwidth,
    check_time_constraint,
    convergence_parameters,
    energy_magnitude,
    iteration_free_multipliers,
    iteration_free_register,
    predict_k,
    run_iteration_free,
    run_iterative,
    summary_record,
    trace_to_csv,
)
from tsqes.statevector import StateVector, decompose


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(e_s=0, t=0)
    with pytest.raises(ValueError):
        SolverConfig(e_s=0, t=1, subspace=2)
    with pytest.raises(ValueError):
        SolverConfig(e_s=0, t=1, k_max=0)
    with pytest.raises(ValueError):
        SolverConfig(e_s=0, t=1, constraint_mode="maybe")
    with pytest.raises(ValueError):
        SolverConfig(e_s=float("nan"), t=1)


def test_check_time_constraint():
    assert check_time_constraint((-1, 1), 0, math.pi / 2)
    assert not check_time_constraint((-1, 1), 0, math.pi / 2 + 1e-9)
    with pytest.raises(ValueError):
        check_time_constraint((1, -1), 0, 1)


def test_eigenstate_input_is_fixed_point(h2):
    d = decompose(h2)
    res = run_iterative(h2, d.eigenstate(2), SolverConfig(H2_E_S, H2_T, k_max=5))
    assert res.converged and res.iterations == 1
    assert res.final_energy == pytest.approx(H2_SPECTRUM[2], abs=1e-12)


@pytest.mark.parametrize("subspace,target", [(0, H2_SPECTRUM[0]), (1, H2_SPECTRUM[3])])
def test_h2_converges(h2, h2_psi0, subspace, target):
    res = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, subspace=subspace, k_max=30))
    assert abs(res.final_energy - target) <= 2e-3
    assert res.diagnostics.target_matches_intended and res.diagnostics.constraint_satisfied


@pytest.mark.parametrize("subspace", [0, 1])
def test_trace_matches_expm_oracle(subspace, rng):
    m = random_hermitian(8, rng)
    psi = random_state(8, rng)
    lo, hi = np.linalg.eigvalsh(m)[[0, -1]]
    t = 0.9 * math.pi / 2 / max(abs(lo), abs(hi))
    res = run_iterative(DenseHermitian(m), StateVector(psi),
                        SolverConfig(0.0, t, subspace, k_max=12, energy_tolerance=1e-300))
    ref = energy_trace(m, psi, 0.0, t, 12, subspace)
    np.testing.assert_allclose(res.energies, ref, atol=1e-10)
    unnorm = filtered(m, psi, 0.0, t, 12, subspace)
    assert res.trace[-1].log_norm == pytest.approx(math.log(np.linalg.norm(unnorm)), abs=1e-9)
    assert res.cumulative_success_probability == pytest.approx(np.linalg.norm(unnorm) ** 2, rel=1e-8)


def test_trace_csv_and_summary(h2, h2_psi0):
    res = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, k_max=3, energy_tolerance=1e-300))
    lines = trace_to_csv(res).splitlines()
    assert lines[0] == "k,energy,log_norm,step_success_probability"
    assert len(lines) == 5 and lines[1].startswith("0,")
    rec = summary_record(res)
    assert rec["iterations"] == 3 and rec["converged"] is False


def test_constraint_modes(h2, h2_psi0):
    bad = SolverConfig(H2_E_S, math.pi, k_max=5, constraint_mode="enforce")
    with pytest.raises(ConstraintViolationError, match="eigenvalue"):
        run_iterative(h2, h2_psi0, bad)
    with pytest.warns(ConstraintWarning):
        run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, math.pi, k_max=5))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, math.pi, k_max=5, constraint_mode="off"))
    assert not res.diagnostics.constraint_satisfied


def test_redirect_diagnosed():
    # phases beyond pi/2 let a far level dominate the cosine branch
    op = DenseHermitian(np.diag([0.0, 0.3, 2.25]))
    res = run_iterative(op, StateVector.uniform(3),
                        SolverConfig(0.25, math.pi, k_max=2000, constraint_mode="off"))
    diag = res.diagnostics
    assert not diag.target_matches_intended
    assert diag.target_energy == pytest.approx(2.25) and diag.intended_energy == pytest.approx(0.3)
    assert res.final_energy == pytest.approx(2.25, abs=1e-6)
    assert any("favours" in m for m in diag.messages)


def test_degenerate_tie_flag():
    op = DenseHermitian(np.diag([-1.0, 0.0, 1.0]))
    res = run_iterative(op, StateVector.from_amplitudes([1, 0.1, 1]),
                        SolverConfig(0.0, 0.5, subspace=1, k_max=50, constraint_mode="off"))
    assert res.diagnostics.degenerate_target
    assert abs(res.final_energy) <= 1e-12


def test_vanishing_iterate():
    op = DenseHermitian(np.diag([0.0, 1.0]))
    with pytest.raises(DestructiveInterferenceError):
        run_iterative(op, StateVector.basis(2, 0), SolverConfig(0.0, 0.7, subspace=1))


def test_unnormalized_input_rejected(h2):
    with pytest.raises(ValueError):
        run_iterative(h2, StateVector(np.array([1, 1, 0, 0], dtype=complex)), SolverConfig(0, 1))


def test_bandwidth_helper(h2, h2_psi0):
    cfg = dict(k_max=400, energy_tolerance=1e-15)
    g = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, 0, **cfg))
    top = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, 1, **cfg))
    bw = bandwidth(g, top)
    assert float(bw) == pytest.approx(H2_SPECTRUM[3] - H2_SPECTRUM[0], abs=1e-6)


@pytest.mark.parametrize("k", [1, 2, 5, 9])
@pytest.mark.parametrize("sign", [1, -1])
def test_iteration_free_multipliers_closed_form(k, sign):
    theta = np.linspace(-1.5, 1.5, 11)
    ref = np.cos(theta) ** k if sign == 1 else (1j * np.sin(theta)) ** k
    np.testing.assert_allclose(iteration_free_multipliers(theta, k, sign), ref, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_iteration_free_register_oracle(k, rng):
    m = random_hermitian(4, rng)
    psi = random_state(4, rng)
    zero, one = iteration_free_register(m, psi, 0.1, 0.6, k)
    res = run_iteration_free(DenseHermitian(m), StateVector(psi), 0.1, 0.6, k)
    assert np.linalg.norm(zero) ** 2 == pytest.approx(res.p0, abs=1e-12)
    assert np.linalg.norm(one) ** 2 == pytest.approx(res.p1, abs=1e-12)
    assert abs(abs(np.vdot(zero / np.linalg.norm(zero), res.state0.amplitudes)) - 1) <= 1e-10


def test_iteration_free_k1_complement(rng):
    m = random_hermitian(8, rng)
    res = run_iteration_free(DenseHermitian(m), StateVector(random_state(8, rng)), 0.3, 0.7, 1)
    assert res.p0 + res.p1 == pytest.approx(1.0, abs=1e-12)


def test_iteration_free_zero_branch():
    op = DenseHermitian(np.diag([0.0, 1.0]))
    res = run_iteration_free(op, StateVector.basis(2, 0), 0.0, 0.5, 2)
    assert res.p1 == 0 and res.state1.norm() == 0
    with pytest.raises(ValueError):
        run_iteration_free(op, StateVector.basis(2, 0), 0.0, 0.5, 0)


def test_predict_k_values():
    p = predict_k(1e-6, 1.0, 1.0, 1.0, 0.5)
    # ceil(log(1e6) / (2 log 2))
    assert p.k_bound == 10
    assert p.error_upper_bound <= 1e-6
    with pytest.raises(DegenerateRatioError):
        predict_k(1e-6, 0.5, 1.0, 0.7, 0.7)
    with pytest.raises(ValueError):
        predict_k(1e-6, 0.5, 1.0, 0.3, 0.7)
    assert predict_k(1e-6, 1.0, 1.0, 1.0, 0.0).k_bound == 1


@given(st.floats(1e-9, 1e-1), st.floats(0.05, 1.0), st.floats(0.1, 0.99))
def test_predict_k_monotone(eps, a_s, ratio):
    p = predict_k(eps, a_s, 2.0, 1.0, ratio)
    q = predict_k(eps / 10, a_s, 2.0, 1.0, ratio)
    assert q.k_bound >= p.k_bound
    assert p.error_upper_bound <= eps * (1 + 1e-9)
    assert 0 < p.overlap_lower_bound <= 1


def test_convergence_parameters_h2(h2, h2_psi0):
    d = decompose(h2)
    cp = convergence_parameters(d, h2_psi0, H2_E_S, H2_T, 0)
    assert cp.target_energy == pytest.approx(H2_SPECTRUM[0])
    assert cp.lambda_s == pytest.approx(abs(math.cos((H2_SPECTRUM[0] - H2_E_S) * H2_T)))
    assert cp.lambda_t == pytest.approx(abs(math.cos((H2_SPECTRUM[1] - H2_E_S) * H2_T)))
    # [DERIVED] overlap of (1,2,1,1)/sqrt(7) with the stand-in ground state
    assert cp.a_s ** 2 == pytest.approx(0.64629216, abs=1e-8)


def test_energy_magnitude(h2):
    d = decompose(h2)
    assert energy_magnitude(d.eigenstate(0), h2) == pytest.approx(abs(H2_SPECTRUM[0]))
    psi = StateVector.uniform(4)
    m = h2.to_matrix()
    assert energy_magnitude(psi, h2) == pytest.approx(math.sqrt(np.vdot(psi.amplitudes, m @ m @ psi.amplitudes).real))


def test_bounds_hold_along_trace(rng):
    m = random_hermitian(8, rng)
    op = DenseHermitian(m)
    d = decompose(op)
    psi = StateVector(random_state(8, rng))
    e = d.eigenvalues
    es = float(e[3] + 0.01)
    t = 0.95 * math.pi / 2 / max(abs(e[0] - es), abs(e[-1] - es))
    cp = convergence_parameters(d, psi, es, t, 0)
    res = run_iterative(op, psi, SolverConfig(es, t, k_max=60, energy_tolerance=1e-300))
    norm1 = one_norm(op)
    for rec in res.trace:
        b = predict_k(1e-6, cp.a_s, norm1, cp.lambda_s, cp.lambda_t, k=rec.k)
        assert abs(rec.energy - cp.target_energy) <= b.error_upper_bound * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("interval,e_s,t,expected", [
    ((-1.0458, -0.1878), -1.1, 1.3518, True),
    ((-1.0, 1.0), 0.0, 2.0, False),
])
def test_check_time_constraint_examples(interval, e_s, t, expected):
    assert check_time_constraint(interval, e_s, t) is expected


def test_predict_k_examples():
    assert predict_k(2.0 / 0.25, 0.5, 2.0, 1.0, 0.5).k_bound == 0
    # ceil(log(1000) / (2 log 2))
    assert predict_k(1e-3, 1.0, 1.0, 1.0, 0.5).k_bound == 5


def test_fixed_point_step_probabilities(h2):
    d = decompose(h2)
    res = run_iterative(h2, d.eigenstate(1), SolverConfig(H2_SPECTRUM[1], H2_T, k_max=5))
    assert all(r.step_success_probability == pytest.approx(1.0, abs=1e-12) for r in res.trace)


def test_iteration_free_h2_k3(h2, h2_psi0):
    free = run_iteration_free(h2, h2_psi0, H2_E_S, H2_T, 3)
    it = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, 0, k_max=3, energy_tolerance=1e-300))
    assert free.state0.fidelity(it.final_state) >= 1 - 1e-10


def test_iteration_free_pure_sine_branch():
    op = DenseHermitian(np.diag([0.0, 1.0]))
    res = run_iteration_free(op, StateVector.basis(2, 1), 0.0, math.pi / 2, 1)
    assert res.p0 == pytest.approx(0.0, abs=1e-15) and res.p1 == pytest.approx(1.0)


def test_energy_magnitude_symmetric_pair():
    op = DenseHermitian(np.diag([-0.7, 0.7, 2.0]))
    psi = StateVector.from_amplitudes([1, 1, 0])
    assert abs(np.vdot(psi.amplitudes, op.apply(psi.amplitudes)).real) <= 1e-15
    assert energy_magnitude(psi, op) == pytest.approx(0.7)


def test_bandwidth_identical_is_zero(h2, h2_psi0):
    r = run_iterative(h2, h2_psi0, SolverConfig(H2_E_S, H2_T, k_max=5))
    assert float(bandwidth(r, r)) == 0.0


@pytest.mark.parametrize("subspace", [0, 1])
def test_geometric_contraction(subspace, rng):
    m = random_hermitian(8, rng)
    op = DenseHermitian(m)
    d = decompose(op)
    psi = StateVector(random_state(8, rng))
    t = 0.8 * math.pi / 2 / np.max(np.abs(d.eigenvalues))
    res = run_iterative(op, psi, SolverConfig(0.0, t, subspace, k_max=6, energy_tolerance=1e-300))
    mult = np.abs(np.cos(d.eigenvalues * t) if subspace == 0 else np.sin(d.eigenvalues * t))
    s = int(np.argmax(mult))
    c0 = np.abs(d.coefficients(psi))
    ck = np.abs(d.coefficients(res.final_state))
    expected = (c0 / c0[s]) * (mult / mult[s]) ** 6
    np.testing.assert_allclose(ck / ck[s], expected, atol=1e-10)


def test_success_probability_product(rng):
    m = random_hermitian(8, rng)
    op = DenseHermitian(m)
    psi = StateVector(random_state(8, rng))
    res = run_iterative(op, psi, SolverConfig(0.1, 0.3, 0, k_max=25, energy_tolerance=1e-300))
    steps = np.array([r.step_success_probability for r in res.trace])
    cumulative = np.cumprod(steps)
    assert np.all(np.diff(cumulative) <= 0)
    assert cumulative[-1] == pytest.approx(res.cumulative_success_probability, rel=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=6, unique=True), st.floats(0.05, 0.95),
       st.floats(0.05, 0.95))
def test_time_speedup_property(levels, frac_a, frac_b):
    levels = sorted(levels)
    if min(np.diff(levels)) < 1e-3:
        return
    e_s = levels[0] - 0.1
    d = decompose(DenseHermitian(np.diag(levels)))
    psi = StateVector.uniform(len(levels))
    tmax = math.pi / 2 / max(abs(levels[0] - e_s), abs(levels[-1] - e_s))
    t1, t2 = sorted((frac_a * tmax, frac_b * tmax))
    if t2 - t1 < 1e-9:
        return
    a = convergence_parameters(d, psi, e_s, t1, 0)
    b = convergence_parameters(d, psi, e_s, t2, 0)
    assert a.target_energy == b.target_energy
    assert b.lambda_t / b.lambda_s <= a.lambda_t / a.lambda_s + 1e-12
    ka = predict_k(1e-6, a.a_s, 1.0, a.lambda_s, a.lambda_t).k_bound
    kb = predict_k(1e-6, b.a_s, 1.0, b.lambda_s, b.lambda_t).k_bound
    assert kb <= ka
