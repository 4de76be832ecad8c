"""Per-point scenario bodies, cross-point analysis and plot-data layout.

A scenario maps one resolved point to ``(rows, summary)``: ``rows`` become
the point's CSV and ``summary`` one row of the summary CSV.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DegenerateRatioError, SpecError, UnstableRatioError
from ..operators import spectral_interval
from ..qmc import QmcConfig, estimate_observable, hoeffding_budget
from ..solver import (
    SolverConfig,
    check_time_constraint,
    convergence_parameters,
    energy_magnitude,
    predict_k,
    run_iterative,
)
from ..statevector import SpectralDecomposition, StateVector, decompose, multipliers
from .build import BuiltModel, auto_time, build_initial_state, build_model, ssh_params
from .spec import ExperimentSpec, parse_number

SUPPORT_WEIGHT = 1e-20


@dataclass
class PointContext:
    spec: ExperimentSpec
    doc: dict
    coords: dict
    index: int
    _model: BuiltModel | None = field(default=None, repr=False)
    _decomposition: SpectralDecomposition | None = field(default=None, repr=False)

    @property
    def model(self) -> BuiltModel:
        if self._model is None:
            self._model = build_model(self.doc["model"], self.spec.base_dir)
        return self._model

    @property
    def operator(self):
        return self.model.operator

    @property
    def decomposition(self) -> SpectralDecomposition:
        if self._decomposition is None:
            self._decomposition = decompose(self.operator)
        return self._decomposition

    def initial_state(self) -> StateVector:
        return build_initial_state(self.doc.get("initial_state") or {}, self.operator.dimension,
                                   self.spec.seed, self.spec.base_dir)

    def option(self, key, default):
        v = (self.doc.get("options") or {}).get(key, default)
        return parse_number(v, f"options.{key}") if isinstance(v, (int, float, str)) and not isinstance(v, bool) else v

    def point_seed(self, *extra: int) -> int:
        ss = np.random.SeedSequence([self.spec.seed, self.index, *extra])
        return int(ss.generate_state(1, np.uint64)[0])

    def solver_config(self, **overrides) -> SolverConfig:
        s = dict(self.doc["solver"])
        s.update(overrides)
        if "e_s" not in s:
            raise SpecError("solver.e_s", "missing")
        e_s = parse_number(s["e_s"], "solver.e_s")
        t = s.get("t", "auto")
        if t == "auto":
            d = self.decomposition
            t = auto_time((d.eigenvalues[0], d.eigenvalues[-1]), e_s,
                          parse_number(s.get("t_safety", 0.95), "solver.t_safety"))
        else:
            t = parse_number(t, "solver.t")
        return SolverConfig(
            e_s=e_s, t=t,
            subspace=int(s.get("subspace", 0)),
            k_max=int(parse_number(s.get("k_max", 1000), "solver.k_max")),
            energy_tolerance=parse_number(s.get("energy_tolerance", 1e-10), "solver.energy_tolerance"),
            constraint_mode=s.get("constraint_mode", "warn"),
        )


def _run(ctx: PointContext, psi0: StateVector, cfg: SolverConfig, messages: list):
    # warnings filters are process-global and unsafe across worker threads; in
    # warn mode the violation is recorded from the diagnostics instead
    quiet = replace(cfg, constraint_mode="off") if cfg.constraint_mode == "warn" else cfg
    result = run_iterative(ctx.operator, psi0, quiet, decomposition=ctx.decomposition)
    for m in result.diagnostics.messages:
        if m not in messages:
            messages.append(m)
    return result


def _trace_rows(result, **extra) -> list[dict]:
    return [dict(extra, k=r.k, energy=r.energy, log_norm=r.log_norm,
                 step_success_probability=r.step_success_probability) for r in result.trace]


def _support_levels(d: SpectralDecomposition, psi0: StateVector) -> np.ndarray:
    w = np.abs(d.coefficients(psi0)) ** 2
    return d.eigenvalues[w > SUPPORT_WEIGHT]


def _overlaps(d: SpectralDecomposition, psi0: StateVector) -> str:
    if d.dimension > 16:
        return ""
    return json.dumps([round(float(x), 10) for x in np.abs(d.coefficients(psi0)) ** 2])


def _oracle_targets(levels: np.ndarray, e_s: float) -> tuple[float, float]:
    dist = np.abs(levels - e_s)
    return float(levels[np.argmin(dist)]), float(levels[np.argmax(dist)])


def _contraction(d, psi0, cfg) -> float:
    p = convergence_parameters(d, psi0, cfg.e_s, cfg.t, cfg.subspace)
    return p.lambda_t / p.lambda_s if p.lambda_s > 0 else float("nan")


def _run_summary(result, cfg: SolverConfig, messages) -> dict:
    dg = result.diagnostics
    return {
        "e_s": cfg.e_s, "t": cfg.t, "subspace": cfg.subspace,
        "final_energy": result.final_energy,
        "converged": result.converged,
        "iterations": result.iterations,
        "cumulative_success_probability": result.cumulative_success_probability,
        "target_energy": dg.target_energy,
        "intended_energy": dg.intended_energy,
        "target_matches_intended": dg.target_matches_intended,
        "degenerate_target": dg.degenerate_target,
        "constraint_satisfied": dg.constraint_satisfied,
        "messages": " | ".join(messages),
    }


# ---------------------------------------------------------------- scenarios

def bandwidth_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    d = ctx.decomposition
    rows, msgs, res = [], [], {}
    for sub in (0, 1):
        cfg = ctx.solver_config(subspace=sub)
        res[sub] = _run(ctx, psi0, cfg, msgs)
        rows += _trace_rows(res[sub], subspace=sub)
    e0, e1 = res[0].final_energy, res[1].final_energy
    levels = _support_levels(d, psi0)
    summary = {
        "e_s": cfg.e_s, "t": cfg.t,
        "energy_subspace0": e0, "energy_subspace1": e1,
        "iterations_subspace0": res[0].iterations, "iterations_subspace1": res[1].iterations,
        "ground": min(e0, e1), "top": max(e0, e1), "bandwidth": abs(e1 - e0),
        "converged": res[0].converged and res[1].converged,
        "oracle_ground": float(levels.min()), "oracle_top": float(levels.max()),
        "oracle_bandwidth": float(levels.max() - levels.min()),
        "overlaps": _overlaps(d, psi0),
        "messages": " | ".join(msgs),
    }
    return rows, summary


def spectrum_sweep_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    cfg = ctx.solver_config()
    msgs: list = []
    result = _run(ctx, psi0, cfg, msgs)
    near, far = _oracle_targets(_support_levels(ctx.decomposition, psi0), cfg.e_s)
    summary = _run_summary(result, cfg, msgs)
    summary.update(oracle_nearest=near, oracle_farthest=far, overlaps=_overlaps(ctx.decomposition, psi0))
    return _trace_rows(result), summary


def attractor_sweep_point(ctx: PointContext):
    rows, summary = spectrum_sweep_point(ctx)
    cfg = ctx.solver_config()
    expected = summary["oracle_nearest"] if cfg.subspace == 0 else summary["oracle_farthest"]
    ratio = _contraction(ctx.decomposition, ctx.initial_state(), cfg)
    tol = ctx.option("tolerance", 1e-6)
    cutoff = ctx.option("ratio_cutoff", 0.999)
    err = abs(summary["final_energy"] - expected)
    summary.update(expected_energy=expected, error=err, contraction_ratio=ratio,
                   excluded=bool(ratio >= cutoff), within_tolerance=bool(err <= tol))
    return rows, summary


def time_study_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    cfg = ctx.solver_config()
    msgs: list = []
    result = _run(ctx, psi0, cfg, msgs)
    eps = ctx.option("epsilon", 1e-6)
    d = ctx.decomposition
    p = convergence_parameters(d, psi0, cfg.e_s, cfg.t, cfg.subspace)
    hit = next((r.k for r in result.trace if abs(r.energy - p.target_energy) <= eps), None)
    try:
        k_bound = predict_k(eps, p.a_s, ctx.operator.one_norm(), p.lambda_s, p.lambda_t).k_bound
    except DegenerateRatioError:
        k_bound = None
    summary = _run_summary(result, cfg, msgs)
    summary.update(epsilon=eps, iterations_to_tolerance=hit, k_bound=k_bound,
                   contraction_ratio=p.lambda_t / p.lambda_s, a_s=p.a_s)
    return _trace_rows(result), summary


def kane_mele_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    cfg = ctx.solver_config()
    msgs: list = []
    result = _run(ctx, psi0, cfg, msgs)
    d = ctx.decomposition
    near, _ = _oracle_targets(_support_levels(d, psi0), cfg.e_s)
    p = ctx.model.info["params"]
    summary = {
        "momentum": p.k, "M": p.M, "e_s": cfg.e_s, "t": cfg.t,
        "final_energy": result.final_energy, "oracle_nearest": near,
        "error": abs(result.final_energy - near),
        "oracle_min_abs_energy": float(np.min(np.abs(d.eigenvalues))),
        "converged": result.converged, "iterations": result.iterations,
        "messages": " | ".join(msgs),
    }
    return _trace_rows(result), summary


def ssh_pair(ctx: PointContext):
    """Solver ground and first excited energies from U = 0 eigenstates."""
    d = ctx.decomposition
    free = build_model(dict(ctx.doc["model"], U=0), ctx.spec.base_dir).operator
    d0 = decompose(free)
    w0 = d0.eigenvalues
    # lowest index of the first excited U = 0 level
    first = int(np.flatnonzero(w0 > w0[0] + 1e-9)[0])
    rows, out, msgs = [], {}, []
    for label, idx in (("ground", 0), ("excited", first)):
        cfg = ctx.solver_config(e_s=float(w0[idx]))
        r = _run(ctx, d0.eigenstate(idx), cfg, msgs)
        rows += _trace_rows(r, state=label)
        out[label] = (r, cfg)
    return rows, out, msgs, d


def ssh_gap_point(ctx: PointContext):
    rows, out, msgs, d = ssh_pair(ctx)
    p = ssh_params(ctx.doc["model"])
    (rg, cg), (rx, cx) = out["ground"], out["excited"]
    w = d.eigenvalues
    summary = {
        "delta_t": parse_number(ctx.doc["model"].get("delta_t", (p.t2 - p.t1) / 2), "model.delta_t"), "t1": p.t1, "t2": p.t2, "U": p.U,
        "E0": rg.final_energy, "E1": rx.final_energy, "gap": rx.final_energy - rg.final_energy,
        "oracle_E0": float(w[0]), "oracle_E1": float(w[1]), "oracle_gap": float(w[1] - w[0]),
        "error_E0": abs(rg.final_energy - w[0]), "error_E1": abs(rx.final_energy - w[1]),
        "e_s_ground": cg.e_s, "e_s_excited": cx.e_s, "t_ground": cg.t, "t_excited": cx.t,
        "iterations_E0": rg.iterations, "iterations_E1": rx.iterations,
        "converged": rg.converged and rx.converged,
        "messages": " | ".join(msgs),
    }
    return rows, summary


def _sample_counts(q: dict) -> tuple[int, int]:
    if "n_D" in q or "n_N" in q:
        return int(parse_number(q.get("n_D", 1 << 15))), int(parse_number(q.get("n_N", 1 << 15)))
    total = int(parse_number(q.get("n_samples", 1 << 16), "qmc.n_samples"))
    if total < 2:
        raise SpecError("qmc.n_samples", "need at least two samples")
    return total - total // 2, total // 2


def qmc_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    q = ctx.doc.get("qmc") or {}
    ks = q.get("k_values")
    if ks is None:
        ks = list(range(int(parse_number(q.get("k_max", 6), "qmc.k_max")) + 1))
    ks = [int(parse_number(k, "qmc.k_values")) for k in ks]
    cfg = ctx.solver_config(k_max=max(1, max(ks)), energy_tolerance=1e-300)
    msgs: list = []
    lcu = _run(ctx, psi0, cfg, msgs)
    n_D, n_N = _sample_counts(q)
    rows = []
    for k in ks:
        qc = QmcConfig(k=k, e_s=cfg.e_s, t=cfg.t, n_D=n_D, n_N=n_N, seed=ctx.point_seed(k),
                       shot_mode=q.get("shot_mode", "exact_expectation"), subspace=cfg.subspace,
                       enumerate=bool(q.get("enumerate", False)))
        ref = lcu.trace[min(k, len(lcu.trace) - 1)].energy
        try:
            est = estimate_observable(psi0, ctx.decomposition, ctx.operator, qc)
            val, se = est.value, est.standard_error
        except UnstableRatioError as exc:
            val, se = float("nan"), float("nan")
            msgs.append(f"k={k}: {exc}")
        rows.append({"k": k, "qmc_value": val, "qmc_standard_error": se, "lcu_energy": ref,
                     "abs_error": abs(val - ref), "n_D": n_D, "n_N": n_N})
    last = rows[-1]
    summary = {
        "e_s": cfg.e_s, "t": cfg.t, "subspace": cfg.subspace, "k": last["k"],
        "qmc_value": last["qmc_value"], "qmc_standard_error": last["qmc_standard_error"],
        "lcu_energy": last["lcu_energy"], "abs_error": last["abs_error"],
        "max_abs_error": max(r["abs_error"] for r in rows),
        "n_D": n_D, "n_N": n_N, "shot_mode": q.get("shot_mode", "exact_expectation"),
        "messages": " | ".join(msgs),
    }
    return rows, summary


def magnitude_trace(d: SpectralDecomposition, psi0: StateVector, cfg: SolverConfig, steps: int) -> list[float]:
    """sqrt(<H^2>) of the normalized iterate for k = 0..steps."""
    c = d.coefficients(psi0)
    c = c / np.linalg.norm(c)
    e2 = d.eigenvalues ** 2
    mult = multipliers(d, cfg.e_s, cfg.t, cfg.subspace)
    out = [math.sqrt(float(np.dot(np.abs(c) ** 2, e2)))]
    for _ in range(steps):
        c = mult * c
        c /= np.linalg.norm(c)
        out.append(math.sqrt(float(np.dot(np.abs(c) ** 2, e2))))
    return out


def flat_band_point(ctx: PointContext):
    psi0 = ctx.initial_state()
    s = ctx.doc["solver"]
    cfg = ctx.solver_config(e_s=s.get("e_s", 0.0))
    msgs: list = []
    result = _run(ctx, psi0, cfg, msgs)
    mags = magnitude_trace(ctx.decomposition, psi0, cfg, result.iterations)
    rows = [dict(r, magnitude=m) for r, m in zip(_trace_rows(result), mags)]
    near, _ = _oracle_targets(_support_levels(ctx.decomposition, psi0), cfg.e_s)
    summary = _run_summary(result, cfg, msgs)
    summary.update(final_magnitude=energy_magnitude(result.final_state, ctx.operator),
                   oracle_nearest_magnitude=abs(near))
    return rows, summary


POINT_RUNNERS = {
    "bandwidth": bandwidth_point,
    "spectrum_sweep": spectrum_sweep_point,
    "attractor_sweep": attractor_sweep_point,
    "time_study": time_study_point,
    "kane_mele_bands": kane_mele_point,
    "ssh_gap_scan": ssh_gap_point,
    "qmc_vs_lcu": qmc_point,
    "flat_band": flat_band_point,
}


# ---------------------------------------------------------------- analysis

def _ok(rows):
    return [r for r in rows if r.get("status") == "ok"]


def _non_increasing(seq) -> bool:
    return all(b <= a for a, b in zip(seq, seq[1:]))


def analyze(spec: ExperimentSpec, summaries: list[dict]) -> dict:
    """Cross-point findings recorded in the manifest."""
    ok = _ok(summaries)
    out: dict = {"points": len(summaries), "failed": len(summaries) - len(ok)}
    if spec.scenario == "attractor_sweep":
        used = [r for r in ok if not r["excluded"]]
        out.update(excluded=[r["e_s"] for r in ok if r["excluded"]],
                   within_tolerance=sum(r["within_tolerance"] for r in used),
                   evaluated=len(used), max_error=max((r["error"] for r in used), default=None))
    elif spec.scenario == "time_study":
        rows = sorted(ok, key=lambda r: r["t"])
        measured = [r["iterations_to_tolerance"] for r in rows]
        predicted = [r["k_bound"] for r in rows]
        out.update(
            measured_non_increasing=None not in measured and _non_increasing(measured),
            predicted_non_increasing=None not in predicted and _non_increasing(predicted),
            redirected=[r["t"] for r in rows if not r["target_matches_intended"]],
        )
    elif spec.scenario == "ssh_gap_scan":
        rows = sorted(ok, key=lambda r: r["delta_t"])
        gaps = [r["gap"] for r in rows]
        out.update(gap_non_increasing=_non_increasing(gaps),
                   final_gap=gaps[-1] if gaps else None,
                   max_error=max((max(r["error_E0"], r["error_E1"]) for r in rows), default=None))
    elif spec.scenario == "kane_mele_bands":
        out["by_M"] = _kane_mele_analysis(ok, spec.options)
    elif spec.scenario == "bandwidth" and ok:
        out.update(bandwidth=[r["bandwidth"] for r in ok])
    return out


def _kane_mele_analysis(rows, options) -> dict:
    tol = parse_number(options.get("crossing_tolerance", 1e-2), "options.crossing_tolerance")
    res = {}
    for M in sorted({r["M"] for r in rows}):
        sel = [r for r in rows if r["M"] == M]
        by_k: dict = {}
        for r in sel:
            by_k.setdefault(r["momentum"], {})[r["e_s"]] = r["final_energy"]
        pairs = {k: v for k, v in by_k.items() if len(v) >= 2}
        moms = sorted(pairs)
        halfwidth = min(r["oracle_min_abs_energy"] for r in sel)
        entry = {
            "max_error": max(r["error"] for r in sel),
            "oracle_gap_halfwidth": halfwidth,
            "solver_min_abs_energy": min(abs(r["final_energy"]) for r in sel),
        }
        entry["in_gap_count"] = sum(abs(r["final_energy"]) < halfwidth - 1e-9 for r in sel)
        if moms:
            diffs = [max(pairs[k].values()) - min(pairs[k].values()) for k in moms]
            i = int(np.argmin(diffs))
            step = (moms[1] - moms[0]) if len(moms) > 1 else math.pi
            entry.update(min_band_separation=diffs[i], crossing_momentum=moms[i],
                         crossing_near_pi=bool(diffs[i] <= tol and abs(moms[i] - math.pi) <= 1.5 * step))
        res[str(M)] = entry
    return res


# ---------------------------------------------------------------- plot data

def _label(coords: dict, skip=()) -> str:
    return ", ".join(f"{p.rsplit('.', 1)[-1]}={v}" for p, v in coords.items() if p not in skip) or "all"


def plot_series(spec: ExperimentSpec, summaries: list[dict], load_rows) -> dict[str, list[tuple]]:
    """Long-format ``(x, series, y)`` tables keyed by file stem.

    ``load_rows(summary)`` returns the point's CSV rows as dicts of strings.
    """
    sweep = spec.sweep.parameter if spec.sweep else None
    ok = _ok(summaries)
    files: dict[str, list[tuple]] = {}

    def x_of(r):
        return r["coords"].get(sweep, r["point"]) if sweep else r["point"]

    def add(name, x, series, y):
        files.setdefault(name, []).append((x, series, y))

    for r in ok:
        label = _label(r["coords"])
        for row in load_rows(r):
            if spec.scenario == "qmc_vs_lcu":
                add("convergence", row["k"], f"{label} qmc", row["qmc_value"])
                add("convergence", row["k"], f"{label} qmc_stderr", row["qmc_standard_error"])
                add("convergence", row["k"], f"{label} lcu", row["lcu_energy"])
            elif spec.scenario == "flat_band":
                add("magnitude", row["k"], label, row["magnitude"])
            else:
                tag = row.get("subspace") or row.get("state")
                series = f"{label} subspace={tag}" if "subspace" in row else (
                    f"{label} {tag}" if tag else label)
                add("convergence", row["k"], series, row["energy"])

    for r in ok:
        x = x_of(r)
        lab = _label(r["coords"], skip=(sweep,))
        if spec.scenario == "bandwidth":
            for key in ("ground", "top", "bandwidth"):
                add("summary", x, f"{lab} {key}", r[key])
        elif spec.scenario in ("spectrum_sweep", "attractor_sweep"):
            add("summary", x, f"{lab} energy", r["final_energy"])
            add("summary", x, f"{lab} oracle_nearest", r["oracle_nearest"])
            add("summary", x, f"{lab} oracle_farthest", r["oracle_farthest"])
        elif spec.scenario == "time_study":
            add("iterations", x, f"{lab} measured", r["iterations_to_tolerance"])
            add("iterations", x, f"{lab} predicted", r["k_bound"])
        elif spec.scenario == "kane_mele_bands":
            add("bands", r["momentum"], f"M={r['M']}, e_s={r['e_s']} solver", r["final_energy"])
            add("bands", r["momentum"], f"M={r['M']}, e_s={r['e_s']} oracle", r["oracle_nearest"])
        elif spec.scenario == "ssh_gap_scan":
            for key in ("E0", "E1", "gap", "oracle_E0", "oracle_E1", "oracle_gap"):
                add("gap", r["delta_t"], key, r[key])
        elif spec.scenario == "qmc_vs_lcu":
            add("summary", x, f"{lab} qmc", r["qmc_value"])
            add("summary", x, f"{lab} lcu", r["lcu_energy"])
        elif spec.scenario == "flat_band":
            add("summary", x, f"{lab} magnitude", r["final_magnitude"])
    return files


def check_point(ctx: PointContext) -> dict:
    """Pre-run diagnostics for one point: constraint, k_bound, QMC budget."""
    out: dict = {}
    op = ctx.operator
    d = ctx.decomposition if op.dense_available() else None
    s = ctx.doc["solver"]
    if ctx.spec.scenario == "ssh_gap_scan":
        free = decompose(build_model(dict(ctx.doc["model"], U=0), ctx.spec.base_dir).operator)
        e_s_list = [float(free.eigenvalues[0])]
        psi0 = free.eigenstate(0)
    else:
        e_s_list = s["e_s"] if isinstance(s.get("e_s"), list) else [s.get("e_s", 0.0)]
        psi0 = ctx.initial_state()
    cfg = ctx.solver_config(e_s=e_s_list[0])
    interval = (d.eigenvalues[0], d.eigenvalues[-1]) if d is not None else spectral_interval(op)
    ok = check_time_constraint(interval, cfg.e_s, cfg.t)
    out.update(e_s=cfg.e_s, t=cfg.t, constraint_satisfied=bool(ok))
    if not ok:
        worst = interval[0] if abs(interval[0] - cfg.e_s) >= abs(interval[1] - cfg.e_s) else interval[1]
        out["warning"] = (f"time constraint violated: |(E - e_s) t| = {abs((worst - cfg.e_s) * cfg.t):.6g} "
                          f"> pi/2 at eigenvalue E = {worst:.10g}")
    if d is None:
        return out
    eps = ctx.option("epsilon", 1e-6)
    subs = (0, 1) if ctx.spec.scenario == "bandwidth" else (cfg.subspace,)
    for sub in subs:
        p = convergence_parameters(d, psi0, cfg.e_s, cfg.t, sub)
        key = f"k_bound_subspace{sub}"
        try:
            out[key] = predict_k(eps, p.a_s, op.one_norm(), p.lambda_s, p.lambda_t).k_bound
        except DegenerateRatioError:
            out[key] = None
        out[f"target_energy_subspace{sub}"] = p.target_energy
    out["epsilon"] = eps
    if ctx.spec.scenario == "qmc_vs_lcu":
        q = ctx.doc.get("qmc") or {}
        ks = q.get("k_values") or [int(parse_number(q.get("k_max", 6)))]
        k = int(max(parse_number(x) for x in ks))
        p = convergence_parameters(d, psi0, cfg.e_s, cfg.t, cfg.subspace)
        lam = p.lambda_s
        d_lower = p.a_s ** 2 * lam ** (2 * k)
        b = hoeffding_budget(parse_number(q.get("epsilon", 0.05)), parse_number(q.get("delta", 0.1)),
                             op.one_norm(), d_lower)
        n_D, n_N = _sample_counts(q)
        out.update(qmc_k=k, qmc_budget_n_D=b.n_D, qmc_budget_n_N=b.n_N,
                   qmc_configured_n_D=n_D, qmc_configured_n_N=n_N)
    return out
