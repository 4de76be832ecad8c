"""Experiment spec documents: parsing, validation and sweep expansion.

A spec is a YAML mapping::

    scenario: bandwidth          # see SCENARIOS
    seed: 7
    output: out/fig2a            # output directory, relative to the spec file
    model: {kind: h2}
    initial_state: {kind: amplitudes, values: [1, 2, 1, 1]}
    solver: {e_s: -1.1, t: 1.3518, k_max: 30}
    qmc: {k_values: [1, 2, 3], n_samples: 65536}
    sweep: {parameter: solver.e_s, values: [-1.1, 0.0]}
    series:
      - {parameter: solver.subspace, values: [0, 1]}
    options: {}

Numbers may be written as arithmetic in ``pi`` (``"pi/5"``, ``"2*pi"``).
Sweep and series parameters are dotted paths into the document; every
combination of one sweep value and one value per series axis is a point.
"""
from __future__ import annotations

import ast
import copy
import hashlib
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import SpecError

SCENARIOS = (
    "bandwidth",
    "spectrum_sweep",
    "attractor_sweep",
    "time_study",
    "kane_mele_bands",
    "ssh_gap_scan",
    "qmc_vs_lcu",
    "flat_band",
)
MODEL_KINDS = ("h2", "synthetic", "pauli_file", "dense_file", "kane_mele", "ssh_hubbard")
STATE_KINDS = ("uniform_plus", "basis", "amplitudes", "eigenstate_of", "random")

_COMPATIBLE = {
    "kane_mele_bands": ("kane_mele",),
    "ssh_gap_scan": ("ssh_hubbard",),
}

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow}


def parse_number(value, where: str = "value") -> float:
    """A float from a number or a small arithmetic expression in ``pi``."""
    if isinstance(value, bool):
        raise SpecError(where, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise SpecError(where, f"expected a number, got {type(value).__name__}")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError

    try:
        return float(ev(ast.parse(value.strip(), mode="eval")))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise SpecError(where, f"cannot evaluate {value!r}") from None


def get_path(doc: dict, path: str):
    cur = doc
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def set_path(doc: dict, path: str, value) -> None:
    parts = path.split(".")
    cur = doc
    for part in parts[:-1]:
        nxt = cur.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[part] = nxt
        cur = nxt
    cur[parts[-1]] = value


@dataclass(frozen=True)
class Axis:
    parameter: str
    values: tuple

    @property
    def label(self) -> str:
        return self.parameter.rsplit(".", 1)[-1]


def _axis_values(raw: dict, where: str) -> tuple:
    if "values" in raw:
        vals = raw["values"]
        if not isinstance(vals, list):
            raise SpecError(f"{where}.values", "must be a list")
        out = []
        for i, v in enumerate(vals):
            if isinstance(v, bool):
                raise SpecError(f"{where}.values[{i}]", "booleans are not sweep values")
            if not isinstance(v, str):
                out.append(v)
            else:
                # expressions such as "pi/4" become numbers; other strings (paths) stay
                try:
                    out.append(parse_number(v, f"{where}.values[{i}]"))
                except SpecError:
                    out.append(v)
        return tuple(out)
    if "start" in raw and "stop" in raw:
        start = parse_number(raw["start"], f"{where}.start")
        stop = parse_number(raw["stop"], f"{where}.stop")
        if "num" in raw:
            num = int(raw["num"])
            if num < 1:
                raise SpecError(f"{where}.num", "must be >= 1")
            vals = np.linspace(start, stop, num, endpoint=bool(raw.get("endpoint", True)))
        elif "step" in raw:
            step = parse_number(raw["step"], f"{where}.step")
            if step == 0 or (stop - start) / step < 0:
                raise SpecError(f"{where}.step", "step must move from start towards stop")
            n = int(round((stop - start) / step)) + 1
            vals = start + step * np.arange(n)
        else:
            raise SpecError(where, "a range needs 'num' or 'step'")
        return tuple(round(float(v), 12) for v in vals)
    raise SpecError(where, "needs 'values' or 'start'/'stop'")


def _axis(raw, where: str) -> Axis:
    if not isinstance(raw, dict):
        raise SpecError(where, "must be a mapping with 'parameter'")
    param = raw.get("parameter")
    if not isinstance(param, str) or not param:
        raise SpecError(f"{where}.parameter", "must be a dotted path such as 'solver.e_s'")
    vals = _axis_values(raw, where)
    if not vals:
        raise SpecError(f"{where}.values", "grid is empty")
    return Axis(param, vals)


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    model: dict
    solver: dict
    output: str
    seed: int = 0
    initial_state: dict = field(default_factory=lambda: {"kind": "uniform_plus"})
    qmc: dict = field(default_factory=dict)
    sweep: Axis | None = None
    series: tuple[Axis, ...] = ()
    options: dict = field(default_factory=dict)
    base_dir: str = "."
    raw: dict = field(default_factory=dict, repr=False)

    def points(self) -> list[dict]:
        """Resolved documents, sweep-major then series in declaration order."""
        axes = ([self.sweep] if self.sweep else []) + list(self.series)
        grids = [a.values for a in axes]
        out = []
        for combo in (np.ndindex(*[len(g) for g in grids]) if grids else [()]):
            doc = copy.deepcopy(self.raw)
            coords = {}
            for axis, i in zip(axes, combo):
                set_path(doc, axis.parameter, axis.values[i])
                coords[axis.parameter] = axis.values[i]
            out.append({"doc": doc, "coords": coords})
        return out

    def digest(self) -> str:
        """Hash of the experiment content; the output location is not part of it."""
        content = {k: v for k, v in self.raw.items() if k != "output"}
        blob = json.dumps(content, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _require_mapping(doc, key, required=True):
    v = doc.get(key)
    if v is None:
        if required:
            raise SpecError(key, "missing")
        return {}
    if not isinstance(v, dict):
        raise SpecError(key, "must be a mapping")
    return v


def parse_spec(doc, base_dir=".", seed=None, output=None) -> ExperimentSpec:
    """Validate a spec document; ``seed`` and ``output`` override the document."""
    if not isinstance(doc, dict):
        raise SpecError("<root>", "spec must be a mapping")
    doc = copy.deepcopy(doc)
    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        raise SpecError("scenario", f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    model = _require_mapping(doc, "model")
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        raise SpecError("model.kind", f"unknown model {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
    allowed = _COMPATIBLE.get(scenario)
    if allowed and kind not in allowed:
        raise SpecError("model.kind", f"scenario {scenario} requires model kind {' or '.join(allowed)}")
    if scenario == "qmc_vs_lcu" and kind in ("kane_mele", "ssh_hubbard"):
        raise SpecError("model.kind", "qmc_vs_lcu needs a qubit-register model (h2, synthetic or a file)")
    solver = _require_mapping(doc, "solver")
    state = _require_mapping(doc, "initial_state", required=False) or {"kind": "uniform_plus"}
    if state.get("kind") not in STATE_KINDS:
        raise SpecError("initial_state.kind", f"expected one of {', '.join(STATE_KINDS)}")
    qmc = _require_mapping(doc, "qmc", required=scenario == "qmc_vs_lcu")
    options = _require_mapping(doc, "options", required=False)

    if seed is not None:
        doc["seed"] = int(seed)
    try:
        seed_val = int(doc.get("seed", 0))
    except (TypeError, ValueError):
        raise SpecError("seed", "must be an integer") from None
    if seed_val < 0 or seed_val >= 2 ** 64:
        raise SpecError("seed", "must fit in an unsigned 64-bit integer")
    if output is not None:
        doc["output"] = str(output)
    out = doc.get("output")
    if not isinstance(out, str) or not out:
        raise SpecError("output", "missing output path")

    sweep = _axis(doc["sweep"], "sweep") if doc.get("sweep") is not None else None
    raw_series = doc.get("series") or []
    if isinstance(raw_series, dict):
        raw_series = [raw_series]
    series = tuple(_axis(s, f"series[{i}]") for i, s in enumerate(raw_series))

    spec = ExperimentSpec(
        scenario=scenario, model=model, solver=solver, output=out, seed=seed_val,
        initial_state=state, qmc=qmc, sweep=sweep, series=series, options=options,
        base_dir=str(base_dir), raw=doc,
    )
    _check_numbers(spec)
    return spec


def _check_numbers(spec: ExperimentSpec) -> None:
    # catch bad scalars before any point runs
    for key in ("e_s", "t", "k_max", "energy_tolerance"):
        v = spec.solver.get(key)
        if v is None or isinstance(v, list) or v == "auto":
            continue
        x = parse_number(v, f"solver.{key}")
        if key == "t" and x == 0:
            raise SpecError("solver.t", "must be nonzero")
        if key == "k_max" and (x < 1 or x != int(x)):
            raise SpecError("solver.k_max", "must be a positive integer")
        if key == "energy_tolerance" and x <= 0:
            raise SpecError("solver.energy_tolerance", "must be positive")
    mode = spec.solver.get("constraint_mode", "warn")
    if mode not in ("enforce", "warn", "off"):
        raise SpecError("solver.constraint_mode", "expected enforce, warn or off")
    sub = spec.solver.get("subspace", 0)
    if sub not in (0, 1):
        raise SpecError("solver.subspace", "must be 0 or 1")


def load_spec(path, seed=None, output=None) -> ExperimentSpec:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise SpecError("<yaml>", str(exc)) from None
    return parse_spec(doc, base_dir=path.parent, seed=seed, output=output)
