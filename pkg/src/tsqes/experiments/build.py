"""Model and initial-state construction from spec mappings."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SpecError
from ..fileio import load_dense, load_pauli_sum
from ..models.fermions import (
    SSHHubbardParams,
    build_ssh_hubbard,
    number_sector_basis,
    restrict_to_sector,
)
from ..models.kane_mele import KaneMeleParams, build_kane_mele_ribbon
from ..models.molecular import H2_DEFAULT_MIXING, H2_R125_SPECTRUM, h2_standin, synth_spectrum
from ..operators import HermitianOperator
from ..statevector import StateVector, decompose
from .spec import parse_number


@dataclass
class BuiltModel:
    operator: HermitianOperator
    info: dict = field(default_factory=dict)


def _num(cfg: dict, key: str, default, where: str) -> float:
    return parse_number(cfg.get(key, default), f"{where}.{key}")


def _int(cfg: dict, key: str, default, where: str) -> int:
    v = _num(cfg, key, default, where)
    if v != int(v):
        raise SpecError(f"{where}.{key}", "must be an integer")
    return int(v)


def _path(cfg: dict, base_dir, where: str) -> Path:
    p = cfg.get("path")
    if not isinstance(p, str):
        raise SpecError(f"{where}.path", "missing file path")
    path = Path(p)
    return path if path.is_absolute() else Path(base_dir) / path


def _eigenvalues(cfg: dict, default, where: str) -> list[float]:
    vals = cfg.get("eigenvalues", default)
    if not isinstance(vals, (list, tuple)) or not vals:
        raise SpecError(f"{where}.eigenvalues", "must be a nonempty list")
    return [parse_number(v, f"{where}.eigenvalues[{i}]") for i, v in enumerate(vals)]


def ssh_params(cfg: dict, where: str = "model", U=None) -> SSHHubbardParams:
    if "delta_t" in cfg:
        dt = _num(cfg, "delta_t", 0, where)
        base = _num(cfg, "t0", 1.0, where)
        t1, t2 = base - dt, base + dt
    else:
        t1, t2 = _num(cfg, "t1", 1.0, where), _num(cfg, "t2", 1.0, where)
    n_sites = _int(cfg, "n_sites", 6, where)
    return SSHHubbardParams(
        t1=t1, t2=t2,
        U=_num(cfg, "U", 10.0, where) if U is None else U,
        n_sites=n_sites,
        n_electrons=_int(cfg, "n_electrons", n_sites, where),
    )


def build_model(cfg: dict, base_dir=".", where: str = "model") -> BuiltModel:
    """Operator for a ``model`` mapping; ``info`` carries derived metadata."""
    kind = cfg.get("kind")
    try:
        if kind == "h2":
            ev = _eigenvalues(cfg, list(H2_R125_SPECTRUM), where)
            mix = cfg.get("mixing", list(H2_DEFAULT_MIXING))
            mix = tuple(parse_number(m, f"{where}.mixing") for m in mix)
            return BuiltModel(h2_standin(ev, mix), {"eigenvalues": ev})
        if kind == "synthetic":
            ev = _eigenvalues(cfg, None, where)
            return BuiltModel(synth_spectrum(ev, _int(cfg, "seed", 0, where)), {"eigenvalues": ev})
        if kind == "pauli_file":
            return BuiltModel(load_pauli_sum(_path(cfg, base_dir, where)))
        if kind == "dense_file":
            return BuiltModel(load_dense(_path(cfg, base_dir, where)))
        if kind == "kane_mele":
            p = KaneMeleParams(
                t1=_num(cfg, "t1", 1.0, where), t2=_num(cfg, "t2", 0.03, where),
                t3=_num(cfg, "t3", 0.0, where), M=_num(cfg, "M", 0.0, where),
                n_cells=_int(cfg, "n_cells", 20, where), k=_num(cfg, "k", 0.0, where),
            )
            return BuiltModel(build_kane_mele_ribbon(p), {"params": p})
        if kind == "ssh_hubbard":
            p = ssh_params(cfg, where)
            op = build_ssh_hubbard(p)
            info = {"params": p}
            if cfg.get("sector", True):
                basis = number_sector_basis(p.mode_count, p.n_electrons)
                op = restrict_to_sector(op, basis)
                info["sector_basis"] = basis
            return BuiltModel(op, info)
    except FileNotFoundError as exc:
        raise SpecError(f"{where}.path", f"file not found: {exc.filename}") from None
    raise SpecError(f"{where}.kind", f"unknown model {kind!r}")


def build_initial_state(cfg: dict, dimension: int, seed: int, base_dir=".",
                        where: str = "initial_state") -> StateVector:
    kind = cfg.get("kind", "uniform_plus")
    if kind == "uniform_plus":
        return StateVector.uniform(dimension)
    if kind == "basis":
        idx = _int(cfg, "index", 0, where)
        if not 0 <= idx < dimension:
            raise SpecError(f"{where}.index", f"out of range for dimension {dimension}")
        return StateVector.basis(dimension, idx)
    if kind == "amplitudes":
        vals = cfg.get("values")
        if not isinstance(vals, list) or len(vals) != dimension:
            raise SpecError(f"{where}.values", f"need a list of {dimension} amplitudes")
        amps = []
        for i, v in enumerate(vals):
            if isinstance(v, list):
                if len(v) != 2:
                    raise SpecError(f"{where}.values[{i}]", "complex amplitudes are [re, im] pairs")
                amps.append(complex(parse_number(v[0]), parse_number(v[1])))
            else:
                amps.append(parse_number(v, f"{where}.values[{i}]"))
        return StateVector.from_amplitudes(amps)
    if kind == "random":
        rng = np.random.default_rng(_int(cfg, "seed", seed, where))
        return StateVector.from_amplitudes(rng.normal(size=dimension) + 1j * rng.normal(size=dimension))
    if kind == "eigenstate_of":
        if isinstance(cfg.get("model"), dict):
            src = build_model(cfg["model"], base_dir, f"{where}.model").operator
        elif isinstance(cfg.get("path"), str):
            src = build_model({"kind": cfg.get("format", "dense_file"), "path": cfg["path"]},
                              base_dir, where).operator
        else:
            raise SpecError(where, "eigenstate_of needs 'model' or 'path'")
        if src.dimension != dimension:
            raise SpecError(where, f"source dimension {src.dimension} differs from {dimension}")
        d = decompose(src)
        idx = _int(cfg, "index", 0, where)
        if not 0 <= idx < dimension:
            raise SpecError(f"{where}.index", "out of range")
        return d.eigenstate(idx)
    raise SpecError(f"{where}.kind", f"unknown initial state {kind!r}")


def auto_time(interval, e_s: float, safety: float = 0.95) -> float:
    """Largest ``t`` keeping ``|(E - e_s) t| <= safety * pi/2`` on ``interval``."""
    lo, hi = interval
    spread = max(abs(lo - e_s), abs(hi - e_s))
    if spread == 0:
        raise ValueError("spectrum collapses onto e_s; any t works")
    return safety * math.pi / 2 / spread
