"""Declarative experiment specs, the sweep runner and the ``tsqes`` CLI."""
from __future__ import annotations

from .runner import RunManifest, emit_plot_data, run, validate
from .spec import ExperimentSpec, load_spec, parse_spec

__all__ = ["ExperimentSpec", "RunManifest", "emit_plot_data", "load_spec", "parse_spec", "run", "validate"]
