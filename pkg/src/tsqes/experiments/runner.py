"""Sweep execution, manifests, plot-data emission and pre-run validation.

Output layout under the spec's ``output`` directory::

    points/point_0000.csv   one per successful point, grid order
    summary.csv             one row per point, failed points included
    manifest.json           hash, seed, timestamps, file list, analysis
    plot/<name>.csv         long-format (x, series, y), from emit-plot-data
"""
from __future__ import annotations

import csv
import io
import json
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .. import __version__
from ..errors import SpecError, TsqesError
from .scenarios import POINT_RUNNERS, PointContext, analyze, check_point, plot_series
from .spec import ExperimentSpec, parse_spec

MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.csv"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (list, dict, tuple)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def write_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> None:
    if columns is None:
        columns = []
        for r in rows:
            for key in r:
                if key not in columns:
                    columns.append(key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in columns])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), newline="")


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    else:
        out[prefix] = obj


def config_columns(doc: dict) -> dict:
    """The resolved configuration of a point as ``section.key`` columns."""
    out: dict = {}
    for section in ("model", "initial_state", "solver", "qmc", "options"):
        if doc.get(section):
            _flatten(section, doc[section], out)
    return out


@dataclass
class RunManifest:
    spec_hash: str
    seed: int
    scenario: str
    version: str
    started: str
    finished: str
    output_dir: str
    files: list[str]
    points: list[dict]
    analysis: dict = field(default_factory=dict)
    spec: dict = field(default_factory=dict)
    base_dir: str = "."

    @property
    def failed(self) -> int:
        return sum(p["status"] != "ok" for p in self.points)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)

    @classmethod
    def load(cls, path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_point(spec: ExperimentSpec, point: dict, index: int, out_dir: Path) -> dict:
    """Run one point; failures are captured in the returned record, never raised."""
    ctx = PointContext(spec, point["doc"], point["coords"], index)
    record = {"point": index, "coords": point["coords"], "status": "ok", "error": ""}
    try:
        rows, summary = POINT_RUNNERS[spec.scenario](ctx)
    except (TsqesError, ValueError, ArithmeticError, FileNotFoundError) as exc:
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return record
    except Exception as exc:  # keep the sweep alive; keep the traceback for the summary
        tb = traceback.format_exception_only(type(exc), exc)[-1].strip()
        record.update(status="failed", error=tb)
        return record
    name = f"points/point_{index:04d}.csv"
    write_csv(out_dir / name, rows)
    record.update(file=name, summary=summary)
    return record


def run(spec: ExperimentSpec, workers: int = 1) -> RunManifest:
    """Execute every point of ``spec`` and write outputs; returns the manifest."""
    out_dir = Path(spec.output)
    if not out_dir.is_absolute():
        out_dir = Path(spec.base_dir) / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _now()
    points = spec.points()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda ip: run_point(spec, ip[1], ip[0], out_dir), enumerate(points)))
    else:
        records = [run_point(spec, p, i, out_dir) for i, p in enumerate(points)]

    summaries = []
    for rec, pt in zip(records, points):
        row = {"point": rec["point"], "status": rec["status"], "error": rec["error"]}
        row.update(rec.get("summary", {}))
        row.update(config_columns(pt["doc"]))
        summaries.append(row)
    write_csv(out_dir / SUMMARY_NAME, summaries)

    analysis = analyze(spec, [dict(s, coords=r["coords"]) for s, r in zip(summaries, records)])
    files = [r["file"] for r in records if "file" in r] + [SUMMARY_NAME]
    manifest = RunManifest(
        spec_hash=spec.digest(), seed=spec.seed, scenario=spec.scenario, version=__version__,
        started=started, finished=_now(), output_dir=str(out_dir), files=files,
        points=[{"point": r["point"], "coords": r["coords"], "status": r["status"],
                 "file": r.get("file"), "error": r["error"]} for r in records],
        analysis=analysis, spec=spec.raw, base_dir=spec.base_dir,
    )
    (out_dir / MANIFEST_NAME).write_text(manifest.to_json() + "\n")
    return manifest


def emit_plot_data(manifest_path, out_dir=None) -> list[Path]:
    """Long-format ``x,series,y`` CSVs for a completed run."""
    manifest_path = Path(manifest_path)
    m = RunManifest.load(manifest_path)
    run_dir = Path(m.output_dir)
    if not run_dir.is_absolute() or not run_dir.exists():
        run_dir = manifest_path.parent
    missing = [f for f in m.files if not (run_dir / f).exists()]
    if missing:
        raise FileNotFoundError(f"manifest lists missing files: {', '.join(missing)}")
    spec = parse_spec(m.spec, base_dir=m.base_dir)
    summaries = read_csv(run_dir / SUMMARY_NAME)
    by_point = {p["point"]: p for p in m.points}
    for s in summaries:
        s["coords"] = by_point[int(s["point"])]["coords"]
        s["file"] = by_point[int(s["point"])]["file"]

    def load_rows(summary):
        return read_csv(run_dir / summary["file"])

    tables = plot_series(spec, summaries, load_rows)
    target = Path(out_dir) if out_dir else run_dir / "plot"
    written = []
    for stem, rows in sorted(tables.items()):
        path = target / f"{stem}.csv"
        write_csv(path, [dict(x=x, series=s, y=y) for x, s, y in rows], ["x", "series", "y"])
        written.append(path)
    return written


def validate(spec: ExperimentSpec) -> list[dict]:
    """Per-point diagnostics without running the solver."""
    out = []
    for i, point in enumerate(spec.points()):
        ctx = PointContext(spec, point["doc"], point["coords"], i)
        entry = {"point": i, "coords": point["coords"]}
        try:
            entry.update(check_point(ctx))
        except SpecError as exc:
            entry["error"] = str(exc)
        except (TsqesError, ValueError, ArithmeticError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        out.append(entry)
    return out
