"""Command line entry point: ``tsqes run|validate|emit-plot-data``."""
from __future__ import annotations

import argparse
import json
import os
import sys

from ..errors import SpecError
from .runner import emit_plot_data, run, validate
from .spec import load_spec

SEED_ENV = "TSQES_SEED"
WORKERS_ENV = "TSQES_WORKERS"


def _env_int(name: str):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise SpecError(name, f"environment value {raw!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsqes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute every sweep point of a spec")
    p_run.add_argument("spec", help="YAML experiment spec")
    p_run.add_argument("--seed", type=int, default=None, help=f"override the spec seed (env {SEED_ENV})")
    p_run.add_argument("--workers", type=int, default=None, help=f"parallel points (env {WORKERS_ENV})")
    p_run.add_argument("--out", default=None, help="output directory, overrides the spec")

    p_val = sub.add_parser("validate", help="report constraint, k_bound and QMC budgets without running")
    p_val.add_argument("spec")
    p_val.add_argument("--seed", type=int, default=None)
    p_val.add_argument("--out", default=None)

    p_emit = sub.add_parser("emit-plot-data", help="long-format x,series,y CSVs from a manifest")
    p_emit.add_argument("manifest")
    p_emit.add_argument("--out", default=None, help="directory for the plot CSVs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "emit-plot-data":
            for path in emit_plot_data(args.manifest, args.out):
                print(path)
            return 0
        seed = args.seed if args.seed is not None else _env_int(SEED_ENV)
        spec = load_spec(args.spec, seed=seed, output=args.out)
        if args.command == "validate":
            ok = True
            for entry in validate(spec):
                print(json.dumps(entry, sort_keys=True, default=str))
                if entry.get("warning"):
                    print(f"warning: point {entry['point']}: {entry['warning']}", file=sys.stderr)
                if entry.get("error"):
                    ok = False
                    print(f"error: point {entry['point']}: {entry['error']}", file=sys.stderr)
            return 0 if ok else 1
        workers = args.workers if args.workers is not None else _env_int(WORKERS_ENV)
        manifest = run(spec, workers=max(1, workers or 1))
        print(f"{manifest.output_dir}/manifest.json")
        print(json.dumps(manifest.analysis, sort_keys=True, default=str))
        if manifest.failed:
            print(f"warning: {manifest.failed} point(s) failed; see summary.csv", file=sys.stderr)
        return 0
    except SpecError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
