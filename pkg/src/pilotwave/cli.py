"""Command-line entry point: ``pilotwave --preset NAME [options]``.

Exit codes: 0 success, 1 invalidated run (report still written), 2
configuration error, 3 I/O error.

Output directory contents:

* ``report.json``: the preset's reports; deterministic for a given config.
* ``manifest.json``: resolved configuration, package version, run status.
* ``*.csv`` tables (coverage, crossings, spectral, width sweep).
* ``trajectories.csv`` with ``--emit-trajectories``. Oscillator: header
  ``t,Q1,Q2``, one sample per line for the first member. Interferometer:
  ``member,t,x1,y1,x2,y2`` for the first 24 members, every 25th step.
  Pendulums: ``t,q1,q2,theta1,theta2``. Numbers carry 17 significant digits;
  a final ``# status=...`` comment line records the trajectory status.
* ``figures/*.png`` unless ``figures`` is false.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import PRESETS, build_config, help_epilog, load_file
from .errors import ConfigError, PilotWaveError

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows, trailer=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        if trailer:
            fh.write(f"# {trailer}\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def report_text(bundle):
    payload = {"version": __version__, "status": bundle.status, **bundle.report}
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def build_parser():
    p = argparse.ArgumentParser(
        prog="pilotwave",
        description="Bohmian trajectories, ergodicity checks and joint-detection experiments.",
        epilog=help_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--preset", choices=PRESETS, help="pipeline to run (default oscillator-nonergodic)")
    p.add_argument("--config", help="flat JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    p.add_argument("--members", type=int, help="ensemble size (preset default)")
    p.add_argument("--h", type=float, help="integrator step (preset default)")
    p.add_argument("--T", type=float, help="horizon (preset default)")
    p.add_argument("--delta0", type=float, help="x1 - x2 offset width (default 0)")
    p.add_argument("--sigma0", type=float, help="y1 + y2 offset width (default 0)")
    p.add_argument("--x0", type=float, help="detection plane abscissa (default 20)")
    p.add_argument("--d1", help="D1 interval 'lo,hi' (default 0.5,1.5)")
    p.add_argument("--d2", help="D2 interval 'lo,hi' (default 0.25,1.25)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--out", help="output directory (default pilotwave-out)")
    p.add_argument("--emit-trajectories", action="store_true", default=None, help="write trajectories.csv")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None, help="skip PNG figures")
    p.add_argument("--version", action="version", version=f"pilotwave {__version__}")
    return p


def parse_config(argv=None):
    """Parse flags (and the optional config file) into a resolved config dict."""
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    file_values = load_file(args.config) if args.config else {}
    return build_config(file_values, flags)


def run(cfg):
    """Run ``cfg`` and write the bundle; returns an exit code."""
    from .experiment import run_config

    bundle = run_config(cfg)
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_text(bundle))
    for name, (header, rows) in bundle.tables.items():
        write_csv(os.path.join(out, name), header, rows)
    if cfg["emit_trajectories"] and bundle.trajectories is not None:
        header, rows, status = bundle.trajectories
        write_csv(os.path.join(out, "trajectories.csv"), header, rows,
                  trailer=f"status={status}" if status else None)
    figures = []
    if cfg["figures"]:
        from .plotting import render

        figures = [os.path.relpath(p, out) for p in render(bundle, os.path.join(out, "figures"))]
    manifest = {"version": __version__, "status": bundle.status, "config": cfg,
                "files": sorted(["report.json", *bundle.tables,
                                 *(["trajectories.csv"] if cfg["emit_trajectories"] and bundle.trajectories else []),
                                 *figures])}
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2, default=_json_default) + "\n")
    return EXIT_OK if bundle.status == "ok" else EXIT_INVALID


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"pilotwave: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        # an unreadable config file is a configuration problem, named by path
        print(f"pilotwave: cannot read config {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except OSError as exc:
        print(f"pilotwave: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PilotWaveError as exc:
        print(f"pilotwave: run failed: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
