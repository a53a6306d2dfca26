"""Command-line front end.

    emla-sens run --config CONFIG --out DIR [--plots] [--parallel N]
                  [--format csv|json] [--dry-run]

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
divergence.  Outputs are staged and only moved into ``--out`` once the whole
run has succeeded.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .actuator import efficiency_map_grid
from .config import FORMATS, RunConfig, load_config
from .kinematics import DivergenceError, run_trajectory
from .metrics import PayloadFailure, PrecisionError, check_perturbation, payload_sweep
from .report import fmt as f17
from .report import write_outputs
from .robot import ConfigError, SingularTransmissionError
from .spatial import InertiaError, TransformError

logger = logging.getLogger("emla_sens")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2
LOG_LEVELS = {"debug": logging.DEBUG, "info": logging.INFO, "warn": logging.WARNING, "warning": logging.WARNING}
MAP_POINTS = 41

_CONFIG_ERRORS = (ConfigError, PrecisionError, TransformError, InertiaError)
_NUMERIC_ERRORS = (DivergenceError, SingularTransmissionError, FloatingPointError)


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("EMLA_SENS_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logger.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emla-sens", description="EMLA-driven manipulator payload sensitivity sweeps")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a payload sweep from a config file")
    r.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
    r.add_argument("--out", type=Path, default=None, help="output directory (default: output.dir in config)")
    r.add_argument("--plots", action="store_true", help="also write SVG figures")
    r.add_argument("--parallel", type=int, default=None, metavar="N", help="worker threads for the payload grid")
    r.add_argument("--format", choices=FORMATS, default=None, help="tabular output format (default csv)")
    r.add_argument("--dry-run", action="store_true", help="validate and print the plan without writing")
    return p


def _plan(cfg: RunConfig, out: Path, fmt: str, parallel: int, plots: bool) -> str:
    sw, tr = cfg.sweep, cfg.trajectory
    n_t = int(np.floor(tr.duration / sw.dt + 1e-9)) + 1
    lines = [
        f"config      {cfg.source}",
        f"robot       {cfg.model.n} joints: {', '.join(cfg.model.joint_names)}",
        f"trajectory  {tr.kind}, duration {tr.duration:.6g} s, dt {sw.dt:g} s, {n_t} samples",
        f"payload     {sw.m_min:g}..{sw.m_max:g} kg, {sw.n_points} points, delta_m {sw.delta_m:g} kg ({sw.scheme})",
        f"output      {out} ({fmt}, stride {sw.output_stride}{', plots' if plots else ''})",
        f"workers     {parallel}",
    ]
    return "\n".join(lines)


def _efficiency_maps(cfg: RunConfig, report) -> dict:
    maps = {}
    for i, act in enumerate(cfg.actuators):
        f_peak = max(float(np.nanmax([e.aggregates["psi2"][i] for e in report.entries])), 1.0)
        v_peak = max(float(np.nanmax(np.abs(np.concatenate([e.series.v_x[:, i] for e in report.entries])))), 1e-3)
        f_max = act.map_force_max or 1.2 * f_peak
        v_max = act.map_speed_max or 1.2 * v_peak
        maps[act.name] = efficiency_map_grid(act.mechanics, act.pmsm, (f_max / MAP_POINTS, f_max),
                                             (v_max / MAP_POINTS, v_max), MAP_POINTS, MAP_POINTS)
    return maps


def _write_maps(maps: dict, stage: Path) -> None:
    for name, (forces, vels, eta) in maps.items():
        with open(stage / f"efficiency_map_{name}.csv", "w") as fh:
            fh.write("f_x," + ",".join(f17(v) for v in vels) + "\n")
            for fx, row in zip(forces, eta):
                fh.write(f17(fx) + "," + ",".join(f17(v) for v in row) + "\n")


def run(args) -> int:
    try:
        cfg = load_config(args.config)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out_dir
    if out is None:
        print("error: no output directory (pass --out or set output.dir)", file=sys.stderr)
        return EXIT_CONFIG
    fmt = args.format or cfg.fmt
    parallel = args.parallel if args.parallel is not None else cfg.parallel
    if parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        last = cfg.model.link_inertias[-1].mass
        for m in cfg.sweep.grid():
            check_perturbation(m, cfg.sweep.delta_m)
            check_perturbation(last + m, cfg.sweep.delta_m, what="last-link mass incl. payload")
    except PrecisionError as exc:
        print(f"error: sweep.delta_m: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if out.exists() and not out.is_dir():
        print(f"error: output path exists and is not a directory: {out}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dry_run:
        print(_plan(cfg, out, fmt, parallel, args.plots))
        print("dry run: configuration valid, nothing written")
        return EXIT_OK

    created = not out.exists()
    try:
        out.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    code = EXIT_OK
    try:
        t0 = time.perf_counter()
        kin = run_trajectory(cfg.model, cfg.trajectory, cfg.sweep.dt, cfg.initial_q)
        logger.info("kinematics: %d samples, max tracking error %.3e m (%.2f s)",
                    len(kin.t), float(np.max(kin.tracking_error)), time.perf_counter() - t0)
        report = payload_sweep(cfg.model, cfg.trajectory, cfg.actuators, cfg.sweep, cfg.initial_q,
                               parallel=parallel, kin=kin)
        logger.info("sweep: %d payload points (%.2f s)", len(report.entries), time.perf_counter() - t0)
        write_outputs(report, stage, fmt)
        maps = _efficiency_maps(cfg, report)
        _write_maps(maps, stage)
        if args.plots:
            from .plots import emit_plots

            emit_plots(report, stage, efficiency_maps=maps)
        for f in sorted(stage.iterdir()):
            os.replace(f, out / f.name)
        print(f"wrote {len(report.entries)} payload points to {out} "
              f"(max tracking error {report.max_tracking_error:.3e} m)")
    except PayloadFailure as exc:
        code = EXIT_DIVERGENCE if isinstance(exc.cause, _NUMERIC_ERRORS) else EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
    except _NUMERIC_ERRORS as exc:
        code = EXIT_DIVERGENCE
        print(f"error: numerical divergence: {exc}", file=sys.stderr)
    except _CONFIG_ERRORS as exc:
        code = EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        code = EXIT_CONFIG
        print(f"error: cannot write output: {exc}", file=sys.stderr)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
        if code != EXIT_OK and created:
            shutil.rmtree(out, ignore_errors=True)
    return code


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
