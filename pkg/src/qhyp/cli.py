"""Command-line front end.

    qhyp trajectory  --config fig2.yaml [--seed N] [--out DIR] [--no-svg]
    qhyp error-curve --config fig3a.yaml [--workers N] ...
    qhyp bound       --config fig3a.yaml ...

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
failures while running or writing results.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import io, svg
from .config import Config, ConfigError, load_config
from .dynamics import simulate_record
from .inference import BayesTracker, quantum_bound_curve
from .montecarlo import default_workers, run_experiment, unmonitored_error_curve

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(cfg: Config, out: str | None) -> Path:
    path = Path(out if out is not None else cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_pair(cfg: Config, what: str):
    if len(cfg.hypotheses) != 2:
        raise ConfigError(f"hypotheses: {what} needs exactly two hypotheses, got {len(cfg.hypotheses)}")


# -- trajectory -------------------------------------------------------------


def trajectory_table(cfg: Config, seed: int | None = None):
    """Simulate one record under the true hypothesis and track posteriors along it.

    Returns (record, columns) where columns maps CSV header names to arrays.
    """
    _require_pair(cfg, "trajectory")
    seed = cfg.master_seed if seed is None else seed
    spec = cfg.experiment_spec(seed)
    hs = cfg.hypotheses
    j = cfg.true_hypothesis
    record = simulate_record(hs[j], hs.initial_state, cfg.scheme, spec.n_steps, seed, (j, 0))
    tracker = BayesTracker(hs, cfg.scheme)
    n = record.n_steps
    post = np.empty((n, 2))
    bloch = np.empty((n, 3))
    for s in range(n):
        tracker.advance(record.step(s))
        obs = tracker.optimal_observable()
        post[s] = obs.posteriors
        bloch[s] = obs.bloch_direction if hs.dim == 2 else np.nan
    cols = {"t": record.times}
    if record.dN is not None:
        cols["dN"] = record.dN
    if record.dY is not None:
        cols["dY"] = record.dY
    cols.update(P_h0=post[:, 0], P_h1=post[:, 1], bloch_x=bloch[:, 0], bloch_y=bloch[:, 1], bloch_z=bloch[:, 2])
    return record, cols


def write_table(path: Path, cols: dict) -> Path:
    names = list(cols)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(cols[k] for k in names)):
            w.writerow([str(int(v)) if k == "dN" else io.fmt(v) for k, v in zip(names, row)])
    return path


def cmd_trajectory(cfg: Config, seed: int | None = None, out: str | None = None, plot: bool = True) -> list[Path]:
    record, cols = trajectory_table(cfg, seed)
    d = _out_dir(cfg, out)
    p = cfg.file_prefix
    files = [
        write_table(d / f"{p}_trajectory.csv", cols),
        io.write_record(record, d / f"{p}_record.csv"),
        io.sidecar_path(d / f"{p}_record.csv"),
    ]
    if plot:
        t = cols["t"]
        signal = svg.Panel("N(t)" if "dN" in cols else "Y(t)", steps="dN" in cols)
        if "dN" in cols:
            signal.series["N(t)"] = (t, np.cumsum(cols["dN"]))
        if "dY" in cols:
            signal.series["Y(t)"] = (t, np.cumsum(cols["dY"]))
        posts = svg.Panel("posterior", ylim=(0.0, 1.0))
        posts.series["P(h0)"] = (t, cols["P_h0"])
        posts.series["P(h1)"] = (t, cols["P_h1"])
        bloch = svg.Panel("observable axis", ylim=(-1.0, 1.0))
        for k in ("bloch_x", "bloch_y", "bloch_z"):
            bloch.series[k[-1]] = (t, cols[k])
        files.append(svg.write_svg(d / f"{p}_trajectory.svg", [signal, posts, bloch], "t", cfg.name))
    return files


# -- error curves -----------------------------------------------------------


def _curve_svg(path: Path, cols: dict, title: str) -> Path:
    panel = svg.Panel("error probability")
    for label, key in (
        ("signal", "qe_signal"),
        ("projection", "qe_projection"),
        ("bound", "qe_bound"),
        ("unmonitored", "qe_unmonitored"),
    ):
        if cols.get(key) is not None:
            panel.series[label] = (cols["t"], cols[key])
    return svg.write_svg(path, [panel], "t", title)


def cmd_error_curve(
    cfg: Config, seed: int | None = None, workers: int = 1, out: str | None = None, plot: bool = True
) -> list[Path]:
    curve = run_experiment(cfg.experiment_spec(seed), workers=workers)
    d = _out_dir(cfg, out)
    p = cfg.file_prefix
    files = [io.write_error_curve(curve, d / f"{p}_error_curve.csv"), io.write_counts(curve, d / f"{p}_counts.csv")]
    if plot:
        cols = {
            "t": curve.times,
            "qe_signal": curve.qe_signal,
            "qe_projection": curve.qe_projection,
            "qe_bound": curve.qe_bound,
            "qe_unmonitored": curve.qe_unmonitored,
        }
        files.append(_curve_svg(d / f"{p}_error_curve.svg", cols, cfg.name))
    return files


def cmd_bound(cfg: Config, out: str | None = None, plot: bool = True) -> list[Path]:
    """Quantum bound and unmonitored error on the configured grid, without sampling."""
    _require_pair(cfg, "bound")
    spec = cfg.experiment_spec()
    hs = cfg.hypotheses
    cols = {
        "t": spec.times,
        "qe_bound": quantum_bound_curve(hs[0], hs[1], hs.initial_state, spec.times),
        "qe_unmonitored": unmonitored_error_curve(hs, spec.times, cfg.scheme.dt),
    }
    d = _out_dir(cfg, out)
    p = cfg.file_prefix
    files = [io.write_curve_columns(d / f"{p}_bound.csv", cols)]
    if plot:
        files.append(_curve_svg(d / f"{p}_bound.svg", cols, cfg.name))
    return files


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qhyp", description="Hypothesis testing with a continuously monitored emitter.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("trajectory", "simulate one record and track posteriors"),
        ("error-curve", "Monte Carlo error probability versus time"),
        ("bound", "quantum lower bound and unmonitored error only"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, metavar="N", help="override run.master_seed")
        p.add_argument("--workers", type=int, default=None, metavar="N")
        p.add_argument("--out", metavar="DIR", help="override output.dir")
        p.add_argument("--no-svg", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be at least 1")
        cfg = load_config(args.config)
    except (UsageError, ConfigError) as exc:
        print(f"qhyp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in cfg.warnings:
        print(f"qhyp: warning: {w}", file=sys.stderr)
    plot = not args.no_svg
    try:
        if args.command == "trajectory":
            files = cmd_trajectory(cfg, args.seed, args.out, plot)
        elif args.command == "error-curve":
            workers = args.workers or default_workers()
            files = cmd_error_curve(cfg, args.seed, workers, args.out, plot)
        else:
            files = cmd_bound(cfg, args.out, plot)
    except ConfigError as exc:
        print(f"qhyp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"qhyp: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
