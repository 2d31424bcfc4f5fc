"""Projection error curves for a sweep of detector efficiencies."""

import dataclasses
from pathlib import Path

from _common import config, parser

from qhyp import svg
from qhyp.cli import write_table
from qhyp.montecarlo import run_experiment


def main():
    p = parser(__doc__, "out/fig4")
    p.add_argument("--config", default="fig3a_counting", help="base config name in configs/")
    p.add_argument("--etas", type=float, nargs="+", default=[1.0, 0.8, 0.5, 0.2, 0.0])
    args = p.parse_args()
    if args.M is None:
        args.M = 2000
    cfg = config(args.config, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols, panel = {}, svg.Panel("projection error")
    for i, eta in enumerate(args.etas):
        scheme = dataclasses.replace(cfg.scheme, eta=eta, eta_homodyne=None)
        spec = dataclasses.replace(cfg.experiment_spec(), scheme=scheme, compute_bound=(i == 0))
        curve = run_experiment(spec, workers=args.workers)
        cols.setdefault("t", curve.times)
        cols[f"qe_projection_eta{eta:g}"] = curve.qe_projection
        cols[f"stderr_projection_eta{eta:g}"] = curve.stderr_projection
        panel.series[f"eta={eta:g}"] = (curve.times, curve.qe_projection)
        if i == 0:
            cols["qe_bound"] = curve.qe_bound
            cols["qe_unmonitored"] = curve.qe_unmonitored
    panel.series["bound"] = (cols["t"], cols["qe_bound"])
    panel.series["unmonitored"] = (cols["t"], cols["qe_unmonitored"])
    stem = f"{cfg.file_prefix}_eta_sweep"
    print(write_table(out / f"{stem}.csv", cols))
    if not args.no_svg:
        print(svg.write_svg(out / f"{stem}.svg", [panel], "t", stem))


if __name__ == "__main__":
    main()
