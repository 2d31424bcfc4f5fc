"""Signal-only error for three Rabi frequencies, with and without a homodyne arm."""

import dataclasses
from pathlib import Path

from _common import config, parser

from qhyp import svg
from qhyp.cli import write_table
from qhyp.model import DetectionScheme
from qhyp.montecarlo import run_experiment


def main():
    p = parser(__doc__, "out/fig5")
    p.add_argument("--betas", type=float, nargs="+", default=[0.0, 0.01])
    args = p.parse_args()
    cfg = config("fig5_hybrid", args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols, panel = {}, svg.Panel("signal error")
    for beta in args.betas:
        s = cfg.scheme
        if beta == 0.0:
            scheme = DetectionScheme("counting", eta=s.eta, dt=s.dt)
        else:
            scheme = dataclasses.replace(s, beta=beta)
        curve = run_experiment(dataclasses.replace(cfg.experiment_spec(), scheme=scheme), workers=args.workers)
        cols.setdefault("t", curve.times)
        cols[f"qe_signal_beta{beta:g}"] = curve.qe_signal
        cols[f"stderr_signal_beta{beta:g}"] = curve.stderr_signal
        panel.series[f"beta={beta:g}"] = (curve.times, curve.qe_signal)
    stem = f"{cfg.file_prefix}_beta_sweep"
    print(write_table(out / f"{stem}.csv", cols))
    if not args.no_svg:
        print(svg.write_svg(out / f"{stem}.svg", [panel], "t", stem))


if __name__ == "__main__":
    main()
