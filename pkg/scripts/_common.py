"""Shared argument handling for the figure scripts."""

import argparse
import dataclasses
from pathlib import Path

from qhyp.config import Config, load_config
from qhyp.montecarlo import default_workers

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def parser(description: str, out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--M", type=int, default=None, help="trajectories per true hypothesis")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--out", default=out)
    p.add_argument("--no-svg", action="store_true")
    return p


def config(name: str, args) -> Config:
    cfg = load_config(CONFIGS / f"{name}.yaml")
    if args.M is not None:
        cfg = dataclasses.replace(cfg, M=args.M)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg
