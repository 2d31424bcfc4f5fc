"""Experiment configuration: a YAML document with nested sections.

Example::

    name: fig3a
    initial: ground
    hypotheses:
      - {label: h0, omega: 0.0, gamma: 1.0, prior: 0.5}
      - {label: h1, omega: 4.0, gamma: 1.0, prior: 0.5}
    scheme: {kind: counting, eta: 1.0, dt: 0.001}
    run: {t_final: 5.0, n_grid: 100, M: 10000, master_seed: 1}
    output: {dir: out}

A hypothesis is either the two-level shorthand (``omega``, ``gamma``,
``prior``) with H = omega/2 sigma_x and collapse operator sqrt(gamma) sigma_-,
or explicit ``hamiltonian`` and ``collapse`` matrices written as nested
lists of ``[re, im]`` pairs.  ``initial`` is ``ground``, ``excited`` or an
explicit matrix in the same format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .model import (
    SCHEME_KINDS,
    DetectionScheme,
    Hypothesis,
    HypothesisSet,
    ground_state,
    two_level_rabi,
    validate,
)
from .montecarlo import ExperimentSpec


class ConfigError(ValueError):
    pass


TOP_KEYS = {"name", "initial", "hypotheses", "scheme", "run", "output"}
HYP_SHORT_KEYS = {"label", "omega", "gamma", "prior"}
HYP_EXPLICIT_KEYS = {"label", "hamiltonian", "collapse", "prior"}
SCHEME_KEYS = {"kind", "eta", "phi", "beta", "dt", "eta_homodyne"}
RUN_KEYS = {
    "t_final",
    "n_grid",
    "M",
    "master_seed",
    "with_projection",
    "compute_bound",
    "chunk_size",
    "sampled_projection",
    "true_hypothesis",
}
OUTPUT_KEYS = {"dir", "prefix"}


@dataclass
class Config:
    name: str
    hypotheses: HypothesisSet
    scheme: DetectionScheme
    t_final: float = 5.0
    n_grid: int = 100
    M: int = 1000
    master_seed: int = 0
    with_projection: bool = True
    compute_bound: bool = True
    chunk_size: int = 1000
    sampled_projection: bool = False
    true_hypothesis: int = 0
    out_dir: str = "out"
    prefix: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def file_prefix(self) -> str:
        return self.prefix or self.name

    def experiment_spec(self, master_seed: int | None = None) -> ExperimentSpec:
        return ExperimentSpec(
            hypotheses=self.hypotheses,
            scheme=self.scheme,
            t_final=self.t_final,
            n_grid=self.n_grid,
            M=self.M,
            master_seed=self.master_seed if master_seed is None else master_seed,
            with_projection=self.with_projection,
            compute_bound=self.compute_bound,
            chunk_size=self.chunk_size,
            sampled_projection=self.sampled_projection,
        )


# -- locations --------------------------------------------------------------


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    """Map key paths to 1-based line numbers in the source text."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_map(v, path + (k.value,), out)
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines
        self.warnings: list[str] = []

    def where(self, path: tuple) -> str:
        name = ""
        for p in path:
            name += f"[{p}]" if isinstance(p, int) else (f".{p}" if name else str(p))
        probe = path
        while probe not in self.lines and probe:
            probe = probe[:-1]
        line = self.lines.get(probe)
        return f"{name or '<root>'} (line {line})" if line else (name or "<root>")

    def fail(self, path: tuple, msg: str):
        raise ConfigError(f"{self.where(path)}: {msg}")

    def mapping(self, value, path: tuple, allowed: set[str]) -> dict:
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for key in value:
            if key not in allowed:
                self.fail(path + (key,), f"unknown key '{key}'")
        return value

    def number(self, value, path: tuple) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        return float(value)

    def integer(self, value, path: tuple) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        return int(value)

    def boolean(self, value, path: tuple) -> bool:
        if not isinstance(value, bool):
            self.fail(path, f"expected true or false, got {value!r}")
        return value

    def matrix(self, value, path: tuple) -> np.ndarray:
        if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
            self.fail(path, "expected a square matrix of [re, im] pairs")
        d = len(value)
        out = np.empty((d, d), dtype=complex)
        for i, row in enumerate(value):
            if len(row) != d:
                self.fail(path + (i,), f"row has {len(row)} entries, expected {d}")
            for j, z in enumerate(row):
                if not isinstance(z, list) or len(z) != 2:
                    self.fail(path + (i, j), "expected an [re, im] pair")
                out[i, j] = complex(self.number(z[0], path + (i, j)), self.number(z[1], path + (i, j)))
        return out


# -- parsing ----------------------------------------------------------------


def _hypothesis(ctx: _Ctx, raw, i: int) -> Hypothesis:
    path = ("hypotheses", i)
    if not isinstance(raw, dict):
        ctx.fail(path, "expected a mapping")
    explicit = "hamiltonian" in raw or "collapse" in raw
    ctx.mapping(raw, path, HYP_EXPLICIT_KEYS if explicit else HYP_SHORT_KEYS)
    label = str(raw.get("label", f"h{i}"))
    if "prior" not in raw:
        ctx.fail(path + ("prior",), "missing required key")
    prior = ctx.number(raw["prior"], path + ("prior",))
    if explicit:
        if "hamiltonian" not in raw:
            ctx.fail(path + ("hamiltonian",), "missing required key")
        ham = ctx.matrix(raw["hamiltonian"], path + ("hamiltonian",))
        ops = raw.get("collapse", [])
        if not isinstance(ops, list):
            ctx.fail(path + ("collapse",), "expected a list of matrices")
        cs = tuple(ctx.matrix(c, path + ("collapse", k)) for k, c in enumerate(ops))
        return Hypothesis(label, ham, cs, prior)
    if "omega" not in raw:
        ctx.fail(path + ("omega",), "missing required key")
    omega = ctx.number(raw["omega"], path + ("omega",))
    gamma = ctx.number(raw.get("gamma", 1.0), path + ("gamma",))
    if gamma < 0:
        ctx.fail(path + ("gamma",), f"decay rate must be non-negative, got {gamma:g}")
    return two_level_rabi(omega, gamma, prior, label)


def _initial(ctx: _Ctx, raw, dim: int) -> np.ndarray:
    if raw is None or raw == "ground":
        return ground_state(dim)
    if raw == "excited":
        rho = np.zeros((dim, dim), dtype=complex)
        rho[1, 1] = 1.0
        return rho
    if isinstance(raw, str):
        ctx.fail(("initial",), f"expected 'ground', 'excited' or a matrix, got {raw!r}")
    return ctx.matrix(raw, ("initial",))


def _scheme(ctx: _Ctx, raw) -> DetectionScheme:
    path = ("scheme",)
    raw = ctx.mapping(raw if raw is not None else {}, path, SCHEME_KEYS)
    kind = raw.get("kind", "counting")
    if kind not in SCHEME_KINDS:
        ctx.fail(path + ("kind",), f"unknown scheme kind {kind!r}; expected one of {', '.join(SCHEME_KINDS)}")
    kw: dict[str, Any] = {"kind": kind}
    for key in ("eta", "phi", "beta", "dt", "eta_homodyne"):
        if key in raw:
            kw[key] = ctx.number(raw[key], path + (key,))
    ignored = []
    if kind == "none":
        ignored = [k for k in ("eta", "phi", "beta", "eta_homodyne") if k in raw]
    elif kind == "counting":
        ignored = [k for k in ("phi", "beta", "eta_homodyne") if k in raw]
    elif kind == "homodyne":
        ignored = [k for k in ("beta",) if k in raw]
    for k in ignored:
        ctx.warnings.append(f"{ctx.where(path + (k,))}: ignored for {kind} detection")
    if "dt" in kw and not kw["dt"] > 0:
        ctx.fail(path + ("dt",), f"time step must be positive, got {kw['dt']:g}")
    return DetectionScheme(**kw)


def parse_config(text: str) -> Config:
    """Parse and fully validate a configuration document.

    Raises ConfigError naming the first offending key and its line.
    Ignored fields produce entries in ``Config.warnings``.
    """
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    ctx = _Ctx(_line_map(node) if node is not None else {})
    if data is None:
        data = {}
    data = ctx.mapping(data, (), TOP_KEYS)

    raw_h = data.get("hypotheses")
    if not isinstance(raw_h, list) or len(raw_h) < 2:
        ctx.fail(("hypotheses",), "expected a list of at least two hypotheses")
    hyps = [_hypothesis(ctx, h, i) for i, h in enumerate(raw_h)]
    dim = hyps[0].dim
    initial = _initial(ctx, data.get("initial"), dim)
    scheme = _scheme(ctx, data.get("scheme"))

    run = ctx.mapping(data.get("run") or {}, ("run",), RUN_KEYS)
    kw: dict[str, Any] = {}
    for key in ("t_final",):
        if key in run:
            kw[key] = ctx.number(run[key], ("run", key))
    for key in ("n_grid", "M", "master_seed", "chunk_size", "true_hypothesis"):
        if key in run:
            kw[key] = ctx.integer(run[key], ("run", key))
    for key in ("with_projection", "compute_bound", "sampled_projection"):
        if key in run:
            kw[key] = ctx.boolean(run[key], ("run", key))
    if len(hyps) != 2 and "with_projection" not in run:
        kw["with_projection"] = False
    if len(hyps) != 2 and "compute_bound" not in run:
        kw["compute_bound"] = False
    if not 0 <= kw.get("true_hypothesis", 0) < len(hyps):
        ctx.fail(("run", "true_hypothesis"), f"index out of range for {len(hyps)} hypotheses")

    out = ctx.mapping(data.get("output") or {}, ("output",), OUTPUT_KEYS)
    name = str(data.get("name", "experiment"))

    hset = HypothesisSet(tuple(hyps), initial)
    report = validate(hset, scheme)
    if not report.ok:
        ctx.fail(_blame(report.errors[0]), report.errors[0])
    cfg = Config(
        name=name,
        hypotheses=hset,
        scheme=scheme,
        out_dir=str(out.get("dir", "out")),
        prefix=None if out.get("prefix") is None else str(out["prefix"]),
        warnings=ctx.warnings,
        **kw,
    )
    problems = [p for p in cfg.experiment_spec().problems() if p not in report.errors]
    if problems:
        ctx.fail(("run",), problems[0])
    return cfg


def _blame(message: str) -> tuple:
    """Best-effort key path for a model validation message."""
    if "prior" in message:
        return ("hypotheses", "prior")
    if "initial" in message:
        return ("initial",)
    if any(k in message for k in ("eta", "beta", "dt", "phi", "scheme")):
        return ("scheme",)
    return ("hypotheses",)


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# -- serialization ----------------------------------------------------------


def _pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def dump_hypotheses(hset: HypothesisSet) -> dict:
    """Config fragment (``initial`` and ``hypotheses``) in the explicit-matrix form."""
    return {
        "initial": _pairs(hset.initial_state),
        "hypotheses": [
            {
                "label": h.label,
                "prior": float(h.prior),
                "hamiltonian": _pairs(h.hamiltonian),
                "collapse": [_pairs(c) for c in h.collapse_ops],
            }
            for h in hset
        ],
    }


def dump_config(cfg: Config) -> str:
    s = cfg.scheme
    scheme = {"kind": s.kind, "eta": s.eta, "dt": s.dt}
    if s.has_homodyne:
        scheme["phi"] = s.phi
    if s.kind == "hybrid":
        scheme["beta"] = s.beta
        if s.eta_homodyne is not None:
            scheme["eta_homodyne"] = s.eta_homodyne
    doc = {"name": cfg.name, **dump_hypotheses(cfg.hypotheses), "scheme": scheme}
    doc["run"] = {
        "t_final": cfg.t_final,
        "n_grid": cfg.n_grid,
        "M": cfg.M,
        "master_seed": cfg.master_seed,
        "with_projection": cfg.with_projection,
        "compute_bound": cfg.compute_bound,
        "chunk_size": cfg.chunk_size,
        "sampled_projection": cfg.sampled_projection,
        "true_hypothesis": cfg.true_hypothesis,
    }
    doc["output"] = {"dir": cfg.out_dir}
    if cfg.prefix:
        doc["output"]["prefix"] = cfg.prefix
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
