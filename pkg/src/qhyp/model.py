"""Candidate hypotheses, initial state and detection scheme.

Rates are measured in units of a reference decay rate gamma and times in
units of 1/gamma; hbar = 1.  Channel 0 of every hypothesis is the monitored
decay channel; any further collapse operators are treated as unmonitored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qmatrix import (
    GROUND,
    HERMITIAN_TOL,
    LOWERING,
    SIGMA_X,
    as_cmatrix,
    hermiticity_defect,
    projector,
)

PRIOR_SUM_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

SCHEME_KINDS = ("none", "counting", "homodyne", "hybrid")


# eq=False keeps identity hashing, which the propagator caches rely on.
@dataclass(frozen=True, eq=False)
class Hypothesis:
    """One candidate model: Hamiltonian, collapse operators and prior."""

    label: str
    hamiltonian: np.ndarray
    collapse_ops: tuple[np.ndarray, ...] = ()
    prior: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian", as_cmatrix(self.hamiltonian, "hamiltonian"))
        ops = tuple(as_cmatrix(c, "collapse operator") for c in self.collapse_ops)
        object.__setattr__(self, "collapse_ops", ops)
        object.__setattr__(self, "prior", float(self.prior))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def with_prior(self, prior: float) -> Hypothesis:
        return Hypothesis(self.label, self.hamiltonian, self.collapse_ops, prior)


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    hypotheses: tuple[Hypothesis, ...]
    initial_state: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        object.__setattr__(self, "initial_state", np.asarray(self.initial_state, dtype=complex))

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __getitem__(self, i: int) -> Hypothesis:
        return self.hypotheses[i]

    def __iter__(self):
        return iter(self.hypotheses)

    @property
    def priors(self) -> np.ndarray:
        return np.array([h.prior for h in self.hypotheses])

    @property
    def dim(self) -> int:
        return self.initial_state.shape[0]


@dataclass(frozen=True)
class DetectionScheme:
    """How the emitted radiation of channel 0 is monitored.

    ``beta`` is the fraction of the emission sent to the homodyne detector in
    the hybrid scheme.  ``eta`` is the detector efficiency; ``eta_homodyne``
    optionally gives the homodyne arm its own efficiency.
    """

    kind: str = "counting"
    eta: float = 1.0
    phi: float = 0.0
    beta: float = 0.0
    dt: float = 1e-3
    eta_homodyne: float | None = None

    @property
    def counting_fraction(self) -> float:
        if self.kind == "counting":
            return 1.0
        if self.kind == "hybrid":
            return 1.0 - self.beta
        return 0.0

    @property
    def homodyne_fraction(self) -> float:
        if self.kind == "homodyne":
            return 1.0
        if self.kind == "hybrid":
            return self.beta
        return 0.0

    @property
    def homodyne_eta(self) -> float:
        return self.eta if self.eta_homodyne is None else self.eta_homodyne

    @property
    def has_counting(self) -> bool:
        return self.kind in ("counting", "hybrid")

    @property
    def has_homodyne(self) -> bool:
        return self.kind in ("homodyne", "hybrid")

    def replace(self, **changes) -> DetectionScheme:
        from dataclasses import replace

        return replace(self, **changes)


def ground_state(dim: int = 2) -> np.ndarray:
    return projector(GROUND, dim)


def two_level_rabi(omega: float, gamma: float, prior: float = 0.5, label: str | None = None) -> Hypothesis:
    """Resonantly driven two-level emitter: H = (omega/2) sigma_x, c = sqrt(gamma)|g><e|."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if label is None:
        label = f"omega={omega:g}"
    return Hypothesis(
        label=label,
        hamiltonian=(omega / 2.0) * SIGMA_X,
        collapse_ops=(math.sqrt(gamma) * LOWERING,),
        prior=prior,
    )


def rabi_set(omegas, gamma: float = 1.0, priors=None, initial: np.ndarray | None = None) -> HypothesisSet:
    """Hypothesis set of driven two-level emitters differing in Rabi frequency."""
    omegas = list(omegas)
    if priors is None:
        priors = [1.0 / len(omegas)] * len(omegas)
    hyps = [two_level_rabi(w, gamma, p, label=f"h{i}") for i, (w, p) in enumerate(zip(omegas, priors))]
    return HypothesisSet(tuple(hyps), ground_state(2) if initial is None else initial)


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok


def validate(hset: HypothesisSet, scheme: DetectionScheme | None = None) -> ValidationReport:
    """Collect every violated invariant of a hypothesis set and scheme."""
    errors: list[str] = []
    hyps = list(hset.hypotheses)
    if len(hyps) < 2:
        errors.append(f"need at least 2 hypotheses, got {len(hyps)}")

    rho = np.asarray(hset.initial_state)
    dims = {h.dim for h in hyps}
    dims.update(c.shape[0] for h in hyps for c in h.collapse_ops)
    if rho.ndim == 2:
        dims.add(rho.shape[0])
    if len(dims) > 1 or rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        errors.append(f"dimension mismatch: found dimensions {sorted(dims)} and initial state shape {rho.shape}")

    n_channels = {len(h.collapse_ops) for h in hyps}
    if len(n_channels) > 1:
        errors.append(f"collapse operator count differs between hypotheses: {sorted(n_channels)}")

    for i, h in enumerate(hyps):
        defect = hermiticity_defect(h.hamiltonian)
        if defect > HERMITIAN_TOL:
            errors.append(f"hypothesis {i} ({h.label}): hamiltonian not Hermitian (defect {defect:.3g})")
        if not 0.0 <= h.prior <= 1.0:
            errors.append(f"hypothesis {i} ({h.label}): prior {h.prior:g} outside [0, 1]")
    total = float(sum(h.prior for h in hyps))
    if abs(total - 1.0) > PRIOR_SUM_TOL:
        errors.append(f"priors sum to {total:g}")

    if rho.ndim == 2 and rho.shape[0] == rho.shape[1]:
        if not np.all(np.isfinite(rho)):
            errors.append("initial state has non-finite entries")
        else:
            defect = hermiticity_defect(rho)
            if defect > HERMITIAN_TOL:
                errors.append(f"initial state not Hermitian (defect {defect:.3g})")
            else:
                tr = np.trace(rho).real
                if abs(tr - 1.0) > TRACE_TOL:
                    errors.append(f"initial state trace is {tr:.15g}, expected 1")
                wmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
                if wmin < -PSD_TOL:
                    errors.append(f"initial state not positive semidefinite (min eigenvalue {wmin:.3g})")

    if scheme is not None:
        if scheme.kind not in SCHEME_KINDS:
            errors.append(f"unknown scheme kind {scheme.kind!r}; expected one of {SCHEME_KINDS}")
        if not 0.0 <= scheme.eta <= 1.0:
            errors.append(f"eta {scheme.eta:g} outside [0, 1]")
        if scheme.eta_homodyne is not None and not 0.0 <= scheme.eta_homodyne <= 1.0:
            errors.append(f"eta_homodyne {scheme.eta_homodyne:g} outside [0, 1]")
        if not 0.0 <= scheme.beta <= 1.0:
            errors.append(f"beta {scheme.beta:g} outside [0, 1]")
        if not (scheme.dt > 0 and math.isfinite(scheme.dt)):
            errors.append(f"dt must be positive, got {scheme.dt:g}")
        if not math.isfinite(scheme.phi):
            errors.append("phi must be finite")
        if scheme.kind != "none" and any(len(h.collapse_ops) == 0 for h in hyps):
            errors.append("monitoring requires at least one collapse operator per hypothesis")
    return ValidationReport(errors)


def require_valid(hset: HypothesisSet, scheme: DetectionScheme | None = None) -> None:
    report = validate(hset, scheme)
    if not report.ok:
        raise ValueError("; ".join(report.errors))
