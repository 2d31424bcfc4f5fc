"""Bayesian bookkeeping over hypotheses and the final optimal measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dynamics import (
    ConditionalState,
    OverlapState,
    SignalStep,
    monitored_step,
    two_sided_step,
)
from .model import DetectionScheme, Hypothesis, HypothesisSet, require_valid
from .qmatrix import (
    EigDecomposition,
    as_cmatrix,
    bloch_direction,
    hermitian_eigs,
    hermiticity_defect,
    trace_norm,
)

PRIOR_PAIR_TOL = 1e-9
DENSITY_TRACE_TOL = 1e-9
DENSITY_PSD_TOL = 1e-8
PURE_RANK_TOL = 1e-10
BOUND_MAX_DT = 1e-4


class ImpossibleRecordError(ValueError):
    pass


def posteriors_from_log_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if np.all(lw == -np.inf):
        raise ImpossibleRecordError("record impossible under all hypotheses")
    return np.exp(lw - logsumexp(lw))


@dataclass(frozen=True)
class MeasurementObservable:
    """Final projective measurement discriminating two hypotheses.

    Outcomes with positive eigenvalue favor hypothesis 0, negative ones
    hypothesis 1; zero eigenvalues go to the hypothesis with the larger
    posterior, ties to hypothesis 0.
    """

    A: np.ndarray
    decomposition: EigDecomposition
    posteriors: np.ndarray

    def decide(self, outcome: int) -> int:
        lam = self.decomposition.eigenvalues[outcome]
        if lam > 0:
            return 0
        if lam < 0:
            return 1
        return 0 if self.posteriors[0] >= self.posteriors[1] else 1

    @property
    def bloch_direction(self) -> np.ndarray:
        return bloch_direction(self.A)


class BayesTracker:
    """Conditional states of every hypothesis, driven by one shared record."""

    def __init__(self, hypotheses: HypothesisSet, scheme: DetectionScheme):
        require_valid(hypotheses, scheme)
        self.hypotheses = hypotheses
        self.scheme = scheme
        rho0 = hypotheses.initial_state
        with np.errstate(divide="ignore"):
            self.cond_states = [
                ConditionalState(rho=rho0.copy(), log_weight=float(np.log(h.prior))) for h in hypotheses
            ]
        self.time = 0.0

    def copy(self) -> BayesTracker:
        new = object.__new__(BayesTracker)
        new.hypotheses = self.hypotheses
        new.scheme = self.scheme
        new.cond_states = list(self.cond_states)
        new.time = self.time
        return new

    def advance(self, step: SignalStep) -> BayesTracker:
        if self.scheme.has_counting and step.dN is None:
            raise ValueError(f"{self.scheme.kind} scheme needs a dN increment")
        if self.scheme.has_homodyne and step.dY is None:
            raise ValueError(f"{self.scheme.kind} scheme needs a dY increment")
        self.cond_states = [
            monitored_step(c, h, self.scheme, step) for c, h in zip(self.cond_states, self.hypotheses)
        ]
        self.time += self.scheme.dt
        return self

    def run(self, record) -> BayesTracker:
        for n in range(record.n_steps):
            self.advance(record.step(n))
        return self

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([c.log_weight for c in self.cond_states])

    def posteriors(self) -> np.ndarray:
        return posteriors_from_log_weights(self.log_weights)

    def signal_decision(self) -> int:
        """Index of the hypothesis assigned from the record alone (ties to the lower index)."""
        return int(np.argmax(self.log_weights))

    def states(self) -> list[np.ndarray]:
        return [c.rho for c in self.cond_states]

    def optimal_observable(self) -> MeasurementObservable:
        if len(self.hypotheses) != 2:
            raise ValueError("the optimal final measurement is defined for exactly two hypotheses")
        post = self.posteriors()
        rho0, rho1 = self.states()
        return optimal_observable(post[0], rho0, post[1], rho1)

    def helstrom_error(self) -> float:
        post = self.posteriors()
        rho0, rho1 = self.states()
        return helstrom_error(post[0], rho0, post[1], rho1)


def optimal_observable(p0: float, rho0: np.ndarray, p1: float, rho1: np.ndarray) -> MeasurementObservable:
    a = p0 * rho0 - p1 * rho1
    a = 0.5 * (a + a.conj().T)
    return MeasurementObservable(A=a, decomposition=hermitian_eigs(a), posteriors=np.array([p0, p1]))


def _check_density(rho, name: str) -> np.ndarray:
    rho = as_cmatrix(rho, name)
    if hermiticity_defect(rho) > 1e-9:
        raise ValueError(f"{name} is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > DENSITY_TRACE_TOL:
        raise ValueError(f"{name} has trace {tr:.12g}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -DENSITY_PSD_TOL:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def helstrom_error(p0: float, rho0, p1: float, rho1) -> float:
    """Minimum error probability of a measurement distinguishing rho0 (prior p0) from rho1."""
    if abs(p0 + p1 - 1.0) > PRIOR_PAIR_TOL:
        raise ValueError(f"probabilities sum to {p0 + p1:.12g}, expected 1")
    rho0 = _check_density(rho0, "rho0")
    rho1 = _check_density(rho1, "rho1")
    if rho0.shape != rho1.shape:
        raise ValueError(f"dimension mismatch: {rho0.shape} vs {rho1.shape}")
    a = p0 * rho0 - p1 * rho1
    b = p1 * rho1 - p0 * rho0
    # averaging the two orderings makes the result exactly symmetric in its arguments
    norm = 0.5 * (trace_norm(a) + trace_norm(b))
    return min(0.5, max(0.0, 0.5 * (1.0 - norm)))


def pure_bound(p0: float, p1: float, overlap: complex) -> float:
    """Minimum error probability for two pure states with the given overlap."""
    s = min(1.0, abs(overlap)) ** 2
    return 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * p0 * p1 * s)))


def _require_pure(initial) -> np.ndarray:
    rho = as_cmatrix(initial, "initial state")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if len(w) > 1 and w[-2] > PURE_RANK_TOL:
        raise ValueError("bound requires pure initial state")
    return rho


def overlap_curve(hyp0: Hypothesis, hyp1: Hypothesis, initial, t_grid, dt: float = BOUND_MAX_DT) -> np.ndarray:
    """Tr rho01(t) on a non-decreasing time grid starting at or after t = 0."""
    rho = _require_pure(initial)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or (len(t_grid) and t_grid[0] < 0):
        raise ValueError("time grid must be non-negative and non-decreasing")
    ov = OverlapState(rho)
    t = 0.0
    out = np.empty(len(t_grid), dtype=complex)
    for i, target in enumerate(t_grid):
        span = target - t
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            h = span / n
            for _ in range(n):
                ov = two_sided_step(ov, hyp0, hyp1, h)
            t = target
        out[i] = ov.overlap
    return out


def quantum_bound_curve(hyp0: Hypothesis, hyp1: Hypothesis, initial, t_grid, dt: float = BOUND_MAX_DT) -> np.ndarray:
    """Lower bound on the error of any measurement on emitter plus radiation, versus time."""
    overlaps = overlap_curve(hyp0, hyp1, initial, t_grid, dt)
    p0, p1 = hyp0.prior, hyp1.prior
    return np.array([pure_bound(p0, p1, ov) for ov in overlaps])


def project_and_update(tracker: BayesTracker, true_index: int, rng: np.random.Generator):
    """Perform the optimal final measurement on the true hypothesis' conditional state.

    Returns the outcome eigenvalue and the posteriors updated with it.
    """
    obs = tracker.optimal_observable()
    post = obs.posteriors
    states = tracker.states()
    projs = obs.decomposition.projectors
    physical = np.array([np.trace(p @ states[true_index]).real for p in projs])
    physical = np.clip(physical, 0.0, None)
    k = int(rng.choice(len(projs), p=physical / physical.sum()))
    likelihood = np.array([max(0.0, np.trace(projs[k] @ s).real) for s in states])
    joint = likelihood * post
    total = joint.sum()
    updated = joint / total if total > 0 else post.copy()
    return float(obs.decomposition.eigenvalues[k]), updated

