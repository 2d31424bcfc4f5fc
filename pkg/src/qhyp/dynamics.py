"""Deterministic and conditional propagation of the emitter state.

Density matrices are handled internally as row-major vectors, for which
vec(A rho B) = kron(A, B.T) vec(rho).  Each time step of length dt is split
into

1. the deterministic no-detection evolution exp(G dt), where G contains the
   Hamiltonian, the full damping anticommutator and the refill term of the
   emission that no detector registers;
2. the detection backaction: rho -> c rho c^dag on a registered photon, and
   rho -> (1 + b dY) rho (1 + b dY)^dag for a homodyne increment, with
   b = sqrt(eta * beta) exp(-i phi) c.

To first order in dt this reproduces the linear counting, homodyne and hybrid
stochastic master equations while keeping every state positive.  Likelihood
increments are the trace ratios of those linear equations, evaluated on the
state at the start of the step:

    no click:   1 - eta_c <c^dag c> dt
    click:      eta_c <c^dag c> dt
    homodyne:   1 + <X_phi> dY,     <X_phi> = 2 Re Tr(b rho)

States are renormalized after every step and the logarithm of the
likelihood factor is accumulated separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, null_space

from .model import DetectionScheme, Hypothesis
from .qmatrix import dag
from .rng import TrajectoryNoise

MAX_CLICK_PROBABILITY = 0.1
MAX_HALVINGS = 20
STEADY_STATE_TOL = 1e-10


class CoarseStepError(ValueError):
    pass


class DegenerateStepError(ArithmeticError):
    pass


# -- superoperators ---------------------------------------------------------


def _sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> a rho b."""
    return np.kron(a, b.T)


def two_sided_generator(hyp0: Hypothesis, hyp1: Hypothesis, refill: float = 1.0) -> np.ndarray:
    """Generator of rho -> -i(H0 rho - rho H1) + sum_j [c0j rho c1j^dag - (c0j^dag c0j rho + rho c1j^dag c1j)/2].

    ``refill`` scales the c0j rho c1j^dag term of channel 0 only.  With
    hyp0 is hyp1 and refill = 1 this is the Lindblad generator.
    """
    if hyp0.dim != hyp1.dim:
        raise ValueError(f"dimension mismatch: {hyp0.dim} vs {hyp1.dim}")
    if len(hyp0.collapse_ops) != len(hyp1.collapse_ops):
        raise ValueError("hypotheses must have the same number of collapse operators")
    eye = np.eye(hyp0.dim, dtype=complex)
    g = -1j * (_sandwich(hyp0.hamiltonian, eye) - _sandwich(eye, hyp1.hamiltonian))
    for j, (c0, c1) in enumerate(zip(hyp0.collapse_ops, hyp1.collapse_ops)):
        weight = refill if j == 0 else 1.0
        if weight != 0.0:
            g += weight * _sandwich(c0, dag(c1))
        g -= 0.5 * (_sandwich(dag(c0) @ c0, eye) + _sandwich(eye, dag(c1) @ c1))
    return g


def lindblad_generator(hyp: Hypothesis) -> np.ndarray:
    return two_sided_generator(hyp, hyp)


@lru_cache(maxsize=256)
def _propagator(hyp0: Hypothesis, hyp1: Hypothesis, refill: float, dt: float) -> np.ndarray:
    p = expm(two_sided_generator(hyp0, hyp1, refill) * dt)
    p.setflags(write=False)
    return p


def lindblad_propagator(hyp: Hypothesis, dt: float) -> np.ndarray:
    return _propagator(hyp, hyp, 1.0, float(dt))


# -- state types ------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalState:
    """Conditioned state of one hypothesis.

    ``rho`` is kept at unit trace; the likelihood of the record so far is
    exp(log_weight).  A log_weight of -inf marks a record that is impossible
    under the hypothesis.
    """

    rho: np.ndarray
    log_weight: float = 0.0
    degenerate_steps: int = 0

    @property
    def impossible(self) -> bool:
        return self.log_weight == -math.inf


@dataclass(frozen=True)
class SignalStep:
    dN: int | None = None
    dY: float | None = None


@dataclass(frozen=True)
class OverlapState:
    rho01: np.ndarray

    @property
    def overlap(self) -> complex:
        return complex(np.trace(self.rho01))


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Measurement record of one trajectory, stored column-wise."""

    scheme: DetectionScheme
    n_steps: int
    dN: np.ndarray | None
    dY: np.ndarray | None
    seed: int
    stream_id: tuple[int, ...] = ()

    @property
    def steps(self) -> list[SignalStep]:
        return [self.step(n) for n in range(self.n_steps)]

    def step(self, n: int) -> SignalStep:
        return SignalStep(
            dN=None if self.dN is None else int(self.dN[n]),
            dY=None if self.dY is None else float(self.dY[n]),
        )

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.n_steps + 1) * self.scheme.dt


# -- step kernels -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StepKernel:
    """Precomputed matrices advancing a batch of vectorized states by one step."""

    hyp: Hypothesis
    scheme: DetectionScheme
    dt: float
    dim: int
    propagator_t: np.ndarray
    counting: bool
    click_weight: float
    rate_vec: np.ndarray
    jump_t: np.ndarray
    homodyne: bool
    homodyne_active: bool
    signal_vec: np.ndarray
    kraus_lin_t: np.ndarray
    kraus_quad_t: np.ndarray
    diag: np.ndarray
    herm_perm: np.ndarray


@lru_cache(maxsize=512)
def step_kernel(hyp: Hypothesis, scheme: DetectionScheme, dt: float | None = None) -> StepKernel:
    dt = float(scheme.dt if dt is None else dt)
    d = hyp.dim
    eye = np.eye(d, dtype=complex)
    c = hyp.collapse_ops[0] if hyp.collapse_ops else np.zeros((d, d), dtype=complex)
    cdc = dag(c) @ c
    click_weight = scheme.counting_fraction * scheme.eta
    hom_weight = scheme.homodyne_fraction * scheme.homodyne_eta
    refill = 1.0 - click_weight - hom_weight

    if scheme.has_counting:
        p_max = click_weight * dt * float(np.max(np.linalg.eigvalsh(cdc), initial=0.0))
        if p_max >= 1.0:
            raise CoarseStepError(f"dt too coarse: click probability bound {p_max:.3g} per step")

    b = math.sqrt(hom_weight) * np.exp(-1j * scheme.phi) * c
    idx = np.arange(d * d).reshape(d, d)
    return StepKernel(
        hyp=hyp,
        scheme=scheme,
        dt=dt,
        dim=d,
        propagator_t=np.ascontiguousarray(_propagator(hyp, hyp, refill, dt).T),
        counting=scheme.has_counting,
        click_weight=click_weight,
        # Tr(A rho) = vec(A^T) . vec(rho)
        rate_vec=np.ascontiguousarray(cdc.T.ravel()),
        jump_t=np.ascontiguousarray(_sandwich(c, dag(c)).T),
        homodyne=scheme.has_homodyne,
        homodyne_active=scheme.has_homodyne and hom_weight > 0.0,
        signal_vec=np.ascontiguousarray(2.0 * b.T.ravel()),
        kraus_lin_t=np.ascontiguousarray((_sandwich(b, eye) + _sandwich(eye, dag(b))).T),
        kraus_quad_t=np.ascontiguousarray(_sandwich(b, dag(b)).T),
        diag=np.diag(idx).copy(),
        herm_perm=idx.T.ravel().copy(),
    )


def _finish(k: StepKernel, r: np.ndarray) -> np.ndarray:
    r = 0.5 * (r + r[:, k.herm_perm].conj())
    tr = r[:, k.diag].sum(axis=1).real
    return r / tr[:, None]


def click_probability(k: StepKernel, r: np.ndarray) -> np.ndarray:
    return k.click_weight * k.dt * (r @ k.rate_vec).real


def mean_signal(k: StepKernel, r: np.ndarray) -> np.ndarray:
    """<X_phi> per row, so that E[dY] = <X_phi> dt."""
    return (r @ k.signal_vec).real


def advance_batch(
    k: StepKernel,
    r: np.ndarray,
    logw: np.ndarray,
    dN: np.ndarray | None = None,
    dY: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance vectorized normalized states ``r`` (batch, d*d) by one step.

    Returns the new states, the new log-weights and a mask of rows whose
    homodyne step had to be subdivided.
    """
    logw = logw.copy()
    degenerate = np.zeros(len(r), dtype=bool)
    with np.errstate(divide="ignore"):
        if k.counting:
            p = click_probability(k, r)
            logw += np.log(np.where(dN, p, 1.0 - p))
        if k.homodyne_active:
            f = 1.0 + mean_signal(k, r) * dY
            degenerate = f <= 0.0
            logw += np.log(np.where(degenerate, 1.0, f))
    r_in = r
    r = r @ k.propagator_t
    # with zero click weight the backaction term vanishes and dN is inert
    if k.counting and k.click_weight > 0.0 and dN.any():
        rj = r @ k.jump_t
        ok = dN & (rj[:, k.diag].sum(axis=1).real > 0.0)
        r = np.where(ok[:, None], rj, r)
    if k.homodyne_active:
        dy = dY[:, None]
        r = r + dy * (r @ k.kraus_lin_t) + (dy * dy) * (r @ k.kraus_quad_t)
    r = _finish(k, r)
    if degenerate.any():
        for i in np.flatnonzero(degenerate):
            r[i], logw[i] = _subdivided_step(k, r_in[i], logw[i], dN, dY, i)
    return r, logw, degenerate


def _subdivided_step(k: StepKernel, r0: np.ndarray, logw0: float, dN, dY, i: int):
    """Retry a homodyne step whose likelihood factor is not positive.

    The step is split into 2, 4, ... equal substeps sharing dY evenly.  The
    counting factor keeps its full-step value and any click is applied in
    the first substep.
    """
    click = bool(dN[i]) if k.counting and k.click_weight > 0.0 else False
    base = logw0
    if k.counting:
        p = click_probability(k, r0[None])[0]
        with np.errstate(divide="ignore"):
            base += (math.log(p) if p > 0 else -math.inf) if dN[i] else math.log1p(-p)
    for halvings in range(1, MAX_HALVINGS + 1):
        n = 2**halvings
        sub = step_kernel(k.hyp, k.scheme, k.dt / n)
        dy = dY[i] / n
        r = r0[None]
        lw = base
        for s in range(n):
            f = 1.0 + mean_signal(sub, r)[0] * dy
            if f <= 0.0:
                break
            lw += math.log(f)
            r = r @ sub.propagator_t
            if s == 0 and click:
                rj = r @ sub.jump_t
                if rj[0, sub.diag].sum().real > 0.0:
                    r = rj
            r = r + dy * (r @ sub.kraus_lin_t) + dy * dy * (r @ sub.kraus_quad_t)
            r = _finish(sub, r)
        else:
            return r[0], lw
    raise DegenerateStepError(f"homodyne step degenerate after {MAX_HALVINGS} halvings")


# -- single-state API -------------------------------------------------------


def _vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(1, -1)


def monitored_step(cond: ConditionalState, hyp: Hypothesis, scheme: DetectionScheme, step: SignalStep) -> ConditionalState:
    """One conditional update for any detection scheme."""
    k = step_kernel(hyp, scheme)
    d = hyp.dim
    if cond.rho.shape != (d, d):
        raise ValueError(f"dimension mismatch: state {cond.rho.shape} vs hypothesis dim {d}")
    dN = np.array([bool(step.dN)]) if k.counting else None
    if k.counting and step.dN not in (0, 1, None):
        raise ValueError(f"dN must be 0 or 1, got {step.dN}")
    dY = np.array([float(step.dY or 0.0)]) if k.homodyne else None
    r, lw, deg = advance_batch(k, _vec(cond.rho), np.array([cond.log_weight]), dN, dY)
    return ConditionalState(
        rho=r[0].reshape(d, d),
        log_weight=float(lw[0]),
        degenerate_steps=cond.degenerate_steps + int(deg[0]),
    )


def counting_step(cond: ConditionalState, hyp: Hypothesis, eta: float, dN: int, dt: float) -> ConditionalState:
    scheme = DetectionScheme("counting", eta=eta, dt=dt)
    return monitored_step(cond, hyp, scheme, SignalStep(dN=dN))


def homodyne_step(cond: ConditionalState, hyp: Hypothesis, eta: float, phi: float, dY: float, dt: float) -> ConditionalState:
    scheme = DetectionScheme("homodyne", eta=eta, phi=phi, dt=dt)
    return monitored_step(cond, hyp, scheme, SignalStep(dY=dY))


def hybrid_step(cond: ConditionalState, hyp: Hypothesis, scheme: DetectionScheme, step: SignalStep) -> ConditionalState:
    if scheme.kind != "hybrid":
        raise ValueError(f"hybrid_step needs a hybrid scheme, got {scheme.kind!r}")
    return monitored_step(cond, hyp, scheme, step)


def lindblad_step(state: np.ndarray, hyp: Hypothesis, dt: float) -> np.ndarray:
    """Advance an unmonitored density matrix by dt."""
    d = hyp.dim
    if state.shape != (d, d):
        raise ValueError(f"dimension mismatch: state {state.shape} vs hypothesis dim {d}")
    r = lindblad_propagator(hyp, dt) @ np.asarray(state, dtype=complex).ravel()
    rho = r.reshape(d, d)
    return 0.5 * (rho + dag(rho))


def lindblad_evolve(state: np.ndarray, hyp: Hypothesis, steps: np.ndarray, dt: float) -> np.ndarray:
    """States after each of the (sorted) step counts in ``steps``."""
    d = hyp.dim
    p = lindblad_propagator(hyp, dt)
    r = np.asarray(state, dtype=complex).ravel()
    out = np.empty((len(steps), d, d), dtype=complex)
    n = 0
    for i, target in enumerate(steps):
        while n < target:
            r = p @ r
            rho = r.reshape(d, d)
            r = (0.5 * (rho + dag(rho))).ravel()
            n += 1
        out[i] = r.reshape(d, d)
    return out


def steady_state(hyp: Hypothesis) -> np.ndarray:
    """Unique stationary state of the Lindblad generator."""
    g = lindblad_generator(hyp)
    scale = max(1.0, float(np.linalg.norm(g, 2)))
    ns = null_space(g, rcond=STEADY_STATE_TOL)
    if ns.shape[1] != 1:
        raise ValueError(f"non-unique steady state (null space dimension {ns.shape[1]})")
    d = hyp.dim
    rho = ns[:, 0].reshape(d, d)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + dag(rho))
    if np.max(np.abs(g @ rho.ravel())) > STEADY_STATE_TOL * scale:
        raise ValueError("non-unique steady state (null vector not stationary)")
    return rho


def two_sided_step(ov: OverlapState, hyp0: Hypothesis, hyp1: Hypothesis, dt: float) -> OverlapState:
    """Advance the overlap matrix rho01 whose trace is <psi0(t)|psi1(t)>."""
    d = hyp0.dim
    p = _propagator(hyp0, hyp1, 1.0, float(dt))
    return OverlapState((p @ np.asarray(ov.rho01, dtype=complex).ravel()).reshape(d, d))


@dataclass
class Ensemble:
    """Records and selected conditional states of a batch of trajectories.

    ``dN``/``dY`` have shape (n_steps, batch); ``states[i]`` holds the
    normalized true-hypothesis states after ``steps[i]`` steps, shape
    (batch, d, d).
    """

    dN: np.ndarray | None
    dY: np.ndarray | None
    steps: np.ndarray
    states: np.ndarray


def simulate_ensemble(
    true_hyp: Hypothesis,
    initial: np.ndarray,
    scheme: DetectionScheme,
    n_steps: int,
    seed: int,
    stream_ids: list[tuple[int, ...]],
    keep_steps=(),
) -> Ensemble:
    """Sample records for several trajectories at once, trajectory i using stream_ids[i]."""
    k = step_kernel(true_hyp, scheme)
    d = true_hyp.dim
    B = len(stream_ids)
    keep = np.unique(np.asarray(keep_steps, dtype=int))
    if keep.size and (keep[0] < 0 or keep[-1] > n_steps):
        raise ValueError("keep_steps must lie in [0, n_steps]")
    noise = TrajectoryNoise(seed, [tuple(i) for i in stream_ids], k.counting, k.homodyne)
    u, z = noise.block(n_steps)
    r = np.repeat(_vec(initial), B, axis=0)
    logw = np.zeros(B)
    dN_col = np.zeros((n_steps, B), dtype=np.int8) if k.counting else None
    dY_col = np.zeros((n_steps, B)) if k.homodyne else None
    states = np.empty((len(keep), B, d, d), dtype=complex)
    slot = {int(n): i for i, n in enumerate(keep)}
    if 0 in slot:
        states[slot[0]] = r.reshape(B, d, d)
    for n in range(n_steps):
        dN, dY = sample_signal(k, r, None if u is None else u[n], None if z is None else z[n])
        if k.counting:
            dN_col[n] = dN
        if k.homodyne:
            dY_col[n] = dY
        r, logw, _ = advance_batch(k, r, logw, dN, dY)
        if n + 1 in slot:
            states[slot[n + 1]] = r.reshape(B, d, d)
    return Ensemble(dN_col, dY_col, keep, states)


def simulate_record(
    true_hyp: Hypothesis,
    initial: np.ndarray,
    scheme: DetectionScheme,
    n_steps: int,
    seed: int,
    stream_id: tuple[int, ...] = (),
) -> TrajectoryRecord:
    """Sample a measurement record with ``true_hyp`` governing the emitter.

    The record is a deterministic function of (true_hyp, initial, scheme,
    seed, stream_id).
    """
    ens = simulate_ensemble(true_hyp, initial, scheme, n_steps, seed, [tuple(stream_id)])
    dN = None if ens.dN is None else ens.dN[:, 0].copy()
    dY = None if ens.dY is None else ens.dY[:, 0].copy()
    return TrajectoryRecord(scheme, n_steps, dN, dY, seed, tuple(stream_id))


def sample_signal(k: StepKernel, r: np.ndarray, u: np.ndarray | None, z: np.ndarray | None):
    """Draw (dN, dY) for a batch of true states from uniforms ``u`` and normals ``z``."""
    dN = dY = None
    if k.counting:
        p = click_probability(k, r)
        if np.any(p > MAX_CLICK_PROBABILITY):
            raise CoarseStepError(f"dt too coarse: click probability {float(np.max(p)):.3g} in one step")
        dN = u < p
    if k.homodyne:
        dY = mean_signal(k, r) * k.dt + math.sqrt(k.dt) * z
    return dN, dY
