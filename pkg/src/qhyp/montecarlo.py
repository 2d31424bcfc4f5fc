"""Seeded Monte Carlo estimation of error-probability curves.

Trajectory k simulated with hypothesis j as the truth draws its noise from
the stream (master_seed, j, k, channel).  Trajectories are processed in
chunks of ``chunk_size``; a chunk is always computed as one vectorized batch,
so the per-trajectory results, and hence the curves, do not depend on the
number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dynamics import CoarseStepError, advance_batch, lindblad_evolve, sample_signal, step_kernel
from .inference import helstrom_error, quantum_bound_curve
from .model import DetectionScheme, HypothesisSet, validate
from .rng import TrajectoryNoise, stream, uniforms

PROJECTION_CHANNEL = 2
NOISE_BLOCK = 500
Z95 = 1.959963984540054


class TrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    hypotheses: HypothesisSet
    scheme: DetectionScheme
    t_final: float
    n_grid: int = 100
    M: int = 1000
    master_seed: int = 0
    with_projection: bool = True
    compute_bound: bool = True
    chunk_size: int = 1000
    sampled_projection: bool = False

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.scheme.dt))

    @property
    def grid_steps(self) -> np.ndarray:
        return np.round(np.linspace(0, self.n_steps, self.n_grid)).astype(int)

    @property
    def times(self) -> np.ndarray:
        return self.grid_steps * self.scheme.dt

    def problems(self) -> list[str]:
        errors = list(validate(self.hypotheses, self.scheme).errors)
        if self.M < 1:
            errors.append(f"M must be at least 1, got {self.M}")
        if self.n_grid < 2:
            errors.append(f"n_grid must be at least 2, got {self.n_grid}")
        if not self.t_final > 0:
            errors.append(f"t_final must be positive, got {self.t_final}")
        elif abs(self.t_final / self.scheme.dt - self.n_steps) > 1e-6:
            errors.append(f"t_final {self.t_final:g} is not a multiple of dt {self.scheme.dt:g}")
        if self.chunk_size < 1:
            errors.append("chunk_size must be positive")
        if not 0 <= self.master_seed < 2**64:
            errors.append("master_seed must be a 64-bit unsigned integer")
        if self.with_projection and len(self.hypotheses) != 2:
            errors.append("final projection is only available for two hypotheses")
        if self.compute_bound and len(self.hypotheses) != 2:
            errors.append("quantum bound is only available for two hypotheses")
        return errors


@dataclass
class ErrorCurve:
    times: np.ndarray
    qe_signal: np.ndarray
    stderr_signal: np.ndarray
    counts: np.ndarray  # counts[t, i, j]: trajectories assigning h_i when h_j is true
    M: int
    priors: np.ndarray
    qe_projection: np.ndarray | None = None
    stderr_projection: np.ndarray | None = None
    qe_bound: np.ndarray | None = None
    qe_unmonitored: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def at(self, t: float) -> int:
        """Index of the grid time closest to t."""
        return int(np.argmin(np.abs(self.times - t)))


# -- per-chunk simulation ---------------------------------------------------


def _record(spec, g, logw, r, j, assigned, proj, proj_u):
    lw = np.stack(logw)
    assigned[g] = np.argmax(lw, axis=0)
    if proj is None:
        return
    d = spec.hypotheses.dim
    post = np.exp(lw - logsumexp(lw, axis=0))
    a = post[0][:, None] * r[0] - post[1][:, None] * r[1]
    a = a.reshape(-1, d, d)
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    if proj_u is None:
        norm = np.sum(np.abs(np.linalg.eigvalsh(a)), axis=-1)
        proj[g] = np.clip(0.5 * (1.0 - norm), 0.0, 0.5)
        return
    w, v = np.linalg.eigh(a)
    rho_true = r[j].reshape(-1, d, d)
    q = np.einsum("bik,bij,bjk->bk", v.conj(), rho_true, v).real.clip(0.0)
    cq = np.cumsum(q, axis=1)
    k = np.minimum(np.sum(cq < proj_u[g][:, None] * cq[:, -1:], axis=1), d - 1)
    lam = w[np.arange(len(k)), k]
    decision = np.where(lam > 0, 0, np.where(lam < 0, 1, np.where(post[0] >= post[1], 0, 1)))
    proj[g] = (decision != j).astype(float)


def _run_chunk(spec: ExperimentSpec, j: int, k0: int, k1: int):
    hs = spec.hypotheses
    scheme = spec.scheme
    kernels = [step_kernel(h, scheme) for h in hs]
    kt = kernels[j]
    B = k1 - k0
    d = hs.dim
    rho0 = np.asarray(hs.initial_state, dtype=complex).reshape(1, d * d)
    r = [np.repeat(rho0, B, axis=0) for _ in hs]
    with np.errstate(divide="ignore"):
        logw = [np.full(B, np.log(h.prior)) for h in hs]

    n_grid = spec.n_grid
    slots: dict[int, list[int]] = {}
    for g, n in enumerate(spec.grid_steps):
        slots.setdefault(int(n), []).append(g)
    assigned = np.empty((n_grid, B), dtype=np.int8)
    proj = np.empty((n_grid, B)) if spec.with_projection else None
    proj_u = None
    if spec.with_projection and spec.sampled_projection:
        proj_u = np.stack(
            [uniforms(stream(spec.master_seed, j, k, PROJECTION_CHANNEL), n_grid) for k in range(k0, k1)], axis=1
        )

    for g in slots.get(0, []):
        _record(spec, g, logw, r, j, assigned, proj, proj_u)

    noise = TrajectoryNoise(spec.master_seed, [(j, k) for k in range(k0, k1)], kt.counting, kt.homodyne)
    n_steps = spec.n_steps
    n = 0
    while n < n_steps:
        S = min(NOISE_BLOCK, n_steps - n)
        u, z = noise.block(S)
        for s in range(S):
            try:
                dN, dY = sample_signal(kt, r[j], None if u is None else u[s], None if z is None else z[s])
            except CoarseStepError as exc:
                raise TrajectoryError(
                    f"trajectory failed (master_seed={spec.master_seed}, true hypothesis={j}, "
                    f"trajectories {k0}..{k1 - 1}, step {n + 1}): {exc}"
                ) from exc
            for h, k in enumerate(kernels):
                r[h], logw[h], _ = advance_batch(k, r[h], logw[h], dN, dY)
            n += 1
            for g in slots.get(n, []):
                _record(spec, g, logw, r, j, assigned, proj, proj_u)
    return j, k0, assigned, proj


def _run_chunk_star(args):
    try:
        return _run_chunk(*args)
    except TrajectoryError:
        raise
    except Exception as exc:
        spec, j, k0, k1 = args
        raise TrajectoryError(
            f"trajectory failed (master_seed={spec.master_seed}, true hypothesis={j}, "
            f"trajectories {k0}..{k1 - 1}): {exc}"
        ) from exc


# -- public API -------------------------------------------------------------


def unmonitored_error_curve(hset: HypothesisSet, t_grid, dt: float = 1e-3) -> np.ndarray:
    """Error of the optimal measurement on the unmonitored (Lindblad) candidate states."""
    if len(hset) != 2:
        raise ValueError("unmonitored error curve needs exactly two hypotheses")
    steps = np.round(np.asarray(t_grid, dtype=float) / dt).astype(int)
    if np.any(np.diff(steps) < 0):
        raise ValueError("time grid must be non-decreasing")
    h0, h1 = hset.hypotheses
    s0 = lindblad_evolve(hset.initial_state, h0, steps, dt)
    s1 = lindblad_evolve(hset.initial_state, h1, steps, dt)
    return np.array([helstrom_error(h0.prior, a, h1.prior, b) for a, b in zip(s0, s1)])


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ErrorCurve:
    problems = spec.problems()
    if problems:
        raise ValueError("; ".join(problems))
    hs = spec.hypotheses
    H = len(hs)
    priors = hs.priors
    items = [
        (spec, j, k0, min(k0 + spec.chunk_size, spec.M))
        for j in range(H)
        for k0 in range(0, spec.M, spec.chunk_size)
    ]
    if workers <= 1 or len(items) == 1:
        results = [_run_chunk_star(it) for it in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk_star, items))

    n_grid = spec.n_grid
    M = spec.M
    assigned = {j: np.empty((n_grid, M), dtype=np.int8) for j in range(H)}
    proj = {j: np.empty((n_grid, M)) for j in range(H)} if spec.with_projection else None
    for j, k0, a, p in results:
        assigned[j][:, k0 : k0 + a.shape[1]] = a
        if proj is not None:
            proj[j][:, k0 : k0 + a.shape[1]] = p

    counts = np.zeros((n_grid, H, H), dtype=np.int64)
    for j in range(H):
        for i in range(H):
            counts[:, i, j] = np.sum(assigned[j] == i, axis=1)
    wrong = np.stack([M - counts[:, j, j] for j in range(H)], axis=1) / M
    qe_signal = wrong @ priors
    stderr_signal = np.sqrt((wrong * (1.0 - wrong) / M) @ priors**2)

    curve = ErrorCurve(
        times=spec.times,
        qe_signal=qe_signal,
        stderr_signal=stderr_signal,
        counts=counts,
        M=M,
        priors=priors,
    )
    if proj is not None:
        means = np.array([[math.fsum(proj[j][g]) / M for j in range(H)] for g in range(n_grid)])
        var = np.array(
            [[math.fsum((proj[j][g] - means[g, j]) ** 2) / M for j in range(H)] for g in range(n_grid)]
        )
        curve.qe_projection = means @ priors
        curve.stderr_projection = np.sqrt((var / M) @ priors**2)
    if H == 2:
        curve.qe_unmonitored = unmonitored_error_curve(hs, spec.times, spec.scheme.dt)
        if spec.compute_bound:
            curve.qe_bound = quantum_bound_curve(hs[0], hs[1], hs.initial_state, spec.times)
    return curve


def summarize(curve: ErrorCurve) -> list[dict]:
    """One row per grid time with point estimates and 95% intervals.

    Signal-only intervals are normal approximations, replaced by the
    rule-of-three bound 3/M when no (or every) trajectory was misassigned.
    """
    rows = []
    H = len(curve.priors)
    for g, t in enumerate(curve.times):
        q = float(curve.qe_signal[g])
        se = float(curve.stderr_signal[g])
        n_wrong = int(sum(curve.M - curve.counts[g, j, j] for j in range(H)))
        if n_wrong == 0:
            lo, hi = 0.0, min(1.0, 3.0 / curve.M)
        elif n_wrong == H * curve.M:
            lo, hi = max(0.0, 1.0 - 3.0 / curve.M), 1.0
        else:
            lo, hi = max(0.0, q - Z95 * se), min(1.0, q + Z95 * se)
        row = {
            "t": float(t),
            "qe_signal": q,
            "stderr_signal": se,
            "ci_signal": (lo, hi),
            "n_wrong": n_wrong,
        }
        if curve.qe_projection is not None:
            qp = float(curve.qe_projection[g])
            sp = float(curve.stderr_projection[g])
            row.update(
                qe_projection=qp,
                stderr_projection=sp,
                ci_projection=(max(0.0, qp - Z95 * sp), min(1.0, qp + Z95 * sp)),
            )
        if curve.qe_bound is not None:
            row["qe_bound"] = float(curve.qe_bound[g])
        if curve.qe_unmonitored is not None:
            row["qe_unmonitored"] = float(curve.qe_unmonitored[g])
        rows.append(row)
    return rows
