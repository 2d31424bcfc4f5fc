"""Small dense complex matrices: Pauli operators, eigendecompositions, norms.

Basis convention used everywhere in the package: index 0 is the ground
state |g>, index 1 is the excited state |e>.  With that ordering

    sigma_z = diag(-1, +1)          (sigma_z|g> = -|g>)
    sigma_x = |g><e| + |e><g|
    sigma_y = i|g><e| - i|e><g|     (sigma_x sigma_y = i sigma_z)
    lowering = |g><e|

All functions accept plain ``numpy`` arrays; a "CMatrix" is any square
complex128 array with finite entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerances shared across the package.
HERMITIAN_TOL = 1e-10
RESOLUTION_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-10
DEGENERACY_TOL = 1e-10

GROUND = 0
EXCITED = 1

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
LOWERING = np.array([[0, 1], [0, 0]], dtype=complex)


class NotHermitianError(ValueError):
    pass


class EigFailedError(ArithmeticError):
    pass


def as_cmatrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a square complex128 array, checking shape and finiteness."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - dag(a)), initial=0.0))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(a) <= tol


def ket(index: int, dim: int = 2) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(index: int, dim: int = 2) -> np.ndarray:
    v = ket(index, dim)
    return np.outer(v, v.conj())


def pure_state(psi) -> np.ndarray:
    """Density matrix of a (not necessarily normalized) state vector."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def expect(a: np.ndarray, rho: np.ndarray) -> complex:
    """Tr(a rho)."""
    a = np.asarray(a)
    rho = np.asarray(rho)
    if a.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {rho.shape}")
    # Tr(AB) = sum_ij A_ij B_ji
    return complex(np.sum(a * rho.T))


@dataclass(frozen=True)
class EigDecomposition:
    """Spectral resolution into rank-1 projectors.

    ``eigenvalues`` are sorted in descending order and ``projectors[k]`` is the
    projector belonging to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    projectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k,kij->ij", self.eigenvalues, self.projectors)


def _check_hermitian(a: np.ndarray) -> None:
    defect = hermiticity_defect(a)
    if defect > HERMITIAN_TOL:
        raise NotHermitianError(f"not Hermitian (max |A - A^dag| = {defect:.3g})")


def _canonical_basis(vectors: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(vectors) fixed by Gram-Schmidt on the unit vectors.

    The eigensolver may return any basis of a degenerate subspace; projecting
    e_0, e_1, ... onto the subspace in order makes the result depend only on
    the subspace itself.
    """
    dim, rank = vectors.shape
    p = vectors @ vectors.conj().T
    basis: list[np.ndarray] = []
    for i in range(dim):
        v = p[:, i].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            basis.append(v / norm)
        if len(basis) == rank:
            break
    if len(basis) != rank:
        raise EigFailedError("eig failed: could not orthonormalize degenerate subspace")
    return np.stack(basis, axis=1)


def hermitian_eigs(a) -> EigDecomposition:
    """Eigenvalues (descending) and rank-1 eigenprojectors of a Hermitian matrix.

    Degenerate eigenspaces are split into projectors along a canonical basis,
    so the output is a deterministic function of the input matrix.
    """
    a = as_cmatrix(a)
    _check_hermitian(a)
    h = hermitian_part(a)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigFailedError(f"eig failed: {exc}") from exc
    w = w[::-1]
    v = v[:, ::-1]
    scale = max(1.0, float(np.max(np.abs(w))))
    cols = []
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[start] - w[stop] <= DEGENERACY_TOL * scale:
            stop += 1
        block = v[:, start:stop]
        cols.append(_canonical_basis(block) if stop - start > 1 else block)
        start = stop
    vecs = np.concatenate(cols, axis=1)
    projectors = np.einsum("ik,jk->kij", vecs, vecs.conj())
    return EigDecomposition(eigenvalues=w.copy(), projectors=projectors)


def trace_norm(a) -> float | np.ndarray:
    """Sum of absolute eigenvalues of a Hermitian matrix, or of a stack of them."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 2:
        _check_hermitian(as_cmatrix(a))
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(a)))))
    defect = float(np.max(np.abs(a - dag(a)), initial=0.0))
    if defect > HERMITIAN_TOL:
        raise NotHermitianError(f"not Hermitian (max |A - A^dag| = {defect:.3g})")
    return np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(a))), axis=-1)


def bloch_vector(a: np.ndarray) -> np.ndarray:
    """(Tr sigma_x a, Tr sigma_y a, Tr sigma_z a) for a 2x2 operator (real parts)."""
    return np.array([expect(s, a).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])


def bloch_direction(a: np.ndarray) -> np.ndarray:
    """Unit vector along :func:`bloch_vector`; zeros when the vector vanishes."""
    r = bloch_vector(a)
    norm = np.linalg.norm(r)
    if norm == 0.0:
        return np.zeros(3)
    return r / norm
