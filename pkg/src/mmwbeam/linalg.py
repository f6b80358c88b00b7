"""Complex linear-algebra kernel shared by the rest of the library.

Thin contract-enforcing wrappers around LAPACK (through numpy) with a
deterministic phase convention, plus the Rayleigh quotient. Every function
is pure and safe to call from parallel workers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SvdResult", "EighResult", "svd", "eigh", "rayleigh_quotient"]


def as_complex_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex128 array or raise ValueError."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class SvdResult:
    """Full decomposition m = u @ diag(s) @ v.conj().T.

    Columns of ``v`` are the right singular vectors; ``s`` is sorted
    non-increasing. Each right singular vector has its largest-magnitude
    entry rotated to be real and non-negative (first such entry on ties),
    with the paired left vector rotated to match.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class EighResult:
    """Hermitian eigendecomposition with eigenvalues sorted non-increasing.

    Columns of ``vectors`` are unit-norm eigenvectors matching ``values``.
    """

    values: np.ndarray
    vectors: np.ndarray


def _fix_column_phases(mat: np.ndarray) -> np.ndarray:
    """Phase factor per column that makes its largest-|.| entry real >= 0."""
    idx = np.argmax(np.abs(mat), axis=0)
    lead = mat[idx, np.arange(mat.shape[1])]
    mags = np.abs(lead)
    # unitary columns cannot be all-zero; guard anyway
    phases = np.where(mags > 0, lead / np.where(mags > 0, mags, 1.0), 1.0)
    return phases


def svd(m) -> SvdResult:
    """Full SVD of a complex matrix.

    Raises numpy.linalg.LinAlgError if the underlying iteration fails to
    converge (never returns silent garbage).
    """
    a = as_complex_matrix(m)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    v = vh.conj().T
    k = min(a.shape)
    phases = _fix_column_phases(v)
    v = v * phases.conj()[np.newaxis, :]
    # rotate paired left vectors so u @ diag(s) @ v^H is unchanged
    u[:, :k] = u[:, :k] * phases.conj()[np.newaxis, :k]
    # remaining left columns only span the orthogonal complement; give them
    # the same convention for determinism
    if u.shape[1] > k:
        tail = _fix_column_phases(u[:, k:])
        u[:, k:] = u[:, k:] * tail.conj()[np.newaxis, :]
    return SvdResult(u=u, s=s, v=v)


def _check_hermitian(a: np.ndarray) -> np.ndarray:
    err = np.max(np.abs(a - a.conj().T))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(a))))
    if err > tol:
        raise ValueError(f"matrix is not Hermitian: asymmetry {err:.3e} > tol {tol:.3e}")
    return (a + a.conj().T) / 2.0


def eigh(m) -> EighResult:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    The input must be Hermitian within 1e-12 (relative to its largest
    entry); it is symmetrized internally before the solve.
    """
    a = as_complex_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError("eigh needs a square matrix")
    sym = _check_hermitian(a)
    w, q = np.linalg.eigh(sym)
    return EighResult(values=w[::-1].copy(), vectors=q[:, ::-1].copy())


def rayleigh_quotient(m, x) -> float:
    """x^H m x / x^H x for Hermitian m; bounded above by the top eigenvalue."""
    a = as_complex_matrix(m)
    sym = _check_hermitian(a)
    vec = np.asarray(x, dtype=np.complex128).reshape(-1)
    nrm2 = float(np.vdot(vec, vec).real)
    if nrm2 == 0.0:
        raise ValueError("rayleigh_quotient of the zero vector is undefined")
    return float(np.vdot(vec, sym @ vec).real) / nrm2
