"""Dense symmetric matrix kernels.

Matrices are plain ``numpy`` arrays.  ``sym_matrix`` validates and
symmetrizes; every other routine assumes its input already went through it
(or an equivalent construction) and only re-checks finiteness.

The eigensolver is a cyclic Jacobi method with threshold sweeps, compiled
with numba.  Problem sizes here are tiny (at most a few dozen rows) and the
solver sits inside inner loops of the Gram-space optimizers, so a compiled
kernel matters more than asymptotic complexity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import InvalidMatrix, InvalidRank

EIG_TOL = 1e-10
JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns, orthonormal
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def sym_matrix(a) -> np.ndarray:
    """Return a float copy of ``a`` with ``(a + a.T) / 2`` applied.

    Raises InvalidMatrix for non-square or non-finite input.
    """
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    return 0.5 * (m + m.T)


@numba.njit(cache=True)
def _jacobi(a, off_tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    fro2 = 0.0
    for r in range(n):
        for c in range(n):
            fro2 += a[r, c] * a[r, c]
    target = off_tol * np.sqrt(fro2)
    sweeps = 0
    for sweep in range(max_sweeps):
        off2 = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off2 += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off2) <= target:
            break
        sweeps += 1
        # threshold: skip rotations on entries far below the current average
        thresh = 0.0
        if sweep < 3:
            thresh = 0.2 * np.sqrt(off2) / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for k in range(n):
        w[k] = a[k, k]
    return w, v, sweeps


def eig_sym(m: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, values sorted descending.

    Ties keep the order in which the Jacobi sweep left them (stable sort), so
    the result is fully deterministic for a given input.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix("matrix has non-finite entries")
    if m.shape[0] == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    w, v, sweeps = _jacobi(np.ascontiguousarray(m), JACOBI_OFF_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], v[:, order], sweeps)


def lambda_min(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector for it."""
    ed = eig_sym(m)
    return float(ed.values[-1]), ed.vectors[:, -1]


def psd_project(m: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero."""
    ed = eig_sym(m)
    w = np.maximum(ed.values, 0.0)
    return sym_matrix((ed.vectors * w) @ ed.vectors.T)


def psd_project_rank_capped(m: np.ndarray, r: int) -> np.ndarray:
    """Keep the ``r`` largest eigenvalues (clamped at zero), drop the rest."""
    n = np.shape(m)[0]
    if not 1 <= r <= n:
        raise InvalidRank(f"rank cap {r} outside [1, {n}]")
    ed = eig_sym(m)
    w = np.maximum(ed.values[:r], 0.0)
    u = ed.vectors[:, :r]
    return sym_matrix((u * w) @ u.T)


def rank_eps(m: np.ndarray, tol: float = 1e-9) -> int:
    """Number of eigenvalues with ``|lambda| > tol * max(1, lambda_max)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    ed = eig_sym(m)
    if ed.values.size == 0:
        return 0
    cut = tol * max(1.0, float(ed.values[0]))
    return int(np.count_nonzero(np.abs(ed.values) > cut))


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))
