"""Shared numerical linear-algebra helpers.

Rank and null-space decisions are all SVD-based with the conventional
tolerance ``max(rows, cols) * eps * sigma_max`` unless a caller overrides it.
"""

from __future__ import annotations

import numpy as np

from .errors import ModelError

EPS = float(np.finfo(float).eps)


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetric part of a square matrix."""
    return 0.5 * (M + M.T)


def _svd_tol(M: np.ndarray, s: np.ndarray, tol, rtol) -> float:
    if tol is not None:
        return float(tol)
    smax = s[0] if s.size else 0.0
    if rtol is not None:
        return float(rtol) * smax
    return max(M.shape) * EPS * smax


def numerical_rank(M: np.ndarray, tol: float | None = None, rtol: float | None = None) -> int:
    """Numerical rank via singular values above ``tol`` (or the default)."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > _svd_tol(M, s, tol, rtol)))


def nullity(M: np.ndarray, tol: float | None = None, rtol: float | None = None) -> int:
    """Dimension of the (right) null space; always ``cols - rank``."""
    M = np.atleast_2d(np.asarray(M))
    return M.shape[1] - numerical_rank(M, tol=tol, rtol=rtol)


def nullspace(M: np.ndarray, tol: float | None = None, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the right null space, one column per dimension."""
    M = np.atleast_2d(np.asarray(M))
    if M.size == 0:
        return np.eye(M.shape[1], dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M)
    cutoff = _svd_tol(M, s, tol, rtol)
    rank = int(np.sum(s > cutoff))
    return Vh[rank:].conj().T


def orth(M: np.ndarray, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the column span."""
    M = np.atleast_2d(np.asarray(M))
    if M.shape[1] == 0:
        return M.copy()
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    cutoff = _svd_tol(M, s, None, rtol)
    return U[:, : int(np.sum(s > cutoff))]


def orth_complement(B: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of span(B) in R^n (or C^n)."""
    B = np.atleast_2d(np.asarray(B))
    if B.shape[1] == 0:
        return np.eye(n, dtype=float)
    if B.shape[0] != n:
        raise ValueError(f"basis has {B.shape[0]} rows, expected {n}")
    # rows of B^H span the row space; its null space is the complement
    return nullspace(B.conj().T)


def psd_factor(M: np.ndarray, tol: float | None = None, name: str = "matrix") -> np.ndarray:
    """Factor ``L`` with ``L @ L.T`` equal to the PSD part of symmetric ``M``.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero (``tol`` defaults to
    ``1e-10 * ||M||``); anything below ``-tol`` raises :class:`ModelError`.
    """
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eigh(sym(M))
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if tol is None:
        tol = 1e-10 * scale
    if w.size and w.min() < -tol:
        raise ModelError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def inv_sqrt_psd(M: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """Symmetric inverse square root, eigenvalues floored at ``floor``."""
    M = np.asarray(M, dtype=float)
    w, V = np.linalg.eigh(sym(M))
    w = np.maximum(w, floor)
    return (V / np.sqrt(w)) @ V.T


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(A)))))


def observability_stack(A: np.ndarray, C: np.ndarray, steps: int) -> np.ndarray:
    """Stack ``[C; C A; ...; C A^(steps-1)]`` for a fixed pair."""
    A = np.atleast_2d(np.asarray(A))
    C = np.atleast_2d(np.asarray(C))
    if steps < 1:
        raise ValueError("steps must be >= 1")
    blocks = [C]
    row = C
    for _ in range(steps - 1):
        row = row @ A
        blocks.append(row)
    return np.vstack(blocks)
