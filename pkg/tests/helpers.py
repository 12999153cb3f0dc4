"""Shared construction helpers for the test suite.

The Jordan-form constructions use unimodular integer similarity transforms,
so the built matrices are exact in floating point and their true eigenvalues
and chain structure are known by construction.
"""

import numpy as np
from scipy.linalg import block_diag

from mtident import LtiPair, TargetSet, noise_model, schedule_key
from mtident.linalg import numerical_rank, observability_stack, spectral_radius


def unimodular(rng, n, ops=None, max_entry=40):
    """Random integer matrix with determinant +-1 (so an exact integer inverse)."""
    T = np.eye(n, dtype=np.int64)
    ops = ops if ops is not None else 3 * n
    done = 0
    for _ in range(50 * ops):
        if done >= ops:
            break
        i, j = rng.integers(n, size=2)
        if i == j:
            continue
        cand = T.copy()
        cand[j] += (1 if rng.integers(2) else -1) * T[i]
        if np.max(np.abs(cand)) > max_entry:
            continue
        T = cand
        done += 1
    return T


def exact_int_inverse(T):
    Tinv = np.rint(np.linalg.inv(T)).astype(np.int64)
    assert np.array_equal(T @ Tinv, np.eye(T.shape[0], dtype=np.int64))
    return Tinv


def jordan_matrix(spec):
    """Block-diagonal Jordan matrix from [(eigenvalue, chain_length), ...]."""
    blocks = []
    for lam, r in spec:
        blocks.append(lam * np.eye(r) + np.diag(np.ones(r - 1), 1))
    return block_diag(*blocks)


def matrix_with_jordan_structure(rng, spec, ops=None, max_entry=40):
    """Exact-arithmetic matrix with the given Jordan structure.

    Returns ``(A, T)``: A = T J T^{-1} with integer T, so the columns of T
    are exact Jordan chain vectors (v_1 first within each block). Long chains
    split numerically like eps**(1/r) scaled by cond(T); callers needing many
    well-conditioned defective instances should keep ``max_entry`` small.
    """
    J = jordan_matrix(spec)
    n = J.shape[0]
    T = unimodular(rng, n, ops=ops, max_entry=max_entry)
    A = T.astype(float) @ J @ exact_int_inverse(T).astype(float)
    return A, T.astype(float)


def random_observable_pair(rng, n, m, rho=0.9, attempts=50):
    """Random observable pair with spectral radius near ``rho``.

    The radius is jittered per draw; exact normalization would park every
    real dominant eigenvalue at the same value and silently create shared
    spectra between "independent" pairs.
    """
    for _ in range(attempts):
        A = rng.standard_normal((n, n))
        sr = spectral_radius(A)
        if sr < 1e-9:
            continue
        A *= rho * rng.uniform(0.75, 1.0) / sr
        C = rng.standard_normal((m, n))
        if numerical_rank(observability_stack(A, C, n)) == n:
            return LtiPair(A, C)
    raise AssertionError("failed to draw an observable pair")


def random_target_set(rng, n=3, m=2, l=2, rho=0.9, period=None, key="test-key"):
    pairs = tuple(random_observable_pair(rng, n, m, rho) for _ in range(l))
    return TargetSet(pairs=pairs, period=period if period else 2 * n, key=schedule_key(key))


def spd(rng, n, scale=1.0):
    M = rng.standard_normal((n, n))
    return scale * (M @ M.T) + 1e-3 * scale * np.eye(n)


def standard_noise(rng, n, m, scale=1.0):
    return noise_model(Q=spd(rng, n, scale), R=spd(rng, m, scale))
