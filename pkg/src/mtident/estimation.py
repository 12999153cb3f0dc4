"""State estimation under the switching schedule.

Three layers:

* :class:`CentralKalmanFilter` — the standard time-varying Kalman filter on
  the full output vector, producing whitened residues
  ``z_k = P_yy^{-1/2} (y_k - C_k xhat_k^-)``.
* :func:`bias_recursion` — the exact, noise-free propagation of an additive
  sensor attack through the filter: the difference between an attacked and a
  clean run with common noise is a deterministic linear recursion in the
  injected values.
* Per-sensor reduced-order filters (:func:`kalman_decomposition`,
  :class:`LocalFilterBank`) with exact cross-covariances, fused each step by
  a minimum-variance unbiased combiner (:class:`FusionEstimator`). Local
  filters require each sensor's unobservable subspace to be the same under
  every configuration; the moving target is designed so switching changes
  dynamics but not which directions a sensor can see.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DecompositionError, FilterError, ModelError
from .linalg import (
    inv_sqrt_psd,
    nullspace,
    numerical_rank,
    observability_stack,
    orth_complement,
    sym,
)
from .system_model import AttackSet, LtiPair, NoiseModel, TargetSet


# ---------------------------------------------------------------------------
# central filter


@dataclass
class CentralStep:
    """One filter step: whitened residue, posterior estimate, and diagnostics."""

    residue: np.ndarray
    x_post: np.ndarray
    innovation: np.ndarray
    innovation_cov: np.ndarray
    gain: np.ndarray
    P_prior: np.ndarray


class CentralKalmanFilter:
    """Time-varying Kalman filter over the full (or an active subset of) sensors.

    Update with the step-k pair, then predict with the same pair:

        P_yy = C P C' + R,    K = P C' P_yy^{-1}
        z    = P_yy^{-1/2} (y - C xhat^-)
        xhat = xhat^- + K (y - C xhat^-)
        P^+  = P - K C P
        xhat^- <- A xhat,   P <- A P^+ A' + Q

    The inverse square root uses a symmetric eigendecomposition with
    eigenvalues floored at ``sqrt_floor``. ``mean_offset`` shifts the initial
    predicted state by a known amount (used by the scenario engine to run the
    filter in error coordinates).
    """

    def __init__(
        self,
        noise: NoiseModel,
        mean_offset: np.ndarray | None = None,
        sqrt_floor: float = 1e-12,
    ):
        self.noise = noise
        self.n = noise.n
        self.m = noise.m
        self.x_prior = noise.x0_mean.copy()
        if mean_offset is not None:
            self.x_prior = self.x_prior + np.asarray(mean_offset, dtype=float).reshape(self.n)
        self.P_prior = noise.P0.copy()
        self.sqrt_floor = sqrt_floor
        self.k = 0

    def _active(self, pair: LtiPair, active):
        if active is None:
            return pair.C, self.noise.R
        idx = list(active)
        return pair.C[idx], self.noise.R[np.ix_(idx, idx)]

    def step_covariance(self, pair: LtiPair, active=None):
        """Advance the attack-free Riccati recursion only; returns
        ``(gain, P_yy_inv_sqrt, C_active, P_prior_used, P_yy)``."""
        C, R = self._active(pair, active)
        P = self.P_prior
        Pyy = sym(C @ P @ C.T + R)
        try:
            cf = cho_factor(Pyy)
        except np.linalg.LinAlgError as exc:  # impossible with R > 0
            raise FilterError("innovation covariance lost positive definiteness") from exc
        K = cho_solve(cf, C @ P).T
        P_used = P.copy()
        P_post = sym(P - K @ C @ P)
        self.P_prior = sym(pair.A @ P_post @ pair.A.T + self.noise.Q)
        self.k += 1
        return K, inv_sqrt_psd(Pyy, self.sqrt_floor), C, P_used, Pyy

    def step(self, pair: LtiPair, y, active=None) -> CentralStep:
        """Full measurement update + prediction with the step-k configuration."""
        y = np.asarray(y, dtype=float).reshape(-1)
        x = self.x_prior
        K, Pyy_inv_sqrt, C, P_used, Pyy = self.step_covariance(pair, active)
        if y.shape[0] != C.shape[0]:
            raise ModelError(f"measurement has {y.shape[0]} rows, expected {C.shape[0]}")
        innov = y - C @ x
        z = Pyy_inv_sqrt @ innov
        x_post = x + K @ innov
        self.x_prior = pair.A @ x_post
        return CentralStep(
            residue=z,
            x_post=x_post,
            innovation=innov,
            innovation_cov=Pyy,
            gain=K,
            P_prior=P_used,
        )

    def shift_prediction(self, delta: np.ndarray) -> None:
        """Add a known offset to the current predicted state.

        Models a known additive input between steps; the scenario engine uses
        it to feed process noise into an error-coordinate run.
        """
        self.x_prior = self.x_prior + np.asarray(delta, dtype=float).reshape(self.n)


@dataclass(frozen=True)
class BiasTrace:
    """Deterministic attack propagation: estimation-error bias and residue bias
    per step."""

    delta_e: np.ndarray  # (T, n)
    delta_z: np.ndarray  # (T, m)


def bias_recursion(
    ts: TargetSet,
    schedule,
    noise: NoiseModel,
    attack: AttackSet,
    d,
) -> BiasTrace:
    """Propagate an additive sensor attack through the central filter.

    With gains and covariances from the attack-free Riccati recursion and
    prior bias ``b_k = A_{k-1} de_{k-1}`` (``b_0 = 0``):

        dz_k = P_yy^{-1/2} (C_k b_k + D d_k)
        de_k = b_k - K_k (C_k b_k + D d_k)

    By linearity this equals the exact difference between an attacked and a
    clean filter run sharing every noise realization.
    """
    schedule = np.asarray(schedule, dtype=np.int64).reshape(-1)
    T = schedule.size
    dvals = np.asarray(d, dtype=float)
    if dvals.ndim == 1:
        dvals = dvals.reshape(-1, 1)
    if dvals.shape != (T, attack.size):
        raise ModelError(f"attack values have shape {dvals.shape}, expected ({T}, {attack.size})")
    filt = CentralKalmanFilter(noise)
    b = np.zeros(ts.n)
    de = np.empty((T, ts.n))
    dz = np.empty((T, ts.m))
    for k in range(T):
        pair = ts.pairs[schedule[k]]
        K, Pyy_inv_sqrt, C, _, _ = filt.step_covariance(pair)
        a = attack.D @ dvals[k]
        cb = C @ b + a
        dz[k] = Pyy_inv_sqrt @ cb
        de[k] = b - K @ cb
        b = pair.A @ de[k]
    return BiasTrace(delta_e=de, delta_z=dz)


# ---------------------------------------------------------------------------
# per-sensor decomposition


@dataclass(frozen=True)
class SensorDecomposition:
    """Observability decomposition of one sensor, shared across configurations.

    ``T_uo`` spans the sensor's unobservable subspace (identical for every
    configuration by assumption, verified numerically), ``T_o`` its
    orthogonal complement; ``[T_uo T_o]`` is orthogonal so the similarity
    transform has condition number 1. ``A_red[j] = T_o' A_j T_o`` and
    ``C_red[j] = C_j[sensor] T_o`` form the reduced observable pair of
    configuration ``j``.
    """

    sensor: int
    T_uo: np.ndarray
    T_o: np.ndarray
    A_red: tuple[np.ndarray, ...]
    C_red: tuple[np.ndarray, ...]

    @property
    def n_obs(self) -> int:
        return self.T_o.shape[1]

    @property
    def n_unobs(self) -> int:
        return self.T_uo.shape[1]


def check_common_nullspace(ts: TargetSet, sensor: int, rank_tol: float | None = None) -> bool:
    """True when every configuration gives the sensor the same unobservable
    subspace."""
    try:
        _common_nullspace_basis(ts, sensor, rank_tol)
    except DecompositionError:
        return False
    return True


def _common_nullspace_basis(ts: TargetSet, sensor: int, rank_tol: float | None):
    stacks = [
        observability_stack(p.A, p.C[[sensor]], ts.n) for p in ts.pairs
    ]
    N0 = nullspace(stacks[0], tol=rank_tol)
    dim = N0.shape[1]
    for j, M in enumerate(stacks):
        scale = float(np.linalg.norm(M, np.inf)) + 1.0
        if nullspace(M, tol=rank_tol).shape[1] != dim:
            raise DecompositionError(
                f"sensor {sensor}: unobservable dimension differs for configuration {j}"
            )
        if dim and float(np.max(np.abs(M @ N0))) > 1e-8 * scale:
            raise DecompositionError(
                f"sensor {sensor}: unobservable subspace differs for configuration {j}"
            )
    return N0


def kalman_decomposition(
    ts: TargetSet, sensor: int, rank_tol: float | None = None
) -> SensorDecomposition:
    """Build the per-sensor reduced observable pairs for every configuration.

    Raises :class:`DecompositionError` when the unobservable subspace is not
    common to all configurations or a reduced pair fails observability.
    """
    if not 0 <= sensor < ts.m:
        raise ValueError(f"sensor index {sensor} out of range")
    T_uo = _common_nullspace_basis(ts, sensor, rank_tol)
    T_o = orth_complement(T_uo, ts.n)
    if T_o.shape[1] == 0:
        raise DecompositionError(f"sensor {sensor} observes nothing")
    A_red, C_red = [], []
    for j, p in enumerate(ts.pairs):
        # invariance of the unobservable subspace makes the block triangular
        if T_uo.shape[1]:
            leak = float(np.max(np.abs(T_o.T @ p.A @ T_uo)))
            if leak > 1e-7 * (1.0 + float(np.linalg.norm(p.A, np.inf))):
                raise DecompositionError(
                    f"sensor {sensor}: unobservable subspace of configuration {j} "
                    f"is not invariant (leak {leak:.3e})"
                )
        Ar = T_o.T @ p.A @ T_o
        Cr = p.C[sensor] @ T_o
        if numerical_rank(observability_stack(Ar, Cr.reshape(1, -1), Ar.shape[0]), tol=rank_tol) < Ar.shape[0]:
            raise DecompositionError(
                f"sensor {sensor}: reduced pair of configuration {j} is unobservable"
            )
        A_red.append(Ar)
        C_red.append(Cr)
    return SensorDecomposition(
        sensor=sensor,
        T_uo=T_uo,
        T_o=T_o,
        A_red=tuple(A_red),
        C_red=tuple(C_red),
    )


# ---------------------------------------------------------------------------
# local filter bank with exact cross-covariances


@dataclass
class BankStep:
    """Per-sensor residues and posterior state of the bank at one step.

    ``zeta_post[s]`` and ``P_post[(s1, s2)]`` (for ``s1 <= s2``) are the
    posterior reduced estimates and their exact joint covariance blocks.
    """

    residues: dict[int, float]
    zeta_post: dict[int, np.ndarray]
    P_post: dict[tuple[int, int], np.ndarray]


class LocalFilterBank:
    """One scalar-measurement Kalman filter per sensor plus all cross-covariances.

    Each sensor filters its own output on its reduced observable coordinates;
    because the filters share process noise and priors, their errors are
    correlated, and the fusion step needs the *joint* covariance. The
    cross blocks evolve exactly:

        P^+_{s1,s2} = (I - K_1 C_1) P^-_{s1,s2} (I - K_2 C_2)' + K_1 R_{s1,s2} K_2'
        P^-_{s1,s2} <- A_1 P^+_{s1,s2} A_2' + Q_{s1,s2}

    with ``Q_{s1,s2} = T_1' Q T_2`` the reduced process-noise cross block.
    """

    def __init__(
        self,
        ts: TargetSet,
        noise: NoiseModel,
        sensors=None,
        decomps: dict[int, SensorDecomposition] | None = None,
        mean_offset: np.ndarray | None = None,
    ):
        if (noise.n, noise.m) != (ts.n, ts.m):
            raise ModelError("noise model dimensions do not match the target set")
        self.ts = ts
        self.noise = noise
        self.sensors = tuple(sensors) if sensors is not None else tuple(range(ts.m))
        self.decomps = decomps or {s: kalman_decomposition(ts, s) for s in self.sensors}
        for s in self.sensors:
            if s not in self.decomps:
                self.decomps[s] = kalman_decomposition(ts, s)
        x0 = noise.x0_mean
        if mean_offset is not None:
            x0 = x0 + np.asarray(mean_offset, dtype=float).reshape(ts.n)
        self.zeta_prior = {s: self.decomps[s].T_o.T @ x0 for s in self.sensors}
        self.P_prior = {}
        self.Q_red = {}
        self.R_red = {}
        for i, s1 in enumerate(self.sensors):
            T1 = self.decomps[s1].T_o
            for s2 in self.sensors[i:]:
                T2 = self.decomps[s2].T_o
                self.P_prior[(s1, s2)] = T1.T @ noise.P0 @ T2
                self.Q_red[(s1, s2)] = T1.T @ noise.Q @ T2
                self.R_red[(s1, s2)] = float(noise.R[s1, s2])
        self.k = 0

    def step(self, model_index: int, y) -> BankStep:
        """Update every sensor filter with its own row of ``y``, then predict.

        ``y`` is the full m-vector; sensor ``s`` consumes ``y[s]`` only.
        """
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.ts.m:
            raise ModelError(f"output has {y.shape[0]} rows, expected {self.ts.m}")
        j = int(model_index)
        gains, ikc, z, zeta_post = {}, {}, {}, {}
        for s in self.sensors:
            dec = self.decomps[s]
            C = dec.C_red[j]
            Pp = self.P_prior[(s, s)]
            den = float(C @ Pp @ C) + self.R_red[(s, s)]
            K = (Pp @ C) / den
            nu = float(y[s] - C @ self.zeta_prior[s])
            gains[s] = (K, C)
            ikc[s] = np.eye(dec.n_obs) - np.outer(K, C)
            z[s] = nu / np.sqrt(den)
            zeta_post[s] = self.zeta_prior[s] + K * nu
        P_post = {}
        for i, s1 in enumerate(self.sensors):
            K1, _ = gains[s1]
            for s2 in self.sensors[i:]:
                K2, _ = gains[s2]
                P_post[(s1, s2)] = (
                    ikc[s1] @ self.P_prior[(s1, s2)] @ ikc[s2].T
                    + self.R_red[(s1, s2)] * np.outer(K1, K2)
                )
        for i, s1 in enumerate(self.sensors):
            A1 = self.decomps[s1].A_red[j]
            self.zeta_prior[s1] = A1 @ zeta_post[s1]
            for s2 in self.sensors[i:]:
                A2 = self.decomps[s2].A_red[j]
                self.P_prior[(s1, s2)] = A1 @ P_post[(s1, s2)] @ A2.T + self.Q_red[(s1, s2)]
        self.k += 1
        return BankStep(residues=z, zeta_post=zeta_post, P_post=P_post)

    def shift_prediction(self, delta: np.ndarray) -> None:
        """Add a known full-state offset to every sensor's predicted state."""
        delta = np.asarray(delta, dtype=float).reshape(self.ts.n)
        for s in self.sensors:
            self.zeta_prior[s] = self.zeta_prior[s] + self.decomps[s].T_o.T @ delta


# ---------------------------------------------------------------------------
# fusion


@dataclass(frozen=True)
class FusionResult:
    x_star: np.ndarray
    cov: np.ndarray


class FusionEstimator:
    """Minimum-variance unbiased combination of the local estimates.

    Each sensor contributes ``x^o_s = T^o_s zeta_s + eta_s`` (its estimate
    lifted back to full coordinates, blurred by a small isotropic noise
    ``eta_s ~ N(0, eps I)`` so the lifted covariance is invertible). Stacked
    over sensors this is a linear model in the unknowns
    ``(T_uo-coordinates per sensor, x)`` with block rows
    ``[0 .. -T^uo_s .. 0  I]``; generalized least squares with the exact
    joint covariance gives the fused estimate as the last ``n`` entries. The
    design matrix must have a trivial null space, i.e. the active sensors
    must jointly observe the whole state.
    """

    def __init__(
        self,
        decomps: dict[int, SensorDecomposition],
        epsilon: float = 1e-6,
        sensors=None,
    ):
        self.sensors = tuple(sensors) if sensors is not None else tuple(sorted(decomps))
        if not self.sensors:
            raise DecompositionError("fusion needs at least one sensor")
        self.decomps = decomps
        self.epsilon = float(epsilon)
        some = decomps[self.sensors[0]]
        self.n = some.T_o.shape[0]
        widths = [decomps[s].n_unobs for s in self.sensors]
        self.W = self._design_matrix(decomps, self.sensors, self.n)
        if numerical_rank(self.W) < self.W.shape[1]:
            raise DecompositionError(
                "active sensors do not jointly observe the state (design matrix "
                "is rank deficient)"
            )
        self._widths = widths

    @staticmethod
    def _design_matrix(decomps, sensors, n) -> np.ndarray:
        widths = [decomps[s].n_unobs for s in sensors]
        cols = sum(widths) + n
        W = np.zeros((len(sensors) * n, cols))
        off = 0
        for i, s in enumerate(sensors):
            u = decomps[s].n_unobs
            if u:
                W[i * n : (i + 1) * n, off : off + u] = -decomps[s].T_uo
            W[i * n : (i + 1) * n, cols - n :] = np.eye(n)
            off += u
        return W

    @classmethod
    def removal_keeps_observability(cls, decomps, remaining) -> bool:
        """Would fusion over ``remaining`` sensors still pin down the state?"""
        remaining = tuple(remaining)
        if not remaining:
            return False
        n = decomps[remaining[0]].T_o.shape[0]
        W = cls._design_matrix(decomps, remaining, n)
        return numerical_rank(W) == W.shape[1]

    def fuse(
        self,
        zeta_post: dict[int, np.ndarray],
        P_post: dict[tuple[int, int], np.ndarray],
        rng: np.random.Generator,
    ) -> FusionResult:
        """One fusion step from the bank's posterior state.

        Solves the generalized least-squares problem via Cholesky
        factorizations of the joint covariance and the normal matrix; the
        fused covariance is the trailing ``n x n`` block of the inverse
        normal matrix.
        """
        n, eps = self.n, self.epsilon
        ma = len(self.sensors)
        yhat = np.empty(ma * n)
        Qc = np.empty((ma * n, ma * n))
        sq = np.sqrt(eps)
        for i, s in enumerate(self.sensors):
            dec = self.decomps[s]
            eta = sq * rng.standard_normal(n)
            yhat[i * n : (i + 1) * n] = dec.T_o @ zeta_post[s] + eta
        for i, s1 in enumerate(self.sensors):
            T1 = self.decomps[s1].T_o
            for jdx in range(i, ma):
                s2 = self.sensors[jdx]
                T2 = self.decomps[s2].T_o
                key = (s1, s2) if (s1, s2) in P_post else (s2, s1)
                P = P_post[key] if key == (s1, s2) else P_post[key].T
                blk = T1 @ P @ T2.T
                Qc[i * n : (i + 1) * n, jdx * n : (jdx + 1) * n] = blk
                if jdx != i:
                    Qc[jdx * n : (jdx + 1) * n, i * n : (i + 1) * n] = blk.T
                else:
                    Qc[i * n : (i + 1) * n, i * n : (i + 1) * n] = sym(blk) + eps * np.eye(n)
        try:
            cf = cho_factor(Qc)
        except np.linalg.LinAlgError:
            Qc = Qc + 10.0 * eps * np.eye(ma * n)
            try:
                cf = cho_factor(Qc)
            except np.linalg.LinAlgError as exc:
                raise FilterError("fusion covariance lost positive definiteness") from exc
        X = cho_solve(cf, self.W)
        G = sym(self.W.T @ X)
        try:
            gf = cho_factor(G)
        except np.linalg.LinAlgError as exc:
            raise FilterError("fusion normal matrix lost positive definiteness") from exc
        xfull = cho_solve(gf, X.T @ yhat)
        tail = np.zeros((G.shape[0], n))
        tail[-n:] = np.eye(n)
        cov = cho_solve(gf, tail)[-n:, :]
        return FusionResult(x_star=xfull[-n:], cov=sym(cov))
