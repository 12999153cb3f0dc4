"""Switched linear plant models with a secret sensing schedule.

The defended plant cycles through a finite set of ``(A, C)`` configurations.
Which configuration is active is decided per period by a keyed, counter-based
cryptographic generator, so an attacker who knows the configuration set but
not the key cannot predict the active pair. Sensor attacks enter additively
through a selection matrix ``D`` whose columns are standard basis vectors,
one per attacked sensor.

Indexing convention: sensors and configurations are 0-based throughout.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AttackSetError, ModelError
from .linalg import numerical_rank, observability_stack, psd_factor


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ModelError(f"{name} must be a 2-D array, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ModelError(f"{name} contains non-finite entries")
    return M


def _frozen(M: np.ndarray) -> np.ndarray:
    M = M.copy()
    M.setflags(write=False)
    return M


@dataclass(frozen=True)
class LtiPair:
    """One plant configuration: state matrix ``A`` (n x n), output matrix ``C`` (m x n)."""

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        C = _as_matrix(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise ModelError(f"A must be square, got {A.shape}")
        if C.shape[1] != A.shape[0]:
            raise ModelError(f"C has {C.shape[1]} columns, expected {A.shape[0]}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "C", _frozen(C))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]


def schedule_key(seed) -> bytes:
    """Normalize a seed into a 256-bit schedule key.

    Accepts 32 raw bytes, an int (taken mod 2**256), or an arbitrary
    string/bytes (hashed with SHA-256).
    """
    if isinstance(seed, bytes):
        if len(seed) == 32:
            return seed
        return hashlib.sha256(seed).digest()
    if isinstance(seed, int):
        return (seed % (1 << 256)).to_bytes(32, "big")
    if isinstance(seed, str):
        return hashlib.sha256(seed.encode("utf-8")).digest()
    raise ModelError(f"cannot derive a schedule key from {type(seed).__name__}")


@dataclass(frozen=True)
class TargetSet:
    """The moving target: configuration list, switching period, and secret key.

    The key never leaves this object except through :func:`sample_schedule`;
    attacker-facing views (:class:`mtident.adversary.AttackerInfo`) carry the
    configurations and period only.
    """

    pairs: tuple[LtiPair, ...]
    period: int
    key: bytes = field(repr=False)

    def __post_init__(self):
        pairs = tuple(self.pairs)
        if not pairs:
            raise ModelError("TargetSet needs at least one (A, C) pair")
        n, m = pairs[0].n, pairs[0].m
        for i, p in enumerate(pairs):
            if (p.n, p.m) != (n, m):
                raise ModelError(f"pair {i} has shape ({p.n},{p.m}), expected ({n},{m})")
        if not isinstance(self.period, int) or self.period < 1:
            raise ModelError("period must be a positive integer")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "key", schedule_key(self.key))

    @property
    def n(self) -> int:
        return self.pairs[0].n

    @property
    def m(self) -> int:
        return self.pairs[0].m

    @property
    def l(self) -> int:
        return len(self.pairs)


def _uniform_index(key: bytes, counter: int, l: int) -> int:
    """Uniform draw over {0..l-1} from a keyed SHA-256 counter stream.

    64-bit words are rejection-sampled so the distribution is exactly
    uniform; the stream depends only on (key, counter), so block ``counter``
    can be recomputed independently of all others.
    """
    bound = (1 << 64) - ((1 << 64) % l)
    word = 0
    while True:
        digest = hashlib.sha256(
            key + counter.to_bytes(8, "big") + word.to_bytes(4, "big")
        ).digest()
        for off in range(0, 32, 8):
            v = int.from_bytes(digest[off : off + 8], "big")
            if v < bound:
                return v % l
        word += 1


def sample_schedule(ts: TargetSet, horizon: int) -> np.ndarray:
    """Active-configuration index for steps ``0..horizon-1``.

    The index is constant within each period block and drawn uniformly over
    ``{0..l-1}`` per block from the keyed generator. Identical
    ``(key, period, horizon)`` always reproduce the same schedule.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    blocks = math.ceil(horizon / ts.period)
    out = np.empty(horizon, dtype=np.int64)
    for b in range(blocks):
        j = _uniform_index(ts.key, b, ts.l)
        out[b * ts.period : (b + 1) * ts.period] = j
    return out


@dataclass(frozen=True)
class AttackSet:
    """Attacked sensors and the selection matrix ``D`` (m x k).

    ``D[u, v] == 1`` exactly when sensor ``u`` is the ``v``-th attacked
    sensor; all other entries are zero, so attack values can only enter the
    attacked rows of the output.
    """

    sensors: tuple[int, ...]
    D: np.ndarray

    def __post_init__(self):
        D = _as_matrix(self.D, "D") if np.asarray(self.D).size else np.asarray(self.D, dtype=float)
        object.__setattr__(self, "sensors", tuple(int(s) for s in self.sensors))
        object.__setattr__(self, "D", _frozen(np.atleast_2d(D) if D.size else D.reshape(D.shape)))

    @property
    def size(self) -> int:
        return len(self.sensors)

    @property
    def m(self) -> int:
        return self.D.shape[0]


def build_attack_matrix(sensors, m: int) -> AttackSet:
    """Build the attack selection matrix for the given sensor indices.

    ``sensors`` is an ordered collection of distinct indices in ``[0, m)``;
    an empty collection yields an ``m x 0`` matrix (no attack channel).
    """
    sensors = tuple(int(s) for s in sensors)
    if len(set(sensors)) != len(sensors):
        raise AttackSetError(f"attacked sensors must be distinct, got {sensors}")
    for s in sensors:
        if not 0 <= s < m:
            raise AttackSetError(f"sensor index {s} out of range [0, {m})")
    D = np.zeros((m, len(sensors)))
    for v, s in enumerate(sensors):
        D[s, v] = 1.0
    return AttackSet(sensors=sensors, D=D)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian disturbance model: process ``Q``, measurement ``R``, initial prior.

    ``R`` must be symmetric positive definite; ``Q`` and ``P0`` positive
    semidefinite (eigenvalues within ``-1e-10 * ||.||`` are clamped to zero).
    ``x0_mean``/``P0`` describe the estimator's prior on the initial state.
    """

    Q: np.ndarray
    R: np.ndarray
    x0_mean: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        n = Q.shape[0]
        m = R.shape[0]
        if Q.shape != (n, n):
            raise ModelError(f"Q must be square, got {Q.shape}")
        if R.shape != (m, m):
            raise ModelError(f"R must be square, got {R.shape}")
        x0 = np.zeros(n) if self.x0_mean is None else np.asarray(self.x0_mean, dtype=float).reshape(-1)
        P0 = np.eye(n) if self.P0 is None else _as_matrix(self.P0, "P0")
        if x0.shape != (n,):
            raise ModelError(f"x0_mean has shape {x0.shape}, expected ({n},)")
        if P0.shape != (n, n):
            raise ModelError(f"P0 has shape {P0.shape}, expected ({n},{n})")
        LQ = psd_factor(Q, name="Q")
        LP0 = psd_factor(P0, name="P0")
        try:
            np.linalg.cholesky(0.5 * (R + R.T))
        except np.linalg.LinAlgError as exc:
            raise ModelError("R must be symmetric positive definite") from exc
        LR = np.linalg.cholesky(0.5 * (R + R.T))
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "x0_mean", _frozen(x0))
        object.__setattr__(self, "P0", _frozen(P0))
        object.__setattr__(self, "_LQ", _frozen(LQ))
        object.__setattr__(self, "_LR", _frozen(LR))
        object.__setattr__(self, "_LP0", _frozen(LP0))

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def Q_factor(self) -> np.ndarray:
        """L with L @ L.T == Q (PSD square root factor)."""
        return self._LQ

    @property
    def R_factor(self) -> np.ndarray:
        return self._LR

    @property
    def P0_factor(self) -> np.ndarray:
        return self._LP0


def noise_model(Q, R, x0_mean=None, P0=None) -> NoiseModel:
    """Convenience constructor accepting None for the priors."""
    Q = np.asarray(Q, dtype=float)
    return NoiseModel(Q=Q, R=np.asarray(R, dtype=float), x0_mean=x0_mean, P0=P0)


@dataclass(frozen=True)
class Trajectory:
    """One simulated run: states, outputs, schedule, and injected attacks.

    All arrays cover steps ``0..T-1``; ``attacks[k]`` is ``D @ d_k`` (an
    m-vector, zero on unattacked sensors).
    """

    states: np.ndarray
    outputs: np.ndarray
    schedule: np.ndarray
    attacks: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]


def _attack_values(attack: AttackSet | None, d, horizon: int):
    """Normalize the attack-value argument into a per-step callable."""
    if attack is None or attack.size == 0:
        return None
    if d is None:
        raise AttackSetError("attack set given but no attack values")
    if callable(d):
        return d
    arr = np.asarray(d, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != (horizon, attack.size):
        raise AttackSetError(
            f"attack values have shape {arr.shape}, expected ({horizon}, {attack.size})"
        )
    return lambda k: arr[k]


def _check_schedule(ts: TargetSet, schedule) -> np.ndarray:
    schedule = np.asarray(schedule, dtype=np.int64).reshape(-1)
    if schedule.size == 0:
        raise ValueError("schedule is empty")
    if schedule.min() < 0 or schedule.max() >= ts.l:
        raise ModelError("schedule contains out-of-range configuration indices")
    return schedule


def simulate_deterministic(
    ts: TargetSet,
    schedule,
    x0,
    attack: AttackSet | None = None,
    d=None,
) -> Trajectory:
    """Noise-free run of the switched plant.

    ``d`` supplies per-step attack values (array of shape ``(T, k)`` or a
    callable ``k -> values``); outputs are ``y_k = C_k x_k + D d_k`` and the
    state evolves as ``x_{k+1} = A_k x_k``.
    """
    schedule = _check_schedule(ts, schedule)
    T = schedule.size
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (ts.n,):
        raise ModelError(f"x0 has shape {x.shape}, expected ({ts.n},)")
    dfun = _attack_values(attack, d, T)
    states = np.empty((T, ts.n))
    outputs = np.empty((T, ts.m))
    attacks = np.zeros((T, ts.m))
    for k in range(T):
        pair = ts.pairs[schedule[k]]
        if dfun is not None:
            attacks[k] = attack.D @ np.asarray(dfun(k), dtype=float).reshape(attack.size)
        states[k] = x
        outputs[k] = pair.C @ x + attacks[k]
        x = pair.A @ x
    return Trajectory(states=states, outputs=outputs, schedule=schedule, attacks=attacks)


def simulate_stochastic(
    ts: TargetSet,
    schedule,
    noise: NoiseModel,
    rng: np.random.Generator,
    attack: AttackSet | None = None,
    d=None,
) -> Trajectory:
    """Stochastic run with process noise Q, measurement noise R, and prior x0.

    Draw order is fixed for reproducibility: the initial state first, then
    per step the measurement noise ``v_k`` followed by the process noise
    ``w_k``. All randomness comes from ``rng``.
    """
    schedule = _check_schedule(ts, schedule)
    if (noise.n, noise.m) != (ts.n, ts.m):
        raise ModelError("noise model dimensions do not match the target set")
    T = schedule.size
    dfun = _attack_values(attack, d, T)
    x = noise.x0_mean + noise.P0_factor @ rng.standard_normal(ts.n)
    states = np.empty((T, ts.n))
    outputs = np.empty((T, ts.m))
    attacks = np.zeros((T, ts.m))
    for k in range(T):
        pair = ts.pairs[schedule[k]]
        if dfun is not None:
            attacks[k] = attack.D @ np.asarray(dfun(k), dtype=float).reshape(attack.size)
        v = noise.R_factor @ rng.standard_normal(ts.m)
        states[k] = x
        outputs[k] = pair.C @ x + attacks[k] + v
        w = noise.Q_factor @ rng.standard_normal(ts.n)
        x = pair.A @ x + w
    return Trajectory(states=states, outputs=outputs, schedule=schedule, attacks=attacks)


@dataclass(frozen=True)
class RecommendationReport:
    """Outcome of the five moving-target design checks.

    1. pairwise disjoint spectra, 2. period at least ``2n``, 3. more than one
    configuration (so the schedule is genuinely unpredictable), 4. every pair
    observable, 5. no eigenvalue at zero.
    """

    disjoint_spectra: bool
    period_at_least_2n: bool
    schedule_nondegenerate: bool
    all_pairs_observable: bool
    spectra_exclude_zero: bool
    min_cross_gap: float
    min_abs_eigenvalue: float
    unobservable_pairs: tuple[int, ...]

    def satisfied(self) -> bool:
        return (
            self.disjoint_spectra
            and self.period_at_least_2n
            and self.schedule_nondegenerate
            and self.all_pairs_observable
            and self.spectra_exclude_zero
        )

    def findings(self) -> dict:
        return {
            "disjoint_spectra": self.disjoint_spectra,
            "period_at_least_2n": self.period_at_least_2n,
            "schedule_nondegenerate": self.schedule_nondegenerate,
            "all_pairs_observable": self.all_pairs_observable,
            "spectra_exclude_zero": self.spectra_exclude_zero,
            "min_cross_gap": self.min_cross_gap,
            "min_abs_eigenvalue": self.min_abs_eigenvalue,
            "unobservable_pairs": list(self.unobservable_pairs),
        }

    def problems(self) -> list[str]:
        """Human-readable list of violated design recommendations."""
        out = []
        if not self.disjoint_spectra:
            out.append(
                f"configuration spectra overlap (closest cross-model eigenvalue "
                f"gap {self.min_cross_gap:.3e}); constant-schedule attacks may "
                "carry over between configurations"
            )
        if not self.period_at_least_2n:
            out.append("schedule period is shorter than twice the state dimension")
        if not self.schedule_nondegenerate:
            out.append("only one configuration: the schedule is predictable")
        if not self.all_pairs_observable:
            out.append(
                "configuration(s) "
                + ", ".join(str(i) for i in self.unobservable_pairs)
                + " are unobservable with the full sensor set"
            )
        if not self.spectra_exclude_zero:
            out.append(
                f"an eigenvalue sits at zero (min |eigenvalue| "
                f"{self.min_abs_eigenvalue:.3e}); attacks along its null "
                "directions die out and evade identification windows"
            )
        return out


def validate_design_recommendations(ts: TargetSet, tau_eig: float | None = None) -> RecommendationReport:
    """Check the five design recommendations for a moving target.

    Eigenvalue comparisons use the tolerance ``tau_eig``, which defaults to
    ``1e-8 * (1 + max |eigenvalue|)``. With a single configuration the
    disjoint-spectra check is vacuously true while the schedule is flagged
    as degenerate.
    """
    spectra = [np.linalg.eigvals(p.A) for p in ts.pairs]
    max_abs = max(float(np.max(np.abs(s))) for s in spectra)
    if tau_eig is None:
        tau_eig = 1e-8 * (1.0 + max_abs)

    min_gap = math.inf
    for i in range(ts.l):
        for j in range(i + 1, ts.l):
            gap = float(np.min(np.abs(spectra[i][:, None] - spectra[j][None, :])))
            min_gap = min(min_gap, gap)
    disjoint = (min_gap == math.inf) or (min_gap > tau_eig)

    min_abs_eig = min(float(np.min(np.abs(s))) for s in spectra)

    unobs = tuple(
        i
        for i, p in enumerate(ts.pairs)
        if numerical_rank(observability_stack(p.A, p.C, ts.n)) < ts.n
    )

    return RecommendationReport(
        disjoint_spectra=disjoint,
        period_at_least_2n=ts.period >= 2 * ts.n,
        schedule_nondegenerate=ts.l >= 2,
        all_pairs_observable=not unobs,
        spectra_exclude_zero=min_abs_eig > tau_eig,
        min_cross_gap=min_gap,
        min_abs_eigenvalue=min_abs_eig,
        unobservable_pairs=unobs,
    )
