"""End-to-end scenarios: configuration, generation, simulation, reporting.

A scenario wires together a moving-target system, a secret schedule, an
attack policy, the central and per-sensor estimators, fusion, and the
chi-square detectors, and logs per-step metrics plus detection events.

The run engine propagates the filters in *error coordinates*: the filter is
linear, so running it on ``y_k - C_k x_k`` (measurement noise plus injected
attack) with prior ``x0_mean - x0`` and feeding ``-w_k`` as a known input
after each prediction yields exactly the negated estimation errors and the
identical residues of a run on raw data. This avoids ever forming the true
state, which for the deliberately unstable example plant overflows doubles
(and drowns innovations in cancellation) long before the 10^4-step horizons
used for residue calibration.

Reproducibility: every random quantity derives from config seeds (simulation
noise and fusion blur from ``seed`` via spawned streams, the schedule from
the schedule key, attacker guesses from the attack seed), so identical
configurations produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import (
    AttackerInfo,
    AttackPolicy,
    CrossModelPolicy,
    GuessingPolicy,
    OmniscientSchedulePolicy,
    PersistentBiasPolicy,
    dominant_unstable_direction,
)
from .detection import (
    Chi2Detector,
    DetectorConfig,
    IdentificationLog,
    RemovalTracker,
    identify_and_remove,
)
from .errors import ConditioningError, ConfigError
from .estimation import (
    CentralKalmanFilter,
    FusionEstimator,
    LocalFilterBank,
    kalman_decomposition,
)
from .linalg import numerical_rank, observability_stack, spectral_radius
from .matrixio import read_matrix, read_vector
from .system_model import (
    AttackSet,
    LtiPair,
    NoiseModel,
    TargetSet,
    build_attack_matrix,
    sample_schedule,
    schedule_key,
)

ATTACK_KINDS = ("none", "omniscient", "guessing", "persistent_bias", "cross_model")

METRICS_SCHEMA = "mtident-metrics-v1"
EVENTS_SCHEMA = "mtident-events-v1"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SystemSpec:
    kind: str = "generated"
    seed: int = 0
    n: int = 15
    l: int = 7
    spectral_radius: tuple[float, float] = (1.05, 1.3)
    coupling: float = 0.2
    noise_scale: float = 1.0
    pair_files: tuple[tuple[str, str], ...] = ()
    Q_file: str | None = None
    R_file: str | None = None
    x0_mean_file: str | None = None
    P0_file: str | None = None


@dataclass(frozen=True)
class ScheduleSpec:
    period: int | None = None  # None: 2n
    key: object = None  # None: derived from the system seed


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    sensors: tuple[int, ...] = ()
    x0_star: object = "auto"  # "auto" or an explicit vector
    x0_star_scale: float = 1.0
    seed: int = 1
    restart_each_period: bool = False
    constant: float = 0.0
    ramp: float = 0.0
    models: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class EstimatorSpec:
    epsilon: float = 1e-6


@dataclass(frozen=True)
class DetectorSpec:
    sensor_window: int = 5
    sensor_alpha: float = 6.9e-8
    central_window: int = 3
    central_alpha: float = 4.2e-4
    removal_policy: int = 2
    removal_enabled: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: int
    seed: int
    system: SystemSpec = field(default_factory=SystemSpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    trials: int = 1


def _section(d: dict, name: str) -> dict:
    sub = d.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    return dict(sub)


def _pop(d: dict, key, default, kind=None, section=""):
    v = d.pop(key, default)
    if v is not None and kind is not None and not isinstance(v, kind):
        where = f"{section}.{key}" if section else key
        raise ConfigError(f"'{where}' has wrong type {type(v).__name__}")
    return v


def _reject_unknown(d: dict, section: str):
    if d:
        raise ConfigError(f"unknown key(s) in '{section or 'config'}': {sorted(d)}")


def config_from_dict(raw: dict, base_dir: str | os.PathLike | None = None) -> ScenarioConfig:
    """Validate a configuration mapping; unknown keys are rejected.

    Relative matrix-file paths are resolved against ``base_dir``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    d = dict(raw)
    base = Path(base_dir) if base_dir is not None else None

    def resolve(p):
        if p is None:
            return None
        p = str(p)
        return str((base / p) if base is not None and not os.path.isabs(p) else Path(p))

    sys_d = _section(d, "system")
    d.pop("system", None)
    kind = _pop(sys_d, "kind", "generated", str, "system")
    if kind not in ("generated", "explicit"):
        raise ConfigError(f"system.kind must be 'generated' or 'explicit', got '{kind}'")
    radius = _pop(sys_d, "spectral_radius", (1.05, 1.3), (list, tuple), "system")
    if len(radius) != 2 or not all(isinstance(v, (int, float)) for v in radius):
        raise ConfigError("system.spectral_radius must be [low, high]")
    pair_files = []
    for entry in _pop(sys_d, "pairs", [], list, "system"):
        if not isinstance(entry, dict) or set(entry) != {"A", "C"}:
            raise ConfigError("system.pairs entries must be {'A': path, 'C': path}")
        pair_files.append((resolve(entry["A"]), resolve(entry["C"])))
    system = SystemSpec(
        kind=kind,
        seed=_pop(sys_d, "seed", 0, int, "system"),
        n=_pop(sys_d, "n", 15, int, "system"),
        l=_pop(sys_d, "l", 7, int, "system"),
        spectral_radius=(float(radius[0]), float(radius[1])),
        coupling=float(_pop(sys_d, "coupling", 0.2, (int, float), "system")),
        noise_scale=float(_pop(sys_d, "noise_scale", 1.0, (int, float), "system")),
        pair_files=tuple(pair_files),
        Q_file=resolve(_pop(sys_d, "Q", None, str, "system")),
        R_file=resolve(_pop(sys_d, "R", None, str, "system")),
        x0_mean_file=resolve(_pop(sys_d, "x0_mean", None, str, "system")),
        P0_file=resolve(_pop(sys_d, "P0", None, str, "system")),
    )
    _reject_unknown(sys_d, "system")
    if system.kind == "explicit" and (not system.pair_files or not system.Q_file or not system.R_file):
        raise ConfigError("explicit systems need system.pairs, system.Q, and system.R")

    sch_d = _section(d, "schedule")
    d.pop("schedule", None)
    schedule = ScheduleSpec(
        period=_pop(sch_d, "period", None, int, "schedule"),
        key=_pop(sch_d, "key", None, (int, str), "schedule"),
    )
    _reject_unknown(sch_d, "schedule")
    if schedule.period is not None and schedule.period < 1:
        raise ConfigError("schedule.period must be >= 1")

    atk_d = _section(d, "attack")
    d.pop("attack", None)
    akind = _pop(atk_d, "kind", "none", str, "attack")
    if akind not in ATTACK_KINDS:
        raise ConfigError(f"attack.kind must be one of {ATTACK_KINDS}, got '{akind}'")
    sensors = _pop(atk_d, "sensors", [], list, "attack")
    x0_star = atk_d.pop("x0_star", "auto")
    if isinstance(x0_star, list):
        x0_star = tuple(float(v) for v in x0_star)
    elif x0_star != "auto":
        raise ConfigError("attack.x0_star must be 'auto' or a list of numbers")
    models = _pop(atk_d, "models", (0, 1), (list, tuple), "attack")
    if len(models) != 2:
        raise ConfigError("attack.models must name exactly two configurations")
    attack = AttackSpec(
        kind=akind,
        sensors=tuple(int(s) for s in sensors),
        x0_star=x0_star,
        x0_star_scale=float(_pop(atk_d, "x0_star_scale", 1.0, (int, float), "attack")),
        seed=_pop(atk_d, "seed", 1, int, "attack"),
        restart_each_period=bool(_pop(atk_d, "restart_each_period", False, bool, "attack")),
        constant=float(_pop(atk_d, "constant", 0.0, (int, float), "attack")),
        ramp=float(_pop(atk_d, "ramp", 0.0, (int, float), "attack")),
        models=(int(models[0]), int(models[1])),
    )
    _reject_unknown(atk_d, "attack")
    if attack.kind != "none" and not attack.sensors:
        raise ConfigError(f"attack.kind '{attack.kind}' needs attack.sensors")

    est_d = _section(d, "estimator")
    d.pop("estimator", None)
    estimator = EstimatorSpec(
        epsilon=float(_pop(est_d, "epsilon", 1e-6, (int, float), "estimator"))
    )
    _reject_unknown(est_d, "estimator")
    if estimator.epsilon <= 0:
        raise ConfigError("estimator.epsilon must be positive")

    det_d = _section(d, "detector")
    d.pop("detector", None)
    detector = DetectorSpec(
        sensor_window=_pop(det_d, "sensor_window", 5, int, "detector"),
        sensor_alpha=float(_pop(det_d, "sensor_alpha", 6.9e-8, (int, float), "detector")),
        central_window=_pop(det_d, "central_window", 3, int, "detector"),
        central_alpha=float(_pop(det_d, "central_alpha", 4.2e-4, (int, float), "detector")),
        removal_policy=_pop(det_d, "removal_policy", 2, int, "detector"),
        removal_enabled=bool(_pop(det_d, "removal_enabled", True, bool, "detector")),
    )
    _reject_unknown(det_d, "detector")

    horizon = _pop(d, "horizon", None, int)
    seed = _pop(d, "seed", None, int)
    trials = _pop(d, "trials", 1, int)
    _reject_unknown(d, "")
    if horizon is None or horizon < 1:
        raise ConfigError("'horizon' is required and must be >= 1")
    if seed is None:
        raise ConfigError("'seed' is required")
    if trials < 1:
        raise ConfigError("'trials' must be >= 1")
    return ScenarioConfig(
        horizon=horizon,
        seed=seed,
        system=system,
        schedule=schedule,
        attack=attack,
        estimator=estimator,
        detector=detector,
        trials=trials,
    )


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    """Load a JSON scenario configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


# ---------------------------------------------------------------------------
# the worked example system


_BLOCK_PATTERN = ((0, 0), (0, 1), (1, 1), (1, 3), (2, 2), (2, 4), (3, 3), (3, 4), (4, 4))


def generate_example_system(
    seed: int,
    n: int = 15,
    l: int = 7,
    radius: tuple[float, float] = (1.05, 1.3),
    coupling: float = 0.2,
    noise_scale: float = 1.0,
    period: int | None = None,
    key=None,
    max_attempts: int = 40,
) -> tuple[TargetSet, NoiseModel]:
    """Random instance of the worked example: five coupled 3-dim blocks,
    two five-sensor banks, unstable block dynamics.

    Every configuration shares a fixed sparsity pattern (diagonal blocks plus
    couplings 1->2, 2->4, 3->5, 4->5), so each sensor's unobservable subspace
    is the same coordinate subspace under every configuration, which is what
    the per-sensor filter bank requires. Diagonal blocks are rescaled to a
    spectral radius drawn from ``radius`` (unstable by default). Draws are
    retried until every pair is observable and every sensor decomposes
    cleanly.
    """
    if n % 5 != 0:
        raise ValueError("n must be divisible by 5 (five equal blocks)")
    if l < 1:
        raise ValueError("need at least one configuration")
    b = n // 5
    m = 10
    last_err = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        pairs = []
        degenerate = False
        for _ in range(l):
            A = np.zeros((n, n))
            for (r, c) in _BLOCK_PATTERN:
                Mb = rng.uniform(-1.0, 1.0, (b, b))
                if r == c:
                    target = rng.uniform(radius[0], radius[1])
                    sr = spectral_radius(Mb)
                    if sr < 1e-9:
                        degenerate = True
                        break
                    Mb = Mb * (target / sr)
                else:
                    Mb = Mb * coupling
                A[r * b : (r + 1) * b, c * b : (c + 1) * b] = Mb
            if degenerate:
                break
            C = np.zeros((m, n))
            for bank in range(2):
                for i in range(5):
                    C[bank * 5 + i, i * b : (i + 1) * b] = rng.uniform(-1.0, 1.0, b)
            pairs.append(LtiPair(A, C))
        if degenerate:
            continue
        MQ = rng.uniform(-1.0, 1.0, (n, n))
        Q = noise_scale * (MQ @ MQ.T)
        MR = rng.uniform(-1.0, 1.0, (m, m))
        R = noise_scale * (MR @ MR.T) + 1e-3 * np.eye(m)
        ts = TargetSet(
            pairs=tuple(pairs),
            period=period if period is not None else 2 * n,
            key=key if key is not None else schedule_key(f"mtident-example-{seed}"),
        )
        noise = NoiseModel(Q=Q, R=R, x0_mean=np.zeros(n), P0=np.eye(n))
        try:
            for p in pairs:
                if numerical_rank(observability_stack(p.A, p.C, n)) < n:
                    raise ConditioningError("pair unobservable")
            for s in range(m):
                kalman_decomposition(ts, s)
        except ConditioningError as exc:
            last_err = exc
            continue
        except Exception as exc:  # decomposition failures: retry with a new draw
            last_err = exc
            continue
        return ts, noise
    raise ConditioningError(
        f"could not generate a well-posed example system after {max_attempts} attempts "
        f"(last failure: {last_err})"
    )


# ---------------------------------------------------------------------------
# building blocks


def _build_system(cfg: ScenarioConfig) -> tuple[TargetSet, NoiseModel]:
    sysd = cfg.system
    if sysd.kind == "generated":
        period = cfg.schedule.period
        key = cfg.schedule.key
        return generate_example_system(
            seed=sysd.seed,
            n=sysd.n,
            l=sysd.l,
            radius=sysd.spectral_radius,
            coupling=sysd.coupling,
            noise_scale=sysd.noise_scale,
            period=period,
            key=key if key is not None else None,
        )
    pairs = tuple(LtiPair(read_matrix(a), read_matrix(c)) for a, c in sysd.pair_files)
    Q = read_matrix(sysd.Q_file)
    R = read_matrix(sysd.R_file)
    x0 = read_vector(sysd.x0_mean_file) if sysd.x0_mean_file else np.zeros(Q.shape[0])
    P0 = read_matrix(sysd.P0_file) if sysd.P0_file else np.eye(Q.shape[0])
    n = pairs[0].n
    period = cfg.schedule.period if cfg.schedule.period is not None else 2 * n
    key = cfg.schedule.key if cfg.schedule.key is not None else schedule_key(f"mtident-explicit-{cfg.seed}")
    ts = TargetSet(pairs=pairs, period=period, key=key)
    return ts, NoiseModel(Q=Q, R=R, x0_mean=x0, P0=P0)


def _resolve_x0_star(spec: AttackSpec, ts: TargetSet) -> np.ndarray:
    if spec.x0_star == "auto":
        v = dominant_unstable_direction(ts.pairs[0].A)
    else:
        v = np.asarray(spec.x0_star, dtype=float).reshape(-1)
        if v.shape != (ts.n,):
            raise ConfigError(f"attack.x0_star has length {v.size}, expected {ts.n}")
    return spec.x0_star_scale * v


def _build_attack(
    cfg: ScenarioConfig, ts: TargetSet, schedule: np.ndarray
) -> tuple[AttackSet | None, AttackPolicy | None]:
    spec = cfg.attack
    if spec.kind == "none":
        return None, None
    attack = build_attack_matrix(spec.sensors, ts.m)
    if spec.kind == "omniscient":
        return attack, OmniscientSchedulePolicy(ts, schedule, attack, _resolve_x0_star(spec, ts))
    if spec.kind == "guessing":
        info = AttackerInfo.from_target_set(ts)
        return attack, GuessingPolicy(
            info,
            attack,
            _resolve_x0_star(spec, ts),
            seed=spec.seed,
            restart_each_period=spec.restart_each_period,
        )
    if spec.kind == "persistent_bias":
        if spec.constant == 0.0 and spec.ramp == 0.0:
            raise ConfigError("persistent_bias attack needs a nonzero constant or ramp")
        return attack, PersistentBiasPolicy(attack, constant=spec.constant, ramp=spec.ramp)
    if spec.kind == "cross_model":
        i, j = spec.models
        if not (0 <= i < ts.l and 0 <= j < ts.l and i != j):
            raise ConfigError(f"attack.models {spec.models} invalid for l={ts.l}")
        return attack, CrossModelPolicy(ts.pairs[i], ts.pairs[j], attack, cfg.horizon)
    raise ConfigError(f"unsupported attack kind '{spec.kind}'")


# ---------------------------------------------------------------------------
# running


@dataclass
class RunReport:
    """Everything observable from one scenario run.

    Metric arrays cover steps ``0..horizon-1``; ``local_residues[k, s]`` is
    sensor ``s``'s whitened local residue (logged even after removal).
    Events are ``(step, sensor, kind)`` with ``sensor = -1`` for the central
    detector.
    """

    config: ScenarioConfig
    schedule: np.ndarray
    err_central: np.ndarray
    err_fused: np.ndarray
    trace_P: np.ndarray
    fused_trace: np.ndarray
    local_residues: np.ndarray
    events: list[tuple[int, int, str]]
    log: IdentificationLog
    summary: dict


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Run one seeded scenario end to end."""
    ts, noise = _build_system(cfg)
    n, m = ts.n, ts.m
    T = cfg.horizon
    schedule = sample_schedule(ts, T)
    attack, policy = _build_attack(cfg, ts, schedule)

    master = np.random.SeedSequence(cfg.seed)
    ss_sim, ss_eta = master.spawn(2)
    rng_sim = np.random.default_rng(ss_sim)
    rng_eta = np.random.default_rng(ss_eta)

    decomps = {s: kalman_decomposition(ts, s) for s in range(m)}

    # error-coordinate setup: priors become x0_mean + offset = -(x0 - x0_mean)
    e0 = noise.P0_factor @ rng_sim.standard_normal(n)
    offset = -(noise.x0_mean + e0)
    central = CentralKalmanFilter(noise, mean_offset=offset)
    bank = LocalFilterBank(ts, noise, decomps=decomps, mean_offset=offset)
    active = list(range(m))
    fusion = FusionEstimator(decomps, cfg.estimator.epsilon, tuple(active))

    det = cfg.detector
    sensor_cfg = DetectorConfig.from_alpha(
        det.sensor_window, 1, det.sensor_alpha, det.removal_policy
    )
    sensor_det = {s: Chi2Detector(sensor_cfg) for s in range(m)}
    central_det = Chi2Detector(
        DetectorConfig.from_alpha(det.central_window, m, det.central_alpha)
    )
    tracker = RemovalTracker(det.removal_policy)
    log = IdentificationLog()

    err_central = np.empty(T)
    err_fused = np.empty(T)
    trace_P = np.empty(T)
    fused_trace = np.empty(T)
    local_z = np.empty((T, m))
    events: list[tuple[int, int, str]] = []

    for k in range(T):
        j = int(schedule[k])
        pair = ts.pairs[j]
        v = noise.R_factor @ rng_sim.standard_normal(m)
        if policy is not None:
            dd = attack.D @ policy.values(k)
        else:
            dd = np.zeros(m)
        y_err = v + dd  # y_k - C_k x_k of the attacked run

        mask = None if len(active) == m else tuple(active)
        y_central = y_err if mask is None else y_err[list(mask)]
        cres = central.step(pair, y_central, active=mask)
        bres = bank.step(j, y_err)
        fres = fusion.fuse(bres.zeta_post, bres.P_post, rng_eta)

        err_central[k] = float(np.linalg.norm(cres.x_post))  # |-e_k| = |e_k|
        err_fused[k] = float(np.linalg.norm(fres.x_star))
        trace_P[k] = float(np.trace(cres.P_prior))
        fused_trace[k] = float(np.trace(fres.cov))
        for s in range(m):
            local_z[k, s] = bres.residues[s]

        w = noise.Q_factor @ rng_sim.standard_normal(n)
        central.shift_prediction(-w)
        bank.shift_prediction(-w)

        cver = central_det.update(cres.residue)
        if cver is not None and cver.alarm:
            events.append((k, -1, "central_alarm"))
            log.record_central_alarm(k)
        candidates = []
        for s in active:
            r = sensor_det[s].update(local_z[k, s])
            if r is None:
                continue
            if r.alarm:
                events.append((k, s, "alarm"))
                log.record_alarm(k, s)
            if tracker.update(s, r.alarm) and det.removal_enabled:
                candidates.append(s)
        if candidates:
            removed = identify_and_remove(
                candidates,
                active,
                lambda rest: FusionEstimator.removal_keeps_observability(decomps, rest),
                log,
                k,
            )
            if removed:
                for s in removed:
                    active.remove(s)
                    events.append((k, s, "removed"))
                fusion = FusionEstimator(decomps, cfg.estimator.epsilon, tuple(active))
                # central residue dimension changed: recalibrate and restart
                central_det = Chi2Detector(
                    DetectorConfig.from_alpha(det.central_window, len(active), det.central_alpha)
                )

    report = RunReport(
        config=cfg,
        schedule=schedule,
        err_central=err_central,
        err_fused=err_fused,
        trace_P=trace_P,
        fused_trace=fused_trace,
        local_residues=local_z,
        events=events,
        log=log,
        summary={},
    )
    report.summary = _summarize(report)
    return report


def _summarize(r: RunReport) -> dict:
    T = r.err_central.size
    tail = slice(T // 2, None)
    attacked = sorted(r.config.attack.sensors) if r.config.attack.kind != "none" else []
    removed = {int(s): int(k) for s, k in r.log.removed.items()}
    return {
        "horizon": int(T),
        "mse_central": float(np.mean(r.err_central**2)),
        "mse_fused": float(np.mean(r.err_fused**2)),
        "mse_central_tail": float(np.mean(r.err_central[tail] ** 2)),
        "mse_fused_tail": float(np.mean(r.err_fused[tail] ** 2)),
        "fused_trace_tail": float(np.mean(r.fused_trace[tail])),
        "trace_P_max": float(np.max(r.trace_P)),
        "attack_kind": r.config.attack.kind,
        "attacked_sensors": [int(s) for s in attacked],
        "first_alarm": {str(int(s)): int(k) for s, k in sorted(r.log.first_alarm.items())},
        "removed": {str(s): k for s, k in sorted(removed.items())},
        "central_first_alarm": (
            None if r.log.central_first_alarm is None else int(r.log.central_first_alarm)
        ),
        "alarm_count": sum(1 for _, s, kind in r.events if kind == "alarm"),
        "operator_alerts": list(r.log.alerts),
    }


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MonteCarloReport:
    config: ScenarioConfig
    trials: int
    summaries: list[dict]
    mean_err_central: np.ndarray
    mean_err_fused: np.ndarray
    aggregate: dict


def trial_config(cfg: ScenarioConfig, index: int) -> ScenarioConfig:
    """Per-trial configuration: independent noise, schedule key, attack seed.

    Derivations depend only on (config, index), so trials can run in any
    order or in parallel and still reproduce.
    """
    state = np.random.SeedSequence([cfg.seed, index]).generate_state(3)
    base_key = cfg.schedule.key
    if base_key is None:
        base_key = schedule_key(f"mtident-example-{cfg.system.seed}")
    key_i = hashlib.sha256(
        schedule_key(base_key) + int(index).to_bytes(8, "big")
    ).digest()
    return dataclasses.replace(
        cfg,
        seed=int(state[0]),
        schedule=dataclasses.replace(cfg.schedule, key=key_i),
        attack=dataclasses.replace(cfg.attack, seed=int(state[1])),
    )


def monte_carlo(cfg: ScenarioConfig, trials: int | None = None) -> MonteCarloReport:
    """Run independent trials of the scenario and aggregate.

    Trials are sequential here; per-trial seeding is index-based, so results
    are exchangeable under permutation of trial indices.
    """
    trials = trials if trials is not None else cfg.trials
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    reports = [run_scenario(trial_config(cfg, i)) for i in range(trials)]
    summaries = [r.summary for r in reports]
    mean_c = np.mean(np.stack([r.err_central for r in reports]), axis=0)
    mean_f = np.mean(np.stack([r.err_fused for r in reports]), axis=0)

    attacked = set(cfg.attack.sensors) if cfg.attack.kind != "none" else set()
    removed_all, removed_clean = 0, 0
    detect_steps = []
    for s in summaries:
        rem = {int(k) for k in s["removed"]}
        if attacked and attacked <= rem:
            removed_all += 1
        if rem - attacked:
            removed_clean += 1
        alarms = [v for k, v in s["first_alarm"].items() if int(k) in attacked]
        if alarms:
            detect_steps.append(min(alarms))
    aggregate = {
        "trials": trials,
        "mse_central_mean": float(np.mean([s["mse_central"] for s in summaries])),
        "mse_fused_mean": float(np.mean([s["mse_fused"] for s in summaries])),
        "all_attacked_removed_trials": removed_all,
        "trials_with_clean_removal": removed_clean,
        "first_detection_steps": [int(v) for v in detect_steps],
    }
    return MonteCarloReport(
        config=cfg,
        trials=trials,
        summaries=summaries,
        mean_err_central=mean_c,
        mean_err_fused=mean_f,
        aggregate=aggregate,
    )


# ---------------------------------------------------------------------------
# output files


def _fmt(v: float) -> str:
    return repr(float(v))


def metrics_rows(r: RunReport):
    m = r.local_residues.shape[1]
    header = ["step", "schedule_index", "err_central", "err_fused", "trace_P"] + [
        f"z_{s + 1}" for s in range(m)
    ]
    yield header
    for k in range(r.err_central.size):
        row = [
            str(k),
            str(int(r.schedule[k])),
            _fmt(r.err_central[k]),
            _fmt(r.err_fused[k]),
            _fmt(r.trace_P[k]),
        ] + [_fmt(v) for v in r.local_residues[k]]
        yield row


def events_rows(r: RunReport):
    yield ["step", "sensor", "event"]
    for step, sensor, kind in r.events:
        yield [str(step), "" if sensor < 0 else str(sensor), kind]


def write_run_outputs(r: RunReport, out_dir: str | os.PathLike, fmt: str = "csv") -> list[Path]:
    """Write metrics, events, and the summary for one run; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "csv":
        p = out / "metrics.csv"
        with open(p, "w", newline="", encoding="ascii") as fh:
            fh.write(f"# {METRICS_SCHEMA}\n")
            csv.writer(fh).writerows(metrics_rows(r))
        written.append(p)
        p = out / "events.csv"
        with open(p, "w", newline="", encoding="ascii") as fh:
            fh.write(f"# {EVENTS_SCHEMA}\n")
            csv.writer(fh).writerows(events_rows(r))
        written.append(p)
    elif fmt == "jsonl":
        p = out / "metrics.jsonl"
        rows = metrics_rows(r)
        header = next(rows)
        with open(p, "w", encoding="ascii") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(header, row)), sort_keys=True) + "\n")
        written.append(p)
        p = out / "events.jsonl"
        rows = events_rows(r)
        header = next(rows)
        with open(p, "w", encoding="ascii") as fh:
            for row in rows:
                fh.write(json.dumps(dict(zip(header, row)), sort_keys=True) + "\n")
        written.append(p)
    else:
        raise ConfigError(f"unknown output format '{fmt}'")
    p = out / "summary.json"
    p.write_text(json.dumps(r.summary, indent=2, sort_keys=True) + "\n", encoding="ascii")
    written.append(p)
    return written


def write_monte_carlo_outputs(
    mc: MonteCarloReport, out_dir: str | os.PathLike, fmt: str = "csv"
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows = [["trial", "mse_central", "mse_fused", "n_removed", "first_detection"]]
    for i, s in enumerate(mc.summaries):
        first = min((v for v in s["first_alarm"].values()), default="")
        rows.append(
            [str(i), _fmt(s["mse_central"]), _fmt(s["mse_fused"]), str(len(s["removed"])), str(first)]
        )
    if fmt == "csv":
        p = out / "trials.csv"
        with open(p, "w", newline="", encoding="ascii") as fh:
            fh.write("# mtident-trials-v1\n")
            csv.writer(fh).writerows(rows)
        written.append(p)
    elif fmt == "jsonl":
        p = out / "trials.jsonl"
        with open(p, "w", encoding="ascii") as fh:
            for row in rows[1:]:
                fh.write(json.dumps(dict(zip(rows[0], row)), sort_keys=True) + "\n")
        written.append(p)
    else:
        raise ConfigError(f"unknown output format '{fmt}'")
    p = out / "aggregate.json"
    p.write_text(json.dumps(mc.aggregate, indent=2, sort_keys=True) + "\n", encoding="ascii")
    written.append(p)
    return written
