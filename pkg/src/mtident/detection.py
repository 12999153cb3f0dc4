"""Windowed chi-square residue tests and the identify-and-remove policy.

Under no attack the whitened residues are standard normal, so the sum of
their squares over a sliding window is chi-square distributed; the alarm
threshold is the ``1 - alpha`` quantile. Per-sensor detectors watch scalar
local residues (one degree of freedom per step); the central detector
watches the full residue vector (``m`` degrees of freedom per step). A
sensor is identified as attacked after ``removal_policy`` consecutive
alarms, and removed from fusion unless removal would destroy joint
observability.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2


def threshold_from_alpha(window: int, dof_per_step: int, alpha: float) -> float:
    """Chi-square alarm threshold with false-alarm probability ``alpha`` per window."""
    if window < 1 or dof_per_step < 1:
        raise ValueError("window and dof_per_step must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(chi2.ppf(1.0 - alpha, window * dof_per_step))


@dataclass(frozen=True)
class DetectorConfig:
    """Window length, threshold, and removal policy for one detector."""

    window: int
    gamma: float
    alpha: float | None = None
    removal_policy: int = 2

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.removal_policy < 1:
            raise ValueError("removal_policy must be >= 1")

    @classmethod
    def from_alpha(
        cls, window: int, dof_per_step: int, alpha: float, removal_policy: int = 2
    ) -> "DetectorConfig":
        return cls(
            window=window,
            gamma=threshold_from_alpha(window, dof_per_step, alpha),
            alpha=alpha,
            removal_policy=removal_policy,
        )


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    alarm: bool


def chi2_test(residues, cfg: DetectorConfig) -> Chi2Result:
    """Test one full window of residues (scalars, or vectors per step)."""
    r = np.asarray(residues, dtype=float)
    if r.ndim == 1:
        r = r.reshape(-1, 1)
    if r.shape[0] != cfg.window:
        raise ValueError(f"expected {cfg.window} residues, got {r.shape[0]}")
    stat = float(np.sum(r * r))
    return Chi2Result(statistic=stat, alarm=stat > cfg.gamma)


class Chi2Detector:
    """Sliding-window chi-square detector; no alarms until the window fills."""

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self._buf: deque[float] = deque(maxlen=cfg.window)

    def update(self, z) -> Chi2Result | None:
        """Push one step's residue (scalar or vector); returns None while the
        window is still filling."""
        z = np.asarray(z, dtype=float)
        self._buf.append(float(np.sum(z * z)))
        if len(self._buf) < self.cfg.window:
            return None
        stat = float(sum(self._buf))
        return Chi2Result(statistic=stat, alarm=stat > self.cfg.gamma)

    def reset(self) -> None:
        self._buf.clear()


@dataclass
class IdentificationLog:
    """Detection and identification bookkeeping for one run.

    Steps are absolute simulation steps (attacks start at step 0, so they
    are also offsets from attack onset).
    """

    first_alarm: dict[int, int] = field(default_factory=dict)
    removed: dict[int, int] = field(default_factory=dict)
    central_first_alarm: int | None = None
    alerts: list[str] = field(default_factory=list)

    def record_alarm(self, step: int, sensor: int) -> None:
        self.first_alarm.setdefault(sensor, step)

    def record_central_alarm(self, step: int) -> None:
        if self.central_first_alarm is None:
            self.central_first_alarm = step

    def record_removal(self, step: int, sensor: int) -> None:
        self.removed.setdefault(sensor, step)


class RemovalTracker:
    """Counts consecutive alarms per sensor and decides removals.

    A sensor becomes a removal candidate after ``policy`` consecutive
    alarmed steps; the count resets on any non-alarmed step (once its
    detector window is full).
    """

    def __init__(self, policy: int):
        if policy < 1:
            raise ValueError("removal policy must be >= 1")
        self.policy = policy
        self.counts: dict[int, int] = {}

    def update(self, sensor: int, alarmed: bool) -> bool:
        if alarmed:
            self.counts[sensor] = self.counts.get(sensor, 0) + 1
        else:
            self.counts[sensor] = 0
        return self.counts[sensor] >= self.policy


def identify_and_remove(
    candidates,
    active,
    can_remove,
    log: IdentificationLog,
    step: int,
) -> list[int]:
    """Remove candidate sensors one at a time, skipping any whose removal
    would break joint observability of the remaining set.

    ``can_remove(remaining)`` must answer whether fusion over ``remaining``
    still observes the full state. Refused removals are logged as operator
    alerts and the sensor stays active.
    """
    removed = []
    current = list(active)
    for s in sorted(candidates):
        if s not in current:
            continue
        rest = [t for t in current if t != s]
        if can_remove(rest):
            removed.append(s)
            current = rest
            log.record_removal(step, s)
        else:
            log.alerts.append(
                f"step {step}: sensor {s} met the removal policy but removal would "
                "lose joint observability; operator attention required"
            )
    return removed
