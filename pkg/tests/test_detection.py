import numpy as np
import pytest
from mpmath import mp
from scipy.stats import chi2

from mtident import (
    Chi2Detector,
    DetectorConfig,
    IdentificationLog,
    RemovalTracker,
    chi2_test,
    identify_and_remove,
    threshold_from_alpha,
)

mp.dps = 50


def _sf(x, k):
    # chi-square survival function via the regularized upper incomplete gamma
    return mp.gammainc(mp.mpf(k) / 2, mp.mpf(x) / 2, mp.inf, regularized=True)


def _oracle_threshold(window, dof, alpha):
    k = window * dof
    lo, hi = mp.mpf(0), mp.mpf(1)
    while _sf(hi, k) > alpha:
        hi *= 2
    for _ in range(300):
        mid = (lo + hi) / 2
        if _sf(mid, k) > alpha:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


@pytest.mark.parametrize(
    "window,dof,alpha",
    [
        (5, 1, 6.9e-8),
        (3, 10, 4.2e-4),
        (1, 1, 0.05),
        (5, 1, 1e-2),
        (10, 3, 1e-6),
    ],
)
def test_threshold_matches_high_precision_oracle(window, dof, alpha):
    got = threshold_from_alpha(window, dof, alpha)
    want = _oracle_threshold(window, dof, alpha)
    assert abs(got - want) < 1e-9 * want
    # round trip: the exceedance probability at the threshold is alpha
    assert abs(float(chi2.sf(got, window * dof)) - alpha) < 1e-12 + 1e-6 * alpha


def test_threshold_rejects_bad_arguments():
    with pytest.raises(ValueError):
        threshold_from_alpha(0, 1, 0.05)
    with pytest.raises(ValueError):
        threshold_from_alpha(5, 0, 0.05)
    with pytest.raises(ValueError):
        threshold_from_alpha(5, 1, 0.0)
    with pytest.raises(ValueError):
        threshold_from_alpha(5, 1, 1.0)


def test_chi2_test_statistic_and_threshold():
    cfg = DetectorConfig(window=3, gamma=10.0)
    r = chi2_test([1.0, 2.0, -1.0], cfg)
    assert r.statistic == pytest.approx(6.0)
    assert not r.alarm
    assert chi2_test([2.0, 2.0, 2.0], cfg).alarm  # 12 > 10
    with pytest.raises(ValueError):
        chi2_test([1.0, 2.0], cfg)
    # vector residues: all components pooled
    v = chi2_test(np.ones((3, 2)), cfg)
    assert v.statistic == pytest.approx(6.0)


def test_detector_waits_for_full_window_and_slides():
    cfg = DetectorConfig(window=3, gamma=5.0)
    det = Chi2Detector(cfg)
    assert det.update(1.0) is None
    assert det.update(1.0) is None
    r = det.update(1.0)
    assert r is not None and r.statistic == pytest.approx(3.0) and not r.alarm
    r = det.update(2.0)  # window is now (1, 1, 4)
    assert r.statistic == pytest.approx(6.0) and r.alarm
    det.reset()
    assert det.update(3.0) is None


def test_detector_false_alarm_rate_is_calibrated():
    cfg = DetectorConfig.from_alpha(5, 1, 0.05)
    rng = np.random.default_rng(60)
    alarms, total = 0, 0
    for _ in range(4000):  # disjoint windows: independent trials
        det = Chi2Detector(cfg)
        r = None
        for z in rng.standard_normal(5):
            r = det.update(z)
        alarms += int(r.alarm)
        total += 1
    rate = alarms / total
    sigma = np.sqrt(0.05 * 0.95 / total)
    assert abs(rate - 0.05) < 4 * sigma


def test_detector_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(window=0, gamma=1.0)
    with pytest.raises(ValueError):
        DetectorConfig(window=3, gamma=-1.0)
    with pytest.raises(ValueError):
        DetectorConfig(window=3, gamma=1.0, removal_policy=0)
    cfg = DetectorConfig.from_alpha(5, 2, 1e-3, removal_policy=3)
    assert cfg.alpha == 1e-3 and cfg.removal_policy == 3


def test_removal_tracker_requires_consecutive_alarms():
    tr = RemovalTracker(policy=2)
    assert not tr.update(0, True)
    assert tr.update(0, True)  # second consecutive
    assert not tr.update(1, True)  # sensors are independent
    tr2 = RemovalTracker(policy=2)
    assert not tr2.update(0, True)
    assert not tr2.update(0, False)  # reset
    assert not tr2.update(0, True)
    assert tr2.update(0, True)


def test_identification_log_records_first_events_only():
    log = IdentificationLog()
    log.record_alarm(5, 2)
    log.record_alarm(9, 2)
    log.record_central_alarm(3)
    log.record_central_alarm(7)
    assert log.first_alarm == {2: 5}
    assert log.central_first_alarm == 3


def test_identify_and_remove_serializes_and_refuses():
    log = IdentificationLog()
    active = [0, 1, 2]
    # removal is allowed only while at least two sensors remain
    removed = identify_and_remove(
        [0, 1, 2], active, lambda rest: len(rest) >= 2, log, step=7
    )
    assert removed == [0]
    assert log.removed == {0: 7}
    assert len(log.alerts) == 2  # sensors 1 and 2 refused
    assert all("observability" in a for a in log.alerts)
    # candidates outside the active set are ignored silently
    log2 = IdentificationLog()
    assert identify_and_remove([5], [0, 1], lambda rest: True, log2, step=0) == []
    assert log2.alerts == []
