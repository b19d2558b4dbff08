import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grantfree.amp import detection_threshold, state_evolution_fixed_point
from grantfree.detection import (
    detection_stats,
    estimation_error_variance,
    false_alarm_prob,
    missed_detection_prob,
)
from grantfree.system import SystemConfig
from grantfree.validation import check_detection_rates, check_detection_statistic


def moderate_config():
    """Low-SNR desk config where both error rates are a few percent."""
    return SystemConfig.from_db(rx_power_db=0.0, noise_dbm=40.0, n_users=400, n_antennas=2, active_count=20,
                                pilot_len=200, block_len=300, payload_bits=50)


def test_miss_limits():
    assert missed_detection_prob(100, 1.0, 0.1, 1e-300) == pytest.approx(0.0, abs=1e-300)
    assert missed_detection_prob(100, 1.0, 0.1, 1e6) == 1.0


def test_false_alarm_limits():
    assert false_alarm_prob(100, 0.1, 1e6) == 0.0
    assert false_alarm_prob(100, 0.1, 1e-300) == 1.0


def test_monotone_in_threshold():
    thr = np.linspace(1, 400, 400)
    pm = missed_detection_prob(100, 1.0, 1.0, thr)
    pf = false_alarm_prob(100, 1.0, thr)
    assert np.all(np.diff(pm) >= 0) and np.all(np.diff(pf) <= 0)


@given(st.floats(0.05, 1e4), st.floats(0.01, 100))
def test_more_antennas_helps(ratio, tau):
    # below beta / tau^2 of about 0.02 the threshold moves mass from P_M to P_F
    beta = ratio * tau
    # same per-component scales, threshold at the likelihood-ratio point
    pm10 = missed_detection_prob(10, beta, tau, detection_threshold(tau, beta, 10))
    pm100 = missed_detection_prob(100, beta, tau, detection_threshold(tau, beta, 100))
    pf10 = false_alarm_prob(10, tau, detection_threshold(tau, beta, 10))
    pf100 = false_alarm_prob(100, tau, detection_threshold(tau, beta, 100))
    assert pm100 <= pm10 + 1e-15 and pf100 <= pf10 + 1e-15


def test_more_antennas_near_zero_separation():
    tau, beta = 3.0, 0.0625
    total = [missed_detection_prob(m, beta, tau, detection_threshold(tau, beta, m))
             + false_alarm_prob(m, tau, detection_threshold(tau, beta, m)) for m in (10, 100)]
    assert total[1] < total[0]


def test_error_variance():
    assert estimation_error_variance(2.0, 0.0, True) == 0.0
    assert estimation_error_variance(2.0, 1e300, True) == pytest.approx(2.0)
    assert estimation_error_variance(2.0, 0.5, False) == 2.0
    assert estimation_error_variance(2.0, 2.0, True) == 1.0


def test_detection_stats_invariants(table1):
    d = detection_stats(table1)
    b, t = table1.rx_power, d.tau_inf_sq
    assert d.err_var_detected == pytest.approx(b * t / (b + t), rel=1e-15)
    assert d.err_var_detected <= min(b, t)
    assert d.err_var_missed == b
    assert 0 <= d.p_miss < 1e-6 and 0 <= d.p_false < 1e-6
    fast = detection_stats(table1, mode="fast")
    assert fast.tau_inf_sq == pytest.approx(table1.noise_var / 20)
    with pytest.raises(ValueError):
        detection_stats(table1, mode="slow")
    with pytest.raises(ValueError):
        missed_detection_prob(10, 1.0, 1.0, 1.0, convention="other")


def test_statistic_gamma_law(table1):
    tau = state_evolution_fixed_point(table1)
    checks = check_detection_statistic(table1, tau, n_draws=10_000)
    assert all(c.passed for c in checks), [c.to_dict() for c in checks]


def test_rates_match_amp_at_moderate_snr():
    cfg = moderate_config()
    det = detection_stats(cfg)
    assert 0.01 < det.p_miss < 0.2 and 0.005 < det.p_false < 0.1
    checks = check_detection_rates(cfg, scenarios=100)
    assert all(c.passed for c in checks), [c.to_dict() for c in checks]


def test_printed_convention_is_rejected():
    # the upper-gamma / squared-argument reading predicts rates the AMP never shows
    cfg = moderate_config()
    good = detection_stats(cfg)
    bad = detection_stats(cfg, convention="printed")
    for p_good, p_bad in ((good.p_miss, bad.p_miss), (good.p_false, bad.p_false)):
        n = 2000
        assert abs(p_bad - p_good) > 6 * math.sqrt(p_good * (1 - p_good) / n)
