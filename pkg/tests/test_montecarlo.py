import math

import numpy as np
import pytest
from scipy import stats

from grantfree.amp import state_evolution_fixed_point
from grantfree.bler import conditional_snr_law
from grantfree.detection import detection_stats
from grantfree.montecarlo import run_campaign, run_trial, trial_seed, zf_snr
from grantfree.system import SystemConfig


def _cfg(n, m, k, ell, snr_db, block_len, bits):
    return SystemConfig.from_db(rx_power_db=0.0, noise_dbm=30.0 - snr_db, n_users=n, n_antennas=m, active_count=k,
                                pilot_len=ell, block_len=block_len, payload_bits=bits)


# desk config with a BLER near one half
NOISY = _cfg(400, 20, 15, 60, -10, 200, 60)


def test_trial_seed():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    assert len({trial_seed(0, i) for i in range(1000)}) == 1000
    assert trial_seed(1, 0) != trial_seed(0, 1)
    assert 0 <= trial_seed(7, 3) < 2**64


def test_trial_deterministic(small_cfg):
    a, b = run_trial(small_cfg, 5), run_trial(small_cfg, 5)
    assert np.array_equal(a.per_active_error, b.per_active_error)
    assert np.array_equal(a.per_active_snr, b.per_active_snr)


def test_campaign_independent_of_workers(small_cfg):
    one = run_campaign(small_cfg, 12, 3, workers=1)
    three = run_campaign(small_cfg, 12, 3, workers=3)
    for f in ("bler", "ci_half_width", "bler_rb", "mean_miss_rate", "mean_false_rate", "observations"):
        assert getattr(one, f) == getattr(three, f)
    assert np.array_equal(one.miss_counts, three.miss_counts)


def test_single_trial_campaign(small_cfg):
    emp = run_campaign(small_cfg, 1, 4)
    t = run_trial(small_cfg, trial_seed(4, 0))
    assert emp.trials == 1 and emp.observations == t.active_count
    assert emp.bler == np.count_nonzero(t.per_active_error) / t.active_count
    assert emp.bler_rb == pytest.approx(np.mean(t.per_active_prob), rel=1e-15)
    assert emp.miss_counts.tolist() == [t.miss_count]


def test_campaign_rejects_zero_trials(small_cfg):
    with pytest.raises(ValueError):
        run_campaign(small_cfg, 0, 0)


def test_ci_shrinks_with_trials():
    a = run_campaign(NOISY, 100, 1)
    b = run_campaign(NOISY, 200, 1)
    assert 0.2 < a.bler < 0.8
    assert a.ci_half_width == pytest.approx(1.96 * math.sqrt(a.bler * (1 - a.bler) / a.observations))
    assert b.ci_half_width / a.ci_half_width == pytest.approx(1 / math.sqrt(2), abs=0.08)


def test_rao_blackwell_agrees_with_draws():
    emp = run_campaign(NOISY, 200, 2)
    assert abs(emp.bler - emp.bler_rb) <= emp.ci_half_width + emp.ci_half_width_rb


def test_high_snr_no_errors():
    cfg = _cfg(40, 8, 3, 60, 60, 200, 20)
    emp = run_campaign(cfg, 20, 0)
    assert emp.miss_counts.sum() == 0 and emp.false_counts.sum() == 0
    assert emp.bler == 0.0 and emp.bler_rb < 1e-12


def test_overloaded_receiver():
    cfg = _cfg(100, 2, 10, 50, 10, 150, 20)
    t = run_trial(cfg, 1)
    assert t.overloaded
    assert t.per_active_error.all() and np.all(t.per_active_prob == 1.0)
    assert t.per_active_snr.size == 0


def test_zf_snr_singular():
    h = np.ones((4, 2), dtype=complex)
    with pytest.raises(np.linalg.LinAlgError):
        zf_snr(h, 1.0)
    h = np.eye(3, dtype=complex)
    assert np.allclose(zf_snr(h, 0.5), 2.0)


def test_snr_samples_follow_gamma_law():
    cfg = _cfg(400, 24, 12, 200, -10, 300, 50)
    law = conditional_snr_law(0, 0, cfg, state_evolution_fixed_point(cfg))
    pooled = []
    for i in range(300):
        t = run_trial(cfg, trial_seed(5, i))
        if t.miss_count == 0 and t.false_count == 0:
            pooled.append(t.per_active_snr)
    pooled = np.concatenate(pooled)
    assert pooled.size > 3000
    assert stats.kstest(pooled / law.scale, stats.gamma(law.shape).cdf).pvalue >= 0.05


def test_detection_marginals():
    cfg = _cfg(400, 2, 20, 200, -10, 300, 50)
    det = detection_stats(cfg)
    emp = run_campaign(cfg, 100, 6)
    k, ni, n = cfg.k, cfg.n_users - cfg.k, emp.trials
    for counts, size, p in ((emp.miss_counts, k, det.p_miss), (emp.false_counts, ni, det.p_false)):
        se = math.sqrt(size * p * (1 - p) / n)
        assert abs(counts.mean() - size * p) <= 3 * se
        assert counts.var(ddof=1) == pytest.approx(size * p * (1 - p), rel=0.5)
