import warnings

import numpy as np
import pytest

from grantfree.pilot import evaluate_pilot_length, feasible_pilot_lengths, optimize_pilot_length
from grantfree.system import SystemConfig


def _quiet(cfg, mode="fast"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return optimize_pilot_length(cfg, mode)


def test_feasible_range(table1):
    r = feasible_pilot_lengths(table1)
    assert r[0] == 101 and r[-1] == 200


def test_low_snr_warning(table1):
    with pytest.warns(UserWarning, match="40 dB"):
        optimize_pilot_length(table1.replace(active_count=60))


def test_no_warning_at_high_snr(table1):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        optimize_pilot_length(table1.replace(active_count=60, rx_power=table1.noise_var * 1e5))


@pytest.mark.parametrize("k,lo,hi", [(100, 150, 156), (60, 115, 123)])
def test_fast_optimum(table1, k, lo, hi):
    res = _quiet(table1.replace(active_count=k))
    assert lo <= res.best_len <= hi
    assert res.best.p_overall == min(p.p_overall for p in res.curve)
    lengths = [p.pilot_len for p in res.curve]
    assert lengths == list(range(k + 1, 201))
    # interior minimum
    assert lengths[0] < res.best_len < lengths[-1]


def test_rate_bookkeeping(table1):
    res = _quiet(table1.replace(active_count=60))
    rates = np.array([p.rate for p in res.curve])
    assert np.all(np.diff(rates) > 0)
    for p in res.curve:
        assert p.rate == pytest.approx(50 / (250 - p.pilot_len), rel=1e-15)
    assert res.curve[-1].rate == 1.0


def test_tie_breaks_to_shortest():
    cfg = SystemConfig(active_count=10, rx_power=1.0, noise_var=1e-12)
    res = optimize_pilot_length(cfg)
    assert all(p.p_overall == 0.0 for p in res.curve)
    assert res.best_len == 11


def test_empty_feasible_set(table1):
    with pytest.raises(ValueError, match="no feasible"):
        optimize_pilot_length(table1.replace(active_count=199))
    with pytest.raises(ValueError):
        optimize_pilot_length(table1, mode="fastest")


def test_evaluate_point_modes(table1):
    fast = evaluate_pilot_length(table1, 150, "fast")
    exact = evaluate_pilot_length(table1, 150, "exact")
    assert fast.tau_inf_sq == pytest.approx(table1.noise_var / 50)
    assert exact.tau_inf_sq == pytest.approx(fast.tau_inf_sq, rel=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("k", [60, 100])
def test_fast_matches_exact(table1, k):
    cfg = table1.replace(active_count=k)
    fast = _quiet(cfg, "fast")
    exact = optimize_pilot_length(cfg, "exact")
    print(f"K={k}: fast L*={fast.best_len}, exact L*={exact.best_len}")
    assert abs(fast.best_len - exact.best_len) <= 5
