"""Cross-module consistency checks shared by ``grantfree validate`` and the tests.

Each check returns a :class:`Check` with the statistic it computed, the bound
it was held to and whether it passed. Nothing here raises on a failed check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .amp import run_amp, state_evolution_fixed_point, state_evolution_trajectory
from .bler import conditional_snr_law
from .detection import detection_stats
from .montecarlo import trial_seed
from .system import SystemConfig, complex_normal, generate_scenario, make_rng, received_pilot_signal


@dataclass
class Check:
    name: str
    passed: bool
    statistic: float
    bound: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(self.passed)
        return d


def sample_conditional_snr(e: int, f: int, config: SystemConfig, tau_inf_sq: float, n_draws: int, seed: int = 0):
    """Zero-forcing SNR draws built directly from random channel estimates.

    Draws ``K - e + f`` i.i.d. CN(0, beta^2 / (beta + tau^2)) columns, inverts
    their Gram matrix and applies the interference-plus-noise power of the
    (e, f) outcome. Column 0 plays the correctly detected user.
    """
    k, m = config.k, config.n_antennas
    cols = k - e + f
    if cols > m:
        raise ValueError("outcome is infeasible: more estimated users than antennas")
    beta, s2, t = config.rx_power, config.noise_var, tau_inf_sq
    est_var = beta * beta / (beta + t)
    impairment = (k - e) * beta * t / (beta + t) + e * beta + s2
    rng = make_rng(seed, e, f)
    out = np.empty(n_draws)
    batch = 20_000
    for start in range(0, n_draws, batch):
        size = min(batch, n_draws - start)
        # work with unit-variance columns and rescale, keeping Gram entries O(1)
        h = complex_normal(rng, (size, m, cols))
        gram = np.conj(np.swapaxes(h, 1, 2)) @ h
        inv00 = np.real(np.linalg.inv(gram)[:, 0, 0])
        out[start : start + size] = est_var / (inv00 * impairment)
    return out


def check_snr_law(
    config: SystemConfig, tau_inf_sq: float, e: int, f: int, n_draws: int = 100_000, alpha: float = 0.01,
    shape_offset: float = 0.0, seed: int = 0,
) -> Check:
    """KS test of the Gamma SNR law against matrix sampling.

    ``shape_offset`` corrupts the law's shape on purpose (negative control).
    """
    law = conditional_snr_law(e, f, config, tau_inf_sq)
    draws = sample_conditional_snr(e, f, config, tau_inf_sq, n_draws, seed)
    res = stats.kstest(draws / law.scale, stats.gamma(law.shape + shape_offset).cdf)
    return Check(
        f"snr_law_e{e}_f{f}",
        res.pvalue >= alpha,
        float(res.pvalue),
        alpha,
        {"ks_statistic": float(res.statistic), "shape": law.shape + shape_offset, "draws": n_draws},
    )


def lemma_config(config: SystemConfig | None = None) -> SystemConfig:
    """Small (M, K, N) = (8, 3, 6) system at the given powers."""
    base = config or SystemConfig()
    return SystemConfig(
        n_users=6, n_antennas=8, block_len=40, pilot_len=5, payload_bits=10, active_count=3,
        rx_power=base.rx_power, noise_var=base.noise_var,
    )


def amp_runs(config: SystemConfig, scenarios: int, base_seed: int, **amp_kw):
    """Yield (scenario, JadceResult) pairs for consecutive trial seeds."""
    for i in range(scenarios):
        sc = generate_scenario(config, trial_seed(base_seed, i))
        yield sc, run_amp(received_pilot_signal(sc), sc.pilots, config, **amp_kw)


@dataclass
class AmpSummary:
    """Running totals over AMP runs, enough for the state and detection checks."""

    track_iters: int
    scenarios: int = 0
    err_sum: float = 0.0
    err_count: int = 0
    plain_runs: int = 0
    hist_sum: np.ndarray | None = None
    misses: int = 0
    falses: int = 0
    n_active: int = 0
    n_inactive: int = 0

    def add(self, scenario, result) -> None:
        x = scenario.channels * scenario.activity[:, None]
        self.err_sum += float(np.sum(np.abs(result.effective_obs - x) ** 2))
        self.err_count += x.size
        if result.damping == 1.0 and len(result.tau_history) > self.track_iters:
            h = np.array(result.tau_history[: self.track_iters + 1])
            self.hist_sum = h if self.hist_sum is None else self.hist_sum + h
            self.plain_runs += 1
        hit = np.zeros(scenario.activity.size, dtype=bool)
        hit[result.detected_active] = True
        self.misses += int(np.count_nonzero(scenario.activity & ~hit))
        self.falses += int(np.count_nonzero(~scenario.activity & hit))
        self.n_active += int(scenario.activity.sum())
        self.n_inactive += int((~scenario.activity).sum())
        self.scenarios += 1


def summarize_amp(config: SystemConfig, scenarios: int, base_seed: int, track_iters: int = 10) -> AmpSummary:
    """Run AMP as shipped (restarts enabled) and collect an :class:`AmpSummary`."""
    summary = AmpSummary(track_iters)
    iters = max(config.amp_max_iters, track_iters)
    for sc, res in amp_runs(config, scenarios, base_seed, max_iters=iters):
        summary.add(sc, res)
    return summary


def state_evolution_checks(config: SystemConfig, summary: AmpSummary, mse_tol: float = 0.05,
                           track_tol: float = 0.10) -> list[Check]:
    """Empirical AMP error variance and per-iteration states vs state evolution.

    The empirical error variance is measured on the effective observation
    ``r = x + tau v`` that the denoiser sees, pooled over scenarios. Tracking
    compares the averaged ``||residual_t||^2 / (L M)`` of the undamped runs
    with the recursion started from the same ``tau_0^2``; runs that needed a
    damped restart follow a different recursion and are left out of it.
    """
    tau_inf = state_evolution_fixed_point(config)
    mse = summary.err_sum / summary.err_count
    mse_gap = abs(mse / tau_inf - 1.0)
    se = state_evolution_trajectory(config, summary.track_iters)
    if summary.plain_runs:
        hist = summary.hist_sum / summary.plain_runs
        rel = np.abs(hist / se - 1.0)
        track_gap = float(rel[1:].max())
        hist_list = hist.tolist()
    else:
        track_gap, hist_list = math.inf, []
    return [
        Check("amp_mse_vs_fixed_point", mse_gap <= mse_tol, mse_gap, mse_tol,
              {"empirical": mse, "tau_inf_sq": tau_inf, "scenarios": summary.scenarios}),
        Check("amp_state_tracking", track_gap <= track_tol, track_gap, track_tol,
              {"empirical": hist_list, "state_evolution": se.tolist(), "undamped_runs": summary.plain_runs,
               "scenarios": summary.scenarios}),
    ]


def check_state_evolution(config: SystemConfig, scenarios: int = 20, base_seed: int = 1, mse_tol: float = 0.05,
                          track_tol: float = 0.10, track_iters: int = 10) -> list[Check]:
    summary = summarize_amp(config, scenarios, base_seed, track_iters)
    return state_evolution_checks(config, summary, mse_tol, track_tol)


def binomial_agreement(count: int, trials: int, p: float, n_se: float = 3.0):
    """|count/trials - p| against ``n_se`` binomial standard errors at ``p``."""
    rate = count / trials if trials else 0.0
    se = math.sqrt(p * (1.0 - p) / trials) if trials else 0.0
    return abs(rate - p), n_se * se, rate


def detection_rate_checks(config: SystemConfig, summary: AmpSummary, n_se: float = 3.0) -> list[Check]:
    """AMP miss / false-alarm frequencies vs the Gamma-tail predictions."""
    det = detection_stats(config)
    out = []
    for name, count, total, p in (("miss_rate", summary.misses, summary.n_active, det.p_miss),
                                  ("false_alarm_rate", summary.falses, summary.n_inactive, det.p_false)):
        gap, bound, rate = binomial_agreement(count, total, p, n_se)
        out.append(Check(name, gap <= bound, gap, bound,
                         {"empirical": rate, "predicted": p, "observations": total, "events": count}))
    return out


def check_detection_rates(config: SystemConfig, scenarios: int, base_seed: int = 2, n_se: float = 3.0) -> list[Check]:
    return detection_rate_checks(config, summarize_amp(config, scenarios, base_seed), n_se)


def check_detection_statistic(config: SystemConfig, tau_inf_sq: float, n_draws: int = 10_000, alpha: float = 0.01,
                              seed: int = 3) -> list[Check]:
    """Synthetic ``||x + tau v||^2`` draws vs the scaled Gamma(M) laws."""
    m, beta = config.n_antennas, config.rx_power
    rng = make_rng(seed)
    out = []
    for name, var_x, scale in (("active", beta, beta + tau_inf_sq), ("inactive", 0.0, tau_inf_sq)):
        r = complex_normal(rng, (n_draws, m), var_x) + complex_normal(rng, (n_draws, m), tau_inf_sq)
        stat = np.sum(np.abs(r) ** 2, axis=1) / scale
        res = stats.kstest(stat, stats.gamma(m).cdf)
        out.append(Check(f"detection_statistic_{name}", res.pvalue >= alpha, float(res.pvalue), alpha))
    return out


def run_validation(config: SystemConfig, scenarios: int = 20, shape_offset: float = 0.0,
                   snr_draws: int = 100_000) -> list[Check]:
    """The full suite run by ``grantfree validate``."""
    checks = []
    small = lemma_config(config)
    tau_small = small.noise_var / (small.pilot_len - small.k)
    for e in (0, 1):
        for f in (0, 1):
            checks.append(check_snr_law(small, tau_small, e, f, snr_draws, shape_offset=shape_offset))
    tau = state_evolution_fixed_point(config)
    checks.extend(check_detection_statistic(config, tau))
    checks.extend(check_state_evolution(config, scenarios))
    checks.extend(check_detection_rates(config, scenarios))
    return checks
