"""End-to-end Monte-Carlo: scenario -> AMP -> zero-forcing SNR -> block errors.

Block errors are not decoded: each correctly detected user fails with the
normal-approximation probability at its realized post-processing SNR. Every
trial is a pure function of ``(config, seed)``; campaigns derive trial seeds
from ``(base_seed, trial_index)`` and reduce in index order, so results do
not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .amp import run_amp
from .detection import estimation_error_variance
from .fbl import CodeParams, bler_normal_approx
from .system import SystemConfig, generate_scenario, make_rng, received_pilot_signal

_BLOCK_ERRORS = 7  # substream label for the Bernoulli block-error draws
_COND_LIMIT = 1e12


@dataclass
class TrialResult:
    miss_count: int
    false_count: int
    active_count: int
    per_active_error: np.ndarray  # bool, one entry per active user (index order)
    per_active_prob: np.ndarray  # model error probability per active user
    per_active_snr: np.ndarray  # realized SNR, correctly detected users only
    overloaded: bool
    tau_sq: float


@dataclass
class EmpiricalBler:
    bler: float
    ci_half_width: float
    trials: int
    observations: int  # active-user packets
    mean_miss_rate: float
    mean_false_rate: float
    bler_rb: float  # mean model error probability, no Bernoulli draw
    ci_half_width_rb: float
    miss_counts: np.ndarray
    false_counts: np.ndarray


def trial_seed(base_seed: int, index: int) -> int:
    """64-bit scenario seed for trial ``index`` of a campaign."""
    words = np.random.SeedSequence([base_seed, index]).generate_state(2, dtype=np.uint32)
    return int(words[0]) << 32 | int(words[1])


def zf_snr(h_hat: np.ndarray, impairment: float) -> np.ndarray:
    """``1 / ([(H^H H)^-1]_kk * impairment)`` for every column of ``h_hat``.

    Raises ``np.linalg.LinAlgError`` when ``H^H H`` is numerically singular.
    """
    gram = h_hat.conj().T @ h_hat
    if np.linalg.cond(gram) > _COND_LIMIT:
        raise np.linalg.LinAlgError("estimated channel Gram matrix is singular")
    diag = np.real(np.diag(np.linalg.inv(gram)))
    return 1.0 / (diag * impairment)


def run_trial(config: SystemConfig, seed: int) -> TrialResult:
    scenario = generate_scenario(config, seed)
    jadce = run_amp(received_pilot_signal(scenario), scenario.pilots, config)

    active = scenario.active
    detected = jadce.detected_active
    is_detected = np.zeros(config.n_users, dtype=bool)
    is_detected[detected] = True
    hit = is_detected[active]
    e = int(np.count_nonzero(~hit))
    f = int(np.count_nonzero(~scenario.activity[detected]))
    k_act = active.size

    prob = np.ones(k_act)
    snr = np.empty(0)
    overloaded = detected.size > config.n_antennas
    if not overloaded and detected.size:
        tau = jadce.tau_sq_final
        beta = config.rx_power
        impairment = (
            (k_act - e) * estimation_error_variance(beta, tau, True)
            + e * estimation_error_variance(beta, tau, False)
            + config.noise_var
        )
        try:
            all_snr = zf_snr(jadce.channel_estimates[detected].T, impairment)
        except np.linalg.LinAlgError:
            overloaded = True
        else:
            # positions of correctly detected active users inside `detected`
            pos = np.searchsorted(detected, active[hit])
            snr = all_snr[pos]
            prob[hit] = bler_normal_approx(snr, CodeParams.from_config(config))

    if overloaded:
        prob[:] = 1.0
        snr = np.empty(0)
    draws = make_rng(seed, _BLOCK_ERRORS).random(k_act)
    errors = draws < prob
    return TrialResult(e, f, k_act, errors, prob, snr, overloaded, jadce.tau_sq_final)


def _summarize(config: SystemConfig, seed: int):
    t = run_trial(config, seed)
    return (
        t.miss_count,
        t.false_count,
        t.active_count,
        int(np.count_nonzero(t.per_active_error)),
        math.fsum(t.per_active_prob),
        math.fsum(p * p for p in t.per_active_prob),
    )


def _run_chunk(args):
    config, seeds = args
    return [_summarize(config, s) for s in seeds]


def run_campaign(config: SystemConfig, trials: int, base_seed: int, workers: int = 1) -> EmpiricalBler:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = [trial_seed(base_seed, i) for i in range(trials)]
    if workers <= 1:
        rows = [_summarize(config, s) for s in seeds]
    else:
        size = max(1, math.ceil(trials / (4 * workers)))
        chunks = [(config, seeds[i : i + size]) for i in range(0, trials, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return aggregate(config, rows)


def aggregate(config: SystemConfig, rows) -> EmpiricalBler:
    """Combine per-trial summaries, in the given order."""
    miss = np.array([r[0] for r in rows])
    false = np.array([r[1] for r in rows])
    n_act = np.array([r[2] for r in rows])
    errors = sum(r[3] for r in rows)
    obs = int(n_act.sum())
    n_inactive = int(config.n_users * len(rows) - obs)
    bler = errors / obs if obs else 0.0
    rb = math.fsum(r[4] for r in rows) / obs if obs else 0.0
    rb_sq = math.fsum(r[5] for r in rows) / obs if obs else 0.0
    return EmpiricalBler(
        bler=bler,
        ci_half_width=1.96 * math.sqrt(bler * (1.0 - bler) / obs) if obs else 0.0,
        trials=len(rows),
        observations=obs,
        mean_miss_rate=int(miss.sum()) / obs if obs else 0.0,
        mean_false_rate=int(false.sum()) / n_inactive if n_inactive else 0.0,
        bler_rb=rb,
        ci_half_width_rb=1.96 * math.sqrt(max(rb_sq - rb * rb, 0.0) / obs) if obs else 0.0,
        miss_counts=miss,
        false_counts=false,
    )
