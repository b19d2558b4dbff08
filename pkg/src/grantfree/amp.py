"""AMP for joint activity detection and channel estimation (JADCE).

The received pilot matrix is rescaled to ``y = Y_p / sqrt(L) = P X + W`` where
``P`` is the (L, N) pilot codebook with CN(0, 1/L) entries, row ``n`` of ``X``
is the effective channel ``u_n h_n`` and ``W`` has per-entry variance
``sigma^2 / L``. Each AMP iteration sees row ``n`` through an effective
Gaussian channel ``r_n = x_n + tau_t v_n``; the scalar ``tau_t^2`` is tracked by
state evolution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .system import SystemConfig, make_rng

log = logging.getLogger(__name__)

SE_SAMPLES = 100_000
SE_SEED = 20211
SE_RTOL = 1e-8
SE_MAX_ITERS = 500
# Posterior activity below this is treated as exactly zero; it only removes
# subnormal intermediates, which slow BLAS by orders of magnitude.
_PI_FLOOR = 1e-200


class AmpDivergenceError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"AMP produced non-finite values at iteration {iteration}")
        self.iteration = iteration


class StateEvolutionError(RuntimeError):
    def __init__(self, last: float, previous: float):
        super().__init__(f"state evolution did not converge (last states {previous:.6e}, {last:.6e})")
        self.last = last
        self.previous = previous


@dataclass
class AmpState:
    estimates: np.ndarray  # (N, M)
    residual: np.ndarray  # (L, M)
    tau_sq: float


@dataclass
class JadceResult:
    channel_estimates: np.ndarray  # (N, M)
    detected_active: np.ndarray  # sorted user indices
    tau_sq_final: float
    iterations_run: int
    threshold: float
    # tau_t^2 = ||residual_t||^2 / (L M) for t = 0 .. iterations_run
    tau_history: list[float] = field(default_factory=list)
    # last effective observation r = x + tau v that detection was applied to
    effective_obs: np.ndarray | None = None
    damping: float = 1.0  # damping of the run that produced this result


def _log_prior_odds(activity_prob: float) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(activity_prob) - np.log1p(-activity_prob))


def posterior_activity(norm_sq, tau_sq: float, activity_prob: float, rx_power: float, n_antennas: int):
    """P(active | ||r||^2) for the Bernoulli-Gaussian prior."""
    gap = rx_power / (tau_sq * (tau_sq + rx_power))  # 1/tau^2 - 1/(tau^2 + beta)
    llr = (
        _log_prior_odds(activity_prob)
        - n_antennas * np.log1p(rx_power / tau_sq)
        + np.asarray(norm_sq) * gap
    )
    pi = expit(llr)
    return np.where(pi < _PI_FLOOR, 0.0, pi)


def mmse_denoiser(obs, tau_sq: float, activity_prob: float, rx_power: float):
    """Posterior mean of X given ``obs = X + tau V``.

    Prior ``X ~ (1 - lam) delta_0 + lam CN(0, beta I)``, ``V ~ CN(0, I)``.
    ``obs`` may be one M-vector or a stack of them along the leading axes.
    Returns ``(mean, div)`` where ``div`` is the average of the diagonal
    Wirtinger derivatives ``d mean_i / d obs_i`` (one value per vector), which
    feeds the Onsager term.
    """
    obs = np.asarray(obs)
    m = obs.shape[-1]
    norm_sq = np.sum(np.abs(obs) ** 2, axis=-1)
    pi = posterior_activity(norm_sq, tau_sq, activity_prob, rx_power, m)
    gain = rx_power / (rx_power + tau_sq)
    gap = rx_power / (tau_sq * (tau_sq + rx_power))
    mean = (pi * gain)[..., None] * obs
    div = gain * (pi + pi * (1.0 - pi) * gap * norm_sq / m)
    return mean, div


def detection_threshold(tau_inf_sq: float, rx_power: float, n_antennas: int) -> float:
    """Likelihood-ratio threshold ``l`` on ``||r_n||^2``.

    ``M ln(1 + beta/tau^2) / (1/tau^2 - 1/(tau^2 + beta))``, written so the
    beta -> 0 limit ``M tau^2`` is reached without cancellation.
    """
    ratio = rx_power / tau_inf_sq
    if ratio == 0.0:
        return n_antennas * tau_inf_sq
    return n_antennas * np.log1p(ratio) / ratio * (tau_inf_sq + rx_power)


def detect_activity(stats: np.ndarray, threshold: float) -> np.ndarray:
    """Indices of rows whose squared norm exceeds ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    norm_sq = np.sum(np.abs(stats) ** 2, axis=-1)
    return np.flatnonzero(norm_sq > threshold)


class _BlowUp(Exception):
    pass


# residual state this many times above its running minimum counts as a blow-up
_BLOWUP_FACTOR = 4.0
RESTART_DAMPINGS = (0.7, 0.5, 0.3)


def run_amp(
    pilot_signal: np.ndarray,
    pilots: np.ndarray,
    config: SystemConfig,
    max_iters: int | None = None,
    tol: float | None = None,
    damping: float = 1.0,
    restart: bool = True,
) -> JadceResult:
    """AMP with the Bernoulli-Gaussian MMSE denoiser.

    ``damping`` in (0, 1] blends each new estimate and residual with the
    previous one; 1 is plain AMP. Damping leaves the fixed points unchanged.
    Near the L ~ K stability edge plain AMP occasionally oscillates far above
    its fixed point; with ``restart`` such a run is repeated with the
    heavier dampings in ``RESTART_DAMPINGS`` (each with a doubled iteration
    budget) until one stays bounded. The last attempt is returned as is.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    max_iters = config.amp_max_iters if max_iters is None else max_iters
    tol = config.amp_tol if tol is None else tol
    ell, n = pilots.shape
    if pilot_signal.shape[0] != ell:
        raise ValueError("pilot_signal and pilots disagree on the pilot length")
    attempts = [(damping, max_iters)]
    if restart:
        attempts += [(d, 2 * max_iters) for d in RESTART_DAMPINGS if d < damping]
    for i, (d, iters) in enumerate(attempts):
        last = i == len(attempts) - 1
        try:
            return _iterate(pilot_signal, pilots, config, iters, tol, d, not last)
        except (_BlowUp, AmpDivergenceError) as exc:
            if last:
                raise
            log.debug("AMP unstable at damping %.2f (%s); restarting with %.2f", d, exc, attempts[i + 1][0])


def _iterate(pilot_signal, pilots, config, max_iters, tol, damping, guard):
    ell, n = pilots.shape
    m = pilot_signal.shape[1]
    lam = config.lam
    # iterate in units of the noise power; rescaled on return
    unit = config.noise_var
    beta = config.rx_power / unit

    y = pilot_signal / np.sqrt(ell * unit)
    a_h = pilots.conj().T
    state = AmpState(np.zeros((n, m), dtype=complex), y.copy(), np.sum(np.abs(y) ** 2) / (ell * m))
    history = [state.tau_sq]
    lowest = state.tau_sq
    last_tau = state.tau_sq
    it = 0
    r = state.estimates
    for it in range(1, max_iters + 1):
        r = state.estimates + a_h @ state.residual
        x_new, div = mmse_denoiser(r, state.tau_sq, lam, beta)
        z = y - pilots @ x_new + (n / ell) * float(np.mean(div)) * state.residual
        if damping < 1.0:
            x_new = damping * x_new + (1.0 - damping) * state.estimates
            z = damping * z + (1.0 - damping) * state.residual
        tau_sq = float(np.sum(np.abs(z) ** 2) / (ell * m))
        if not np.isfinite(tau_sq) or not np.all(np.isfinite(x_new)):
            raise AmpDivergenceError(it)
        change = abs(tau_sq - state.tau_sq) / state.tau_sq
        last_tau = state.tau_sq
        state = AmpState(x_new, z, tau_sq)
        history.append(tau_sq)
        if guard and tau_sq > _BLOWUP_FACTOR * lowest:
            raise _BlowUp(f"state rose to {tau_sq / lowest:.1f}x its minimum at iteration {it}")
        lowest = min(lowest, tau_sq)
        if change < tol:
            break

    # r was produced at state last_tau; detection and estimates use that pair
    thr = detection_threshold(last_tau, beta, m)
    detected = detect_activity(r, thr)
    estimates = state.estimates.copy()
    estimates[detected] = (beta / (beta + last_tau)) * r[detected]
    amp_scale = np.sqrt(unit)
    return JadceResult(
        estimates * amp_scale,
        detected,
        last_tau * unit,
        it,
        thr * unit,
        [t * unit for t in history],
        r * amp_scale,
        damping,
    )


def _se_mse_fn(config: SystemConfig, samples: int, seed: int):
    """Per-component MSE of the MMSE denoiser as a function of tau^2.

    ``||X + tau V||^2`` is ``s G`` with ``G ~ Gamma(M, 1)`` and ``s`` equal to
    ``beta + tau^2`` (active) or ``tau^2`` (inactive), so the M-dimensional
    expectation only needs draws of ``G``. The same draws are reused for every
    ``tau^2`` so the recursion is a deterministic map.
    """
    m, beta, lam = config.n_antennas, config.rx_power, config.lam
    g = make_rng(seed).gamma(m, size=samples)

    def mse(tau_sq: float) -> float:
        if lam == 0.0:
            return 0.0
        gain = beta / (beta + tau_sq)
        s1, s0 = beta + tau_sq, tau_sq
        pi1 = posterior_activity(s1 * g, tau_sq, lam, beta, m)
        pi0 = posterior_activity(s0 * g, tau_sq, lam, beta, m)
        # E||eta||^2 for an active row uses E[G] = M exactly; only the
        # (1 - pi^2) correction is sampled.
        active = beta * tau_sq / (beta + tau_sq) + gain**2 * s1 * np.mean((1.0 - pi1**2) * g) / m
        inactive = gain**2 * s0 * np.mean(pi0**2 * g) / m
        return lam * active + (1.0 - lam) * inactive

    return mse


def initial_state(config: SystemConfig) -> float:
    """tau_0^2 for zero initial estimates: sigma^2/L + (N/L) lam beta."""
    return (config.noise_var + config.n_users * config.lam * config.rx_power) / config.pilot_len


def state_evolution_trajectory(
    config: SystemConfig, n_iters: int, tau0_sq: float | None = None, samples: int = SE_SAMPLES, seed: int = SE_SEED
) -> np.ndarray:
    """tau_0^2, ..., tau_n^2 of the scalar recursion."""
    mse = _se_mse_fn(config, samples, seed)
    ell, n = config.pilot_len, config.n_users
    out = [initial_state(config) if tau0_sq is None else tau0_sq]
    for _ in range(n_iters):
        out.append(config.noise_var / ell + n / ell * mse(out[-1]))
    return np.array(out)


def state_evolution_fixed_point(config: SystemConfig, samples: int = SE_SAMPLES, seed: int = SE_SEED) -> float:
    """Converged tau_inf^2 of ``tau^2 <- sigma^2/L + (N/L) mse(tau^2)``."""
    if config.pilot_len <= config.k:
        log.warning("pilot_len %d <= active users %d; AMP is outside its stable regime", config.pilot_len, config.k)
    mse = _se_mse_fn(config, samples, seed)
    ell, n = config.pilot_len, config.n_users
    tau = initial_state(config)
    prev = tau
    for _ in range(SE_MAX_ITERS):
        prev, tau = tau, config.noise_var / ell + n / ell * mse(tau)
        if abs(tau - prev) / prev < SE_RTOL:
            return tau
    raise StateEvolutionError(tau, prev)


def high_snr_fixed_point(config: SystemConfig) -> float:
    """Limit of tau_inf^2 as beta / sigma^2 grows: sigma^2 / (L - K)."""
    if config.pilot_len <= config.k:
        raise ValueError("high-SNR fixed point needs pilot_len > active users")
    return config.noise_var / (config.pilot_len - config.k)
