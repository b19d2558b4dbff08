"""Activity-detection error probabilities and channel-estimation error variances.

At the AMP fixed point each user's effective observation is ``r = x + tau v``,
so ``||r||^2 / s`` is Gamma(M, 1) with ``s = beta + tau^2`` for an active user
and ``s = tau^2`` for an inactive one. Thresholding ``||r||^2`` at ``l`` then
gives a miss probability ``P(M, l / (beta + tau^2))`` (lower tail) and a false
alarm probability ``Q(M, l / tau^2)`` (upper tail).

``convention="printed"`` evaluates the alternative reading with an upper
incomplete gamma and squared arguments instead. It exists only for comparison
and fails the Monte-Carlo checks.
"""

from __future__ import annotations

from dataclasses import dataclass

from .amp import detection_threshold, high_snr_fixed_point, state_evolution_fixed_point
from .special import reg_lower_gamma, reg_upper_gamma
from .system import SystemConfig

CONVENTIONS = ("corrected", "printed")


@dataclass(frozen=True)
class DetectionStats:
    p_miss: float
    p_false: float
    err_var_detected: float
    err_var_missed: float
    tau_inf_sq: float
    threshold: float


def _check(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")


def missed_detection_prob(n_antennas, rx_power, tau_inf_sq, threshold, convention="corrected"):
    _check(convention)
    if convention == "printed":
        return reg_upper_gamma(n_antennas, threshold**2 / (rx_power**2 + tau_inf_sq))
    return reg_lower_gamma(n_antennas, threshold / (rx_power + tau_inf_sq))


def false_alarm_prob(n_antennas, tau_inf_sq, threshold, convention="corrected"):
    _check(convention)
    if convention == "printed":
        return 1.0 - reg_upper_gamma(n_antennas, threshold**2 / tau_inf_sq)
    return reg_upper_gamma(n_antennas, threshold / tau_inf_sq)


def estimation_error_variance(rx_power: float, tau_inf_sq: float, detected: bool) -> float:
    """Per-component variance of ``h - h_hat`` for an active user."""
    if not detected:
        return rx_power
    return rx_power * tau_inf_sq / (rx_power + tau_inf_sq)


def detection_stats(config: SystemConfig, tau_inf_sq: float | None = None, mode: str = "exact", convention="corrected"):
    """DetectionStats at ``tau_inf_sq``, or at the fixed point chosen by ``mode``.

    ``mode="exact"`` runs state evolution; ``mode="fast"`` uses the high-SNR
    fixed point ``sigma^2 / (L - K)``.
    """
    if tau_inf_sq is None:
        if mode == "exact":
            tau_inf_sq = state_evolution_fixed_point(config)
        elif mode == "fast":
            tau_inf_sq = high_snr_fixed_point(config)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    m, beta = config.n_antennas, config.rx_power
    thr = detection_threshold(tau_inf_sq, beta, m)
    return DetectionStats(
        p_miss=missed_detection_prob(m, beta, tau_inf_sq, thr, convention),
        p_false=false_alarm_prob(m, tau_inf_sq, thr, convention),
        err_var_detected=estimation_error_variance(beta, tau_inf_sq, True),
        err_var_missed=estimation_error_variance(beta, tau_inf_sq, False),
        tau_inf_sq=tau_inf_sq,
        threshold=thr,
    )
