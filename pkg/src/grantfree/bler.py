"""BLER of a correctly detected active user under zero-forcing reception.

Conditioned on ``e`` missed and ``f`` falsely detected users, the
post-processing SNR of a correctly detected user is Gamma distributed with
shape ``M - K + e - f + 1`` (the dimension left after projecting out the other
``K - e + f - 1`` estimated channels) and scale equal to the per-component
variance of the channel estimate over the interference-plus-noise power::

    scale = [beta^2 / (beta + tau^2)] / [(K - e) beta tau^2 / (beta + tau^2) + e beta + sigma^2]

The unconditional BLER averages the conditional one over independent
Binomial(K, P_M) misses and Binomial(N - K, P_F) false alarms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .detection import DetectionStats, detection_stats
from .fbl import CodeParams, bler_normal_approx, rate_threshold
from .special import log_binomial_pmf, reg_lower_gamma
from .system import SystemConfig

# Gamma mass beyond the upper integration limit; the BLER there is ~0 anyway.
_UPPER_TAIL = 1e-13


class QuadratureError(RuntimeError):
    def __init__(self, achieved: float):
        super().__init__(f"conditional BLER quadrature did not converge (error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class SnrLaw:
    shape: float
    scale: float
    miss_count: int
    false_count: int
    feasible: bool

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def cdf(self, x):
        return reg_lower_gamma(self.shape, np.asarray(x, dtype=float) / self.scale)


@dataclass(frozen=True)
class BlerReport:
    bler_mixture: float  # truncated mixture, equal to the lower bracket
    bler_mixture_lo: float
    bler_mixture_hi: float
    bler_dominant: float
    p_overall: float  # P_M + (1 - P_M) * bler_mixture
    p_overall_hi: float
    p_overall_dominant: float
    p_miss: float
    p_false: float
    tau_inf_sq: float
    terms_used: int
    neglected_mass: float
    config: SystemConfig


def conditional_snr_law(e: int, f: int, config: SystemConfig, tau_inf_sq: float) -> SnrLaw:
    m, k, n = config.n_antennas, config.k, config.n_users
    if not (0 <= e <= k and 0 <= f <= n - k):
        raise ValueError("need 0 <= e <= K and 0 <= f <= N - K")
    beta, s2, t = config.rx_power, config.noise_var, tau_inf_sq
    est_var = beta * beta / (beta + t)
    interference = (k - e) * beta * t / (beta + t) + e * beta + s2
    return SnrLaw(
        shape=float(m - k + e - f + 1),
        scale=est_var / interference,
        miss_count=e,
        false_count=f,
        feasible=m >= k - e + f,
    )


def conditional_bler_numerical(law: SnrLaw, code: CodeParams) -> float:
    """``E[eps(gamma)]`` under the SNR law by adaptive quadrature.

    Integrates in the standardized variable ``x = gamma / scale`` and splits
    at the rate threshold, where the BLER drops from ~1 to ~0. The lower
    tail is always kept in full because for reliable links it carries the
    whole answer.
    """
    if not law.feasible:
        return 1.0
    a, scale = law.shape, law.scale
    upper = stats.gamma.isf(_UPPER_TAIL, a)
    knee = rate_threshold(code.rate) / scale

    def integrand(x):
        return bler_normal_approx(scale * x, code) * stats.gamma.pdf(x, a)

    pieces = [(0.0, min(knee, upper))]
    if knee < upper:
        pieces.append((knee, upper))
    total = 0.0
    for lo, hi in pieces:
        # a spike in the Gamma density can hide from a wide panel; give quad
        # the mode as a breakpoint when it lies inside
        mode = max(a - 1.0, 0.0)
        pts = [mode] if lo < mode < hi else None
        val, err, info = integrate.quad(
            integrand, lo, hi, points=pts, epsabs=0.0, epsrel=1e-10, limit=400, full_output=1
        )[:3]
        if err > max(1e-10, 1e-6 * abs(val)):
            raise QuadratureError(err)
        total += val
    return float(min(max(total, 0.0), 1.0))


def conditional_bler_closed_form(law: SnrLaw, code: CodeParams) -> float:
    """Linearized-BLER shortcut: the SNR law's CDF at ``r = 2^R - 1``."""
    if not law.feasible:
        return 1.0
    return float(reg_lower_gamma(law.shape, rate_threshold(code.rate) / law.scale))


def overall_bler(p_miss: float, bler_detected: float) -> float:
    """``P_M + (1 - P_M) eps``: a missed user always loses its packet."""
    if not (0.0 <= p_miss <= 1.0 and 0.0 <= bler_detected <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return p_miss + (1.0 - p_miss) * bler_detected


def _outcome_weights(k: int, n_inactive: int, p_miss: float, p_false: float):
    """Log-weights of every (e, f) outcome, as two marginal vectors."""
    log_e = log_binomial_pmf(k, np.arange(k + 1), p_miss)
    log_f = log_binomial_pmf(n_inactive, np.arange(n_inactive + 1), p_false)
    return np.atleast_1d(log_e), np.atleast_1d(log_f)


def mixture_outcomes(config: SystemConfig, stats: DetectionStats, trunc_tol: float):
    """Detection outcomes summed by :func:`mixture_bler`.

    Returns ``(outcomes, neglected)`` where ``outcomes`` lists ``(e, f, weight)``
    in decreasing weight, stopping once the mass left out drops below
    ``trunc_tol``, and ``neglected`` is that left-out mass. The error-free
    outcome is always included.
    """
    if not 0.0 < trunc_tol <= 1e-6:
        raise ValueError("trunc_tol must lie in (0, 1e-6]")
    k, n_inactive = config.k, config.n_users - config.k
    log_e, log_f = _outcome_weights(k, n_inactive, stats.p_miss, stats.p_false)

    # marginals are tiny beyond a few hundred sigma; keep only outcomes that
    # can matter before forming the product grid
    keep_e = np.flatnonzero(log_e > np.log(trunc_tol) - 60.0)
    keep_f = np.flatnonzero(log_f > np.log(trunc_tol) - 60.0)
    grid = (log_e[keep_e, None] + log_f[None, keep_f]).ravel()
    order = np.argsort(-grid, kind="stable")
    weights = np.exp(grid[order])
    # mass not yet included after taking the first i terms, counting the
    # pre-pruned outcomes as well
    pruned = max(0.0, 1.0 - math.fsum(weights))
    tail = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]]) + pruned
    n_terms = int(np.argmax(tail < trunc_tol)) if np.any(tail < trunc_tol) else len(weights)
    n_terms = max(n_terms, 1)

    outcomes = []
    for w, idx in zip(weights[:n_terms], order[:n_terms]):
        outcomes.append((int(keep_e[idx // keep_f.size]), int(keep_f[idx % keep_f.size]), float(w)))
    neglected = float(tail[n_terms])
    if not any(e == 0 and f == 0 for e, f, _ in outcomes):
        # keeps the dominant term below the mixture
        w00 = math.exp(log_e[0] + log_f[0])
        if w00 > 0.0:
            outcomes.append((0, 0, w00))
            neglected = max(0.0, neglected - w00)
    return outcomes, neglected


def mixture_bler(
    config: SystemConfig,
    stats: DetectionStats,
    code: CodeParams,
    trunc_tol: float | None = None,
    conditional: str = "closed",
) -> BlerReport:
    """Average the conditional BLER over detection outcomes.

    Outcomes are summed in decreasing probability until the mass left out
    drops below ``trunc_tol``. The neglected mass is reported and counted as
    BLER 1 in the upper bracket.
    """
    trunc_tol = config.trunc_tol if trunc_tol is None else trunc_tol
    cond_fn = {"closed": conditional_bler_closed_form, "numerical": conditional_bler_numerical}[conditional]
    outcomes, neglected = mixture_outcomes(config, stats, trunc_tol)
    lo = 0.0
    for e, f, w in outcomes:
        lo += w * cond_fn(conditional_snr_law(e, f, config, stats.tau_inf_sq), code)
    lo = min(lo, 1.0)
    hi = min(lo + neglected, 1.0)
    dominant = dominant_term_bler(config, stats, code)
    return BlerReport(
        bler_mixture=lo,
        bler_mixture_lo=lo,
        bler_mixture_hi=hi,
        bler_dominant=dominant,
        p_overall=overall_bler(stats.p_miss, lo),
        p_overall_hi=overall_bler(stats.p_miss, hi),
        p_overall_dominant=overall_bler(stats.p_miss, dominant),
        p_miss=stats.p_miss,
        p_false=stats.p_false,
        tau_inf_sq=stats.tau_inf_sq,
        terms_used=len(outcomes),
        neglected_mass=neglected,
        config=config,
    )


def dominant_term_bler(config: SystemConfig, stats: DetectionStats, code: CodeParams) -> float:
    """Keep only the outcome with no detection errors."""
    k, n = config.k, config.n_users
    log_w = (n - k) * math.log1p(-stats.p_false) if stats.p_false < 1 else -math.inf
    log_w += k * math.log1p(-stats.p_miss) if stats.p_miss < 1 else (-math.inf if k else 0.0)
    if log_w == -math.inf:
        return 0.0
    law = conditional_snr_law(0, 0, config, stats.tau_inf_sq)
    return math.exp(log_w) * conditional_bler_closed_form(law, code)


def analyze(config: SystemConfig, mode: str = "exact", conditional: str = "closed", trunc_tol=None) -> BlerReport:
    """Full analytical report at one operating point.

    ``mode`` picks the fixed point: state evolution (``exact``) or the
    high-SNR limit (``fast``).
    """
    det = detection_stats(config, mode=mode)
    return mixture_bler(config, det, CodeParams.from_config(config), trunc_tol, conditional)
