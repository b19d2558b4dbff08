"""Scalar probability kernels: Gaussian tail, incomplete gamma, binomial pmf.

All functions accept numpy arrays and broadcast. They are thin, domain-checked
wrappers around ``scipy.special``; callers never touch scipy directly so the
edge-case conventions live in one place.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sc


def q_function(x):
    """Standard Gaussian upper tail ``Q(x) = P(Z > x)``."""
    out = sc.ndtr(-np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def log_q_function(x):
    """``log Q(x)``, finite far into the upper tail."""
    out = sc.log_ndtr(-np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def q_inverse(p):
    """Inverse of :func:`q_function` on the open interval (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("q_inverse is defined only for 0 < p < 1")
    # -ndtri(p) keeps full precision for small p, where ndtri(1 - p) would not.
    out = -sc.ndtri(p)
    return out if np.ndim(out) else float(out)


def _check_gamma_args(shape, x):
    shape = np.asarray(shape, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(shape <= 0.0):
        raise ValueError("incomplete gamma requires shape > 0")
    if np.any(x < 0.0):
        raise ValueError("incomplete gamma requires x >= 0")
    return shape, x


def reg_lower_gamma(shape, x):
    """Regularized lower incomplete gamma ``P(a, x)``: the Gamma(a, 1) CDF at x."""
    shape, x = _check_gamma_args(shape, x)
    out = sc.gammainc(shape, x)
    return out if np.ndim(out) else float(out)


def reg_upper_gamma(shape, x):
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    shape, x = _check_gamma_args(shape, x)
    out = sc.gammaincc(shape, x)
    return out if np.ndim(out) else float(out)


def log_binomial_pmf(n, k, p):
    """``log[C(n, k) p^k (1-p)^(n-k)]`` via log-gamma.

    ``p`` of exactly 0 or 1 is handled without NaNs: impossible outcomes give
    ``-inf`` and the certain outcome gives 0.
    """
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(k < 0) or np.any(k > n):
        raise ValueError("log_binomial_pmf requires 0 <= k <= n")
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("p must lie in [0, 1]")
    log_comb = sc.gammaln(n + 1) - sc.gammaln(k + 1) - sc.gammaln(n - k + 1)
    with np.errstate(divide="ignore"):
        out = log_comb + sc.xlogy(k, p) + sc.xlog1py(n - k, -p)
    return out if np.ndim(out) else float(out)
