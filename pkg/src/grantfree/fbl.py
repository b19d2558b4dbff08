"""Finite-blocklength coding: normal approximation and its linearization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import q_function, q_inverse

LOG2E = math.log2(math.e)


@dataclass(frozen=True)
class CodeParams:
    blocklength: int  # data symbols d
    rate: float  # bits per symbol, c / d

    def __post_init__(self):
        if self.blocklength < 1:
            raise ValueError("blocklength must be >= 1")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    @classmethod
    def from_config(cls, config) -> "CodeParams":
        return cls(config.data_len, config.rate)


@dataclass(frozen=True)
class LinearizedBler:
    chi: float
    v_low: float
    mu_high: float
    r_thresh: float


def capacity(snr):
    return np.log2(1.0 + np.asarray(snr, dtype=float)) if np.ndim(snr) else math.log2(1.0 + snr)


def dispersion(snr):
    """``gamma (gamma + 2) / (2 (gamma + 1)^2) * log2(e)^2``."""
    g = np.asarray(snr, dtype=float)
    out = g * (g + 2.0) / (2.0 * (g + 1.0) ** 2) * LOG2E**2
    return out if np.ndim(out) else float(out)


def rate_threshold(rate: float) -> float:
    """SNR at which capacity equals the rate, ``2^R - 1``."""
    return 2.0**rate - 1.0


def bler_normal_approx(snr, code: CodeParams):
    """``Q((C(snr) - R) / sqrt(V(snr) / d))``; 1 at snr = 0 where V vanishes."""
    g = np.asarray(snr, dtype=float)
    if np.any(g < 0):
        raise ValueError("snr must be nonnegative")
    pos = g > 0
    gs = np.where(pos, g, 1.0)
    # C - R written as log2((1 + g) / 2^R) so that g == 2^R - 1 gives exactly 0
    r = rate_threshold(code.rate)
    gap = np.log1p((gs - r) / (1.0 + r)) * LOG2E
    arg = gap / np.sqrt(dispersion(gs) / code.blocklength)
    out = np.where(pos, q_function(arg), 1.0)
    return out if np.ndim(out) else float(out)


def rate_for_error(snr: float, blocklength: int, eps: float) -> float:
    """Largest rate meeting error probability ``eps`` at ``snr``."""
    return capacity(snr) - math.sqrt(dispersion(snr) / blocklength) * q_inverse(eps)


def linearization(code: CodeParams) -> LinearizedBler:
    r = rate_threshold(code.rate)
    chi = math.sqrt(1.0 / (2.0 * math.pi * (2.0 ** (2.0 * code.rate) - 1.0)))
    half = 1.0 / (2.0 * chi * math.sqrt(code.blocklength))
    return LinearizedBler(chi, r - half, r + half, r)


def bler_linearized(snr, code: CodeParams):
    """Three-piece linear approximation of :func:`bler_normal_approx`.

    1 below ``v``, 0 above ``mu``, and ``1/2 - chi sqrt(d) (snr - r)`` between.
    """
    lin = linearization(code)
    g = np.asarray(snr, dtype=float)
    out = np.clip(0.5 - lin.chi * math.sqrt(code.blocklength) * (g - lin.r_thresh), 0.0, 1.0)
    out = np.where(g <= lin.v_low, 1.0, np.where(g >= lin.mu_high, 0.0, out))
    return out if np.ndim(out) else float(out)
