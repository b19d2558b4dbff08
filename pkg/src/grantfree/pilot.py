"""Pilot-length optimization: minimize the overall BLER over L in {K+1, ..., T-c}."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .bler import analyze, dominant_term_bler, overall_bler
from .detection import detection_stats
from .fbl import CodeParams
from .system import SystemConfig

log = logging.getLogger(__name__)

FAST_MIN_SNR_DB = 40.0
MODES = ("exact", "fast")


@dataclass(frozen=True)
class CurvePoint:
    pilot_len: int
    p_overall: float
    p_miss: float
    p_false: float
    rate: float
    tau_inf_sq: float


@dataclass(frozen=True)
class PilotSweepResult:
    best_len: int
    curve: list[CurvePoint]
    mode: str

    @property
    def best(self) -> CurvePoint:
        return next(p for p in self.curve if p.pilot_len == self.best_len)


def feasible_pilot_lengths(config: SystemConfig) -> range:
    return range(config.k + 1, config.block_len - config.payload_bits + 1)


def evaluate_pilot_length(config: SystemConfig, pilot_len: int, mode: str) -> CurvePoint:
    cfg = config.replace(pilot_len=pilot_len, active_count=config.k)
    if mode == "fast":
        det = detection_stats(cfg, mode="fast")
        p = overall_bler(det.p_miss, dominant_term_bler(cfg, det, CodeParams.from_config(cfg)))
    else:
        rep = analyze(cfg, mode="exact")
        det = rep
        p = rep.p_overall
    return CurvePoint(pilot_len, float(p), float(det.p_miss), float(det.p_false), cfg.rate, float(det.tau_inf_sq))


def optimize_pilot_length(config: SystemConfig, mode: str = "fast") -> PilotSweepResult:
    """Evaluate every feasible pilot length and return the curve and its argmin.

    ``fast`` uses the high-SNR fixed point and the dominant outcome only;
    ``exact`` runs state evolution and the full outcome mixture per L.
    Ties go to the shortest pilot.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    lengths = feasible_pilot_lengths(config)
    if len(lengths) < 1 or config.block_len - config.payload_bits <= config.k + 1:
        raise ValueError(
            f"no feasible pilot length: need block_len - payload_bits > active users + 1 "
            f"({config.block_len} - {config.payload_bits} vs {config.k} + 1)"
        )
    if mode == "fast" and 10.0 * np.log10(config.snr) < FAST_MIN_SNR_DB:
        warnings.warn(
            f"receive SNR {10 * np.log10(config.snr):.1f} dB is below {FAST_MIN_SNR_DB:.0f} dB; "
            "the high-SNR fixed point may be inaccurate",
            stacklevel=2,
        )
    curve = [evaluate_pilot_length(config, ell, mode) for ell in lengths]
    values = np.array([p.p_overall for p in curve])
    best = curve[int(np.argmin(values))].pilot_len
    log.debug("pilot sweep (%s): L* = %d, P_e = %.3e", mode, best, values.min())
    return PilotSweepResult(best, curve, mode)
