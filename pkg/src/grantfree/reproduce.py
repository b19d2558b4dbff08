"""Sweeps behind the BLER-vs-K and BLER-vs-L tables.

All BLER columns are overall packet error probabilities, i.e. they include
the missed-detection event.
"""

from __future__ import annotations

import math

import numpy as np

from .bler import analyze
from .montecarlo import run_campaign
from .pilot import evaluate_pilot_length
from .system import SystemConfig

FIG2_COLUMNS = [
    "K", "L", "p_miss", "p_false", "tau_inf_sq", "bler_mixture_lo", "bler_mixture_hi",
    "bler_dominant", "bler_empirical", "ci_half_width", "trials",
]
FIG3_COLUMNS = [
    "K", "L", "rate", "p_miss", "p_false", "tau_inf_sq", "bler_analytic",
    "bler_empirical", "ci_half_width", "trials", "is_argmin",
]


def point_seed(seed: int, k: int, ell: int) -> int:
    return int(np.random.SeedSequence([seed, k, ell]).generate_state(1, dtype=np.uint32)[0])


def parse_grid(text: str) -> list[int]:
    """``"60:110:5"`` (inclusive range) or ``"120,160"``."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        if step <= 0:
            raise ValueError("grid step must be positive")
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",") if p.strip()]


def _empirical(cfg: SystemConfig, trials: int, seed: int, workers: int):
    if trials <= 0:
        return None, None, 0
    emp = run_campaign(cfg, trials, seed, workers)
    return emp.bler, emp.ci_half_width, trials


def fig2_rows(base: SystemConfig, k_grid, l_values, trials=0, seed=0, workers=1, conditional="closed"):
    rows = []
    for ell in l_values:
        for k in k_grid:
            cfg = base.replace(active_count=k, pilot_len=ell)
            rep = analyze(cfg, mode="exact", conditional=conditional)
            bler, ci, n = _empirical(cfg, trials, point_seed(seed, k, ell), workers)
            rows.append({
                "K": k, "L": ell, "p_miss": rep.p_miss, "p_false": rep.p_false, "tau_inf_sq": rep.tau_inf_sq,
                "bler_mixture_lo": rep.p_overall, "bler_mixture_hi": rep.p_overall_hi,
                "bler_dominant": rep.p_overall_dominant, "bler_empirical": bler, "ci_half_width": ci, "trials": n,
            })
    return rows


def fig3_rows(base: SystemConfig, k_values, l_grid, trials=0, seed=0, workers=1):
    rows = []
    for k in k_values:
        cfg_k = base.replace(active_count=k)
        lengths = [ell for ell in l_grid if k < ell <= base.block_len - base.payload_bits]
        block = []
        for ell in lengths:
            pt = evaluate_pilot_length(cfg_k, ell, "fast")
            bler, ci, n = _empirical(cfg_k.replace(pilot_len=ell, active_count=k), trials, point_seed(seed, k, ell), workers)
            block.append({
                "K": k, "L": ell, "rate": pt.rate, "p_miss": pt.p_miss, "p_false": pt.p_false,
                "tau_inf_sq": pt.tau_inf_sq, "bler_analytic": pt.p_overall, "bler_empirical": bler,
                "ci_half_width": ci, "trials": n, "is_argmin": 0,
            })
        if block:
            best = int(np.argmin([r["bler_analytic"] for r in block]))
            block[best]["is_argmin"] = 1
        rows.extend(block)
    return rows


def find_crossing(k_values, curve_a, curve_b):
    """First K where ``curve_a`` rises above ``curve_b`` after lying below it.

    Works on the log ratio and interpolates linearly between grid points.
    Returns ``None`` when the curves do not cross that way.
    """
    ks = list(k_values)

    def log_ratio(a, b):
        if a == b:
            return 0.0
        if a <= 0.0 or b <= 0.0:
            return -math.inf if a < b else math.inf
        return math.log(a) - math.log(b)

    d = [log_ratio(a, b) for a, b in zip(curve_a, curve_b)]
    for i in range(1, len(ks)):
        if not d[i - 1] < 0.0:
            continue
        if d[i] > 0.0:
            if math.isinf(d[i - 1]) or math.isinf(d[i]):
                return float(ks[i])
            return ks[i - 1] + (ks[i] - ks[i - 1]) * (-d[i - 1]) / (d[i] - d[i - 1])
        if d[i] == 0.0 and i + 1 < len(ks) and d[i + 1] > 0.0:
            return float(ks[i])
    return None
