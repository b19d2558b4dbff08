"""System configuration and random scenario synthesis.

One scenario is a single transmission block: which users are active, their
power-controlled channels, the non-orthogonal pilot codebook, and the pilot
phase noise. Statistical channel inversion makes every active user arrive
with the same average power ``rx_power`` per antenna, so large-scale fading
never appears explicitly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of non-negative integers.

    Distinct keys give statistically independent streams, so a trial's draws
    never depend on which other trials ran or in what order.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, var) entries from two independent real Gaussians."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(var / 2.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scalars of one operating point, in linear power units (watts).

    Give exactly one of ``active_count`` (exactly K users active per block)
    or ``activity_prob`` (each user active i.i.d. with that probability).
    The missing one is derived through ``activity_prob = K / N``.
    """

    n_users: int = 2000
    n_antennas: int = 100
    block_len: int = 250
    pilot_len: int = 120
    payload_bits: int = 50
    active_count: int | None = 100
    activity_prob: float | None = None
    rx_power: float = db_to_linear(-123.8)
    noise_var: float = dbm_to_watts(-109.0)
    amp_max_iters: int = 50
    amp_tol: float = 1e-8
    trunc_tol: float = 1e-12

    def __post_init__(self):
        if (self.active_count is None) == (self.activity_prob is None):
            raise ValueError("give exactly one of active_count and activity_prob")
        if self.n_users < 1 or self.n_antennas < 1:
            raise ValueError("n_users and n_antennas must be positive")
        if not 0 < self.pilot_len < self.block_len:
            raise ValueError("need 0 < pilot_len < block_len")
        if not 0 < self.payload_bits <= self.block_len - self.pilot_len:
            raise ValueError("need 0 < payload_bits <= block_len - pilot_len (rate <= 1)")
        if self.active_count is not None and not 0 <= self.active_count <= self.n_users:
            raise ValueError("active_count must lie in [0, n_users]")
        if self.activity_prob is not None and not 0 < self.activity_prob <= 1:
            raise ValueError("activity_prob must lie in (0, 1]")
        if self.rx_power <= 0 or self.noise_var <= 0:
            raise ValueError("rx_power and noise_var must be positive")

    @classmethod
    def from_db(cls, rx_power_db: float = -123.8, noise_dbm: float = -109.0, **kw):
        return cls(rx_power=db_to_linear(rx_power_db), noise_var=dbm_to_watts(noise_dbm), **kw)

    @property
    def fixed_count(self) -> bool:
        return self.active_count is not None

    @property
    def k(self) -> int:
        """Number of active users used by the analysis (rounded when λ is given)."""
        if self.active_count is not None:
            return self.active_count
        return int(round(self.activity_prob * self.n_users))

    @property
    def lam(self) -> float:
        if self.activity_prob is not None:
            return self.activity_prob
        return self.active_count / self.n_users

    @property
    def data_len(self) -> int:
        return self.block_len - self.pilot_len

    @property
    def rate(self) -> float:
        """Channel coding rate c / d in bits per symbol."""
        return self.payload_bits / self.data_len

    @property
    def snr(self) -> float:
        """Per-antenna receive SNR ``rx_power / noise_var``."""
        return self.rx_power / self.noise_var

    def replace(self, **changes) -> "SystemConfig":
        if "active_count" in changes and "activity_prob" not in changes:
            changes["activity_prob"] = None
        elif "activity_prob" in changes and "active_count" not in changes:
            changes["active_count"] = None
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Scenario:
    activity: np.ndarray  # (N,) bool
    channels: np.ndarray  # (N, M) complex, CN(0, rx_power) entries
    pilots: np.ndarray  # (L, N) complex, CN(0, 1/L) entries
    pilot_noise: np.ndarray  # (L, M) complex, CN(0, noise_var) entries
    noise_var: float
    seed: int

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.activity)


# Substream labels; appended to the seed key so each component has its own stream.
_ACTIVITY, _CHANNEL, _PILOT, _PILOT_NOISE, _DATA_NOISE = range(5)


def generate_scenario(config: SystemConfig, seed: int) -> Scenario:
    n, m, ell = config.n_users, config.n_antennas, config.pilot_len

    rng = make_rng(seed, _ACTIVITY)
    if config.fixed_count:
        activity = np.zeros(n, dtype=bool)
        activity[rng.choice(n, size=config.active_count, replace=False)] = True
    else:
        activity = rng.random(n) < config.activity_prob

    channels = complex_normal(make_rng(seed, _CHANNEL), (n, m), config.rx_power)
    pilots = complex_normal(make_rng(seed, _PILOT), (ell, n), 1.0 / ell)
    noise = complex_normal(make_rng(seed, _PILOT_NOISE), (ell, m), config.noise_var)
    return Scenario(activity, channels, pilots, noise, config.noise_var, seed)


def received_pilot_signal(scenario: Scenario) -> np.ndarray:
    """``Y_p = sum_n sqrt(L) u_n p_n h_n^T + N_p`` as an (L, M) matrix."""
    ell = scenario.pilots.shape[0]
    idx = scenario.active
    return np.sqrt(ell) * scenario.pilots[:, idx] @ scenario.channels[idx] + scenario.pilot_noise


def received_data_signal(
    scenario: Scenario, symbols: np.ndarray, rng: np.random.Generator | None = None
) -> np.ndarray:
    """``Y = sum_{n active} h_n s_n^T + N`` as an (M, d) matrix.

    ``symbols`` holds one row per active user, in increasing user index order.
    Fresh noise comes from ``rng``, or from the scenario's own data-noise
    stream when omitted.
    """
    idx = scenario.active
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    if symbols.shape[0] != idx.size:
        raise ValueError(f"expected {idx.size} symbol rows, got {symbols.shape[0]}")
    if rng is None:
        rng = make_rng(scenario.seed, _DATA_NOISE)
    m = scenario.channels.shape[1]
    noise = complex_normal(rng, (m, symbols.shape[1]), scenario.noise_var)
    return scenario.channels[idx].T @ symbols + noise
