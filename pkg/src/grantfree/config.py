"""Flat ``key = value`` run configuration and run manifests."""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .system import SystemConfig

CSV_SCHEMA = 1

_INT_KEYS = {"n_users", "n_antennas", "block_len", "pilot_len", "payload_bits", "active_count",
             "trials", "seed", "amp_max_iters"}
_FLOAT_KEYS = {"activity_prob", "rx_power_db", "noise_dbm", "amp_tol", "trunc_tol"}
_STR_KEYS = {"mode"}
KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

DEFAULTS = {
    "n_users": 2000,
    "n_antennas": 100,
    "block_len": 250,
    "pilot_len": 120,
    "payload_bits": 50,
    "active_count": 100,
    "rx_power_db": -123.8,
    "noise_dbm": -109.0,
    "trials": 2000,
    "seed": 0,
    "amp_max_iters": 50,
    "amp_tol": 1e-8,
    "trunc_tol": 1e-12,
    "mode": "exact",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunSettings:
    system: SystemConfig
    trials: int
    seed: int
    mode: str
    values: dict  # resolved key/value pairs, for the manifest

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.values.items())


def parse_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve(values: dict) -> RunSettings:
    merged = dict(DEFAULTS)
    if "activity_prob" in values and "active_count" not in values:
        merged.pop("active_count")
    merged.update(values)
    if "active_count" in merged and "activity_prob" in merged:
        raise ConfigError("give only one of active_count and activity_prob")
    if merged["mode"] not in ("exact", "fast"):
        raise ConfigError(f"mode must be exact or fast, got {merged['mode']!r}")
    if merged["trials"] < 0:
        raise ConfigError("trials must be >= 0")
    try:
        system = SystemConfig.from_db(
            rx_power_db=merged["rx_power_db"],
            noise_dbm=merged["noise_dbm"],
            n_users=merged["n_users"],
            n_antennas=merged["n_antennas"],
            block_len=merged["block_len"],
            pilot_len=merged["pilot_len"],
            payload_bits=merged["payload_bits"],
            active_count=merged.get("active_count"),
            activity_prob=merged.get("activity_prob"),
            amp_max_iters=merged["amp_max_iters"],
            amp_tol=merged["amp_tol"],
            trunc_tol=merged["trunc_tol"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunSettings(system, merged["trials"], merged["seed"], merged["mode"], merged)


def load(path: str | Path | None, **overrides) -> RunSettings:
    values = {}
    if path is not None:
        try:
            values = parse_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return resolve(values)


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out: str | Path, command: str, argv: list[str], settings: RunSettings, extra=None) -> Path:
    data = {
        "command": command,
        "argv": argv,
        "config": settings.values,
        "seed": settings.seed,
        "trials": settings.trials,
        "version": __version__,
        "csv_schema": CSV_SCHEMA,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": [str(out)],
    }
    if extra:
        data.update(extra)
    path = manifest_path(out)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
