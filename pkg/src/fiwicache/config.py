"""Network parameters, validation, config-file IO and seeding."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

__all__ = [
    "NetworkConfig",
    "ValidatedConfig",
    "InvalidConfig",
    "validate_config",
    "load_config",
    "save_config",
    "config_to_dict",
    "config_hash",
    "trial_rng",
    "db_to_linear",
    "FIELD_ALIASES",
]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# -174 dBm/Hz thermal floor over 10 MHz with a 9 dB noise figure: -95 dBm.
_DEFAULT_NOISE_W = db_to_linear(-174.0 + 10.0 * math.log10(10e6) + 9.0 - 30.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Scalar parameters of a cache-enabled FiWi network (SI units).

    Defaults reproduce the standard simulation setting: 16 ONU-APs on a
    700 m square, 10 MHz per UE, 15 Gbit/s feeder, 40 GB caches and
    100 MB files. ``beam_gain`` and ``noise_power`` have no published
    value; 18 dB and -95 dBm are used.
    """

    num_aps: int = 16
    num_files: int = 1000
    subchannel_bw: float = 10e6
    backhaul_capacity: float = 15e9
    cell_radius: float = 100.0
    cache_size: float = 40e9 * 8
    max_power: float = 8.0
    circuit_power: float = 2.0
    file_size: float = 100e6 * 8
    zipf_delta: float = 0.8
    ue_density: float = 4e-4
    power_amp_coeff: float = 1.2
    caching_power_coeff: float = 6.25e-12
    blockage_beta: float = 0.002
    pathloss_los: float = 2.0
    pathloss_nlos: float = 4.0
    nakagami_los: int = 3
    nakagami_nlos: int = 2
    beam_gain: float = db_to_linear(18.0)
    noise_power: float = _DEFAULT_NOISE_W
    area_side: float = 700.0
    rng_seed: int = 0
    min_distance: float = 1.0
    dp_bandwidth_unit: float = 1e6
    # WF-RC allocates equal power unless this is set.
    wfrc_waterfill: bool = False
    # An AP the knapsack leaves out still serves its cache hits over the
    # air; off, it contributes nothing.
    hit_only_fallback: bool = True

    def replace(self, **changes: Any) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    @property
    def transmit_budget(self) -> float:
        """Power left for transmission and caching, P_M - P_cc."""
        return self.max_power - self.circuit_power

    @property
    def max_cached_files(self) -> int:
        """Largest cached-file count allowed by storage and catalog."""
        if self.cache_size <= 0:
            return 0
        return int(min(self.num_files, math.floor(self.cache_size / self.file_size)))

    @property
    def ues_per_cell(self) -> float:
        """Mean UEs per AP under the circular-cell analysis, lambda*pi*D^2."""
        return self.ue_density * math.pi * self.cell_radius**2

    def with_radius(self, radius: float, hold_ue_count: bool = True) -> "NetworkConfig":
        """Change the cell radius, optionally keeping the mean UE count fixed.

        With ``hold_ue_count`` the square area scales with the radius and
        the UE density scales with its inverse square, so both the
        simulated drop size and lambda*pi*D^2 stay constant.
        """
        if not hold_ue_count:
            return self.replace(cell_radius=radius)
        k = radius / self.cell_radius
        return self.replace(
            cell_radius=radius,
            area_side=self.area_side * k,
            ue_density=self.ue_density / k**2,
            min_distance=min(self.min_distance, radius / 2),
        )


ValidatedConfig = NetworkConfig

# Symbolic names accepted by the CLI and sweep files.
FIELD_ALIASES: dict[str, str] = {
    "N": "num_aps",
    "J": "num_files",
    "B": "subchannel_bw",
    "C": "backhaul_capacity",
    "D": "cell_radius",
    "Q": "cache_size",
    "P_M": "max_power",
    "P_cc": "circuit_power",
    "s": "file_size",
    "delta": "zipf_delta",
    "δ": "zipf_delta",
    "lambda": "ue_density",
    "λ": "ue_density",
    "rho": "power_amp_coeff",
    "ρ": "power_amp_coeff",
    "omega": "caching_power_coeff",
    "ω": "caching_power_coeff",
    "beta": "blockage_beta",
    "β": "blockage_beta",
    "alpha_L": "pathloss_los",
    "alpha_N": "pathloss_nlos",
    "N_L": "nakagami_los",
    "N_N": "nakagami_nlos",
    "G": "beam_gain",
    "sigma2": "noise_power",
    "σ²": "noise_power",
    "r_min": "min_distance",
}


class InvalidConfig(ValueError):
    """Raised with every violated invariant at once.

    ``violations`` is a list of ``(field, reason)`` pairs.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        msg = "; ".join(f"{f}: {r}" for f, r in self.violations)
        super().__init__(f"invalid config: {msg}")


_INT_FIELDS = ("num_aps", "num_files", "nakagami_los", "nakagami_nlos", "rng_seed")
_STRICTLY_POSITIVE = (
    "num_aps",
    "num_files",
    "subchannel_bw",
    "backhaul_capacity",
    "cell_radius",
    "max_power",
    "file_size",
    "caching_power_coeff",
    "blockage_beta",
    "pathloss_los",
    "pathloss_nlos",
    "beam_gain",
    "noise_power",
    "area_side",
    "min_distance",
    "dp_bandwidth_unit",
)


def validate_config(cfg: NetworkConfig) -> ValidatedConfig:
    """Check physical consistency and return ``cfg`` unchanged.

    Raises
    ------
    InvalidConfig
        Listing every violated invariant.
    """
    bad: list[tuple[str, str]] = []

    for name in _INT_FIELDS:
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            bad.append((name, "must be an integer"))
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            continue
        if isinstance(v, (int, float, np.integer, np.floating)) and math.isnan(float(v)):
            bad.append((f.name, "must not be NaN"))

    for name in _STRICTLY_POSITIVE:
        if not getattr(cfg, name) > 0:
            bad.append((name, "must be strictly positive"))
    if not cfg.circuit_power >= 0:
        bad.append(("circuit_power", "must be nonnegative"))
    if not cfg.ue_density >= 0:
        bad.append(("ue_density", "must be nonnegative"))
    if not cfg.cache_size >= 0:
        bad.append(("cache_size", "Q must be nonnegative"))
    if not cfg.zipf_delta >= 0:
        bad.append(("zipf_delta", "delta must be nonnegative"))
    if not cfg.power_amp_coeff >= 1:
        bad.append(("power_amp_coeff", "rho must be at least 1"))
    for name in ("nakagami_los", "nakagami_nlos"):
        if not getattr(cfg, name) >= 2:
            bad.append((name, "requires N_i>1 (mean of 1/h is N_i/(N_i-1))"))
    if not cfg.max_power > cfg.circuit_power:
        bad.append(("max_power", "P_M must exceed P_cc"))
    if not cfg.min_distance < cfg.cell_radius:
        bad.append(("min_distance", "r_min must be below the cell radius D"))
    if cfg.dp_bandwidth_unit > 0 and not cfg.backhaul_capacity / cfg.dp_bandwidth_unit >= 100:
        bad.append(("dp_bandwidth_unit", "backhaul capacity must span at least 100 units"))
    if isinstance(cfg.rng_seed, (int, np.integer)) and not 0 <= cfg.rng_seed < 2**64:
        bad.append(("rng_seed", "must fit in an unsigned 64-bit integer"))

    if bad:
        raise InvalidConfig(bad)
    return cfg


def resolve_field(name: str) -> str:
    """Map a symbol or field name to a NetworkConfig field name."""
    name = FIELD_ALIASES.get(name, name)
    if name not in {f.name for f in fields(NetworkConfig)}:
        raise KeyError(name)
    return name


def _coerce(name: str, value: Any) -> Any:
    ftype = {f.name: f.type for f in fields(NetworkConfig)}[name]
    if ftype == "bool":
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if ftype == "int":
        if isinstance(value, str):
            value = float(value) if any(c in value for c in ".eE") else int(value)
        if isinstance(value, float):
            if not value.is_integer():
                return value  # validate_config reports it
            return int(value)
        return value
    return float(value)


def config_from_mapping(data: Mapping[str, Any], base: NetworkConfig | None = None) -> NetworkConfig:
    """Build a config from flat key/value pairs (field names or symbols)."""
    base = base or NetworkConfig()
    changes: dict[str, Any] = {}
    unknown = []
    for key, value in data.items():
        try:
            name = resolve_field(key)
        except KeyError:
            unknown.append(key)
            continue
        changes[name] = _coerce(name, value)
    if unknown:
        raise InvalidConfig([(k, "unknown config key") for k in unknown])
    return base.replace(**changes)


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> NetworkConfig:
    """Read a flat JSON config file, apply overrides, and validate.

    Missing keys take their defaults. Overrides win over file values.
    """
    data: dict[str, Any] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InvalidConfig([("<file>", "config file must hold a JSON object")])
    cfg = config_from_mapping(data)
    if overrides:
        cfg = config_from_mapping(overrides, base=cfg)
    return validate_config(cfg)


def config_to_dict(cfg: NetworkConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def save_config(cfg: NetworkConfig, path: str | Path) -> None:
    # json writes floats with repr(), so every value round-trips exactly
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")


def config_hash(cfg: NetworkConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def trial_rng(seed: int, point: int = 0, trial: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for sweep point ``point``, trial ``trial``.

    The three integers are mixed by ``numpy.random.SeedSequence``.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(point), int(trial)]))
