"""mmWave link model: LOS/NLOS blockage, Nakagami fading, SNR and rate."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import NetworkConfig
from .geometry import Deployment

__all__ = [
    "LinkState",
    "ChannelRealization",
    "NegativeDistance",
    "NegativePower",
    "blockage_probability",
    "sample_fading",
    "realize_channel",
    "link_rate",
]


class NegativeDistance(ValueError):
    pass


class NegativePower(ValueError):
    pass


class LinkState(Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-AP arrays aligned with ``Deployment.assoc``.

    ``gains[n][k] = r**-alpha * h`` for the k-th UE of AP n, with alpha
    picked by the LOS flag.
    """

    los: tuple[np.ndarray, ...]
    fading: tuple[np.ndarray, ...]
    gains: tuple[np.ndarray, ...]

    def states(self, n: int) -> list[LinkState]:
        return [LinkState.LOS if x else LinkState.NLOS for x in self.los[n]]


def blockage_probability(r, beta: float):
    """Return ``(p_los, p_nlos)`` with p_los = exp(-beta r)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise NegativeDistance("link distance must be nonnegative")
    p_los = np.exp(-beta * r_arr)
    if p_los.ndim == 0:
        p_los = float(p_los)
    return p_los, 1.0 - p_los


def sample_fading(order, rng: np.random.Generator, size=None) -> np.ndarray:
    """Unit-mean Nakagami power fading, Gamma(shape=N, scale=1/N)."""
    order = np.asarray(order, dtype=float)
    return rng.gamma(order, 1.0 / order, size=size)


def realize_channel(dep: Deployment, cfg: NetworkConfig, rng: np.random.Generator) -> ChannelRealization:
    los_all = np.empty(dep.num_ues, dtype=bool)
    r_all = np.empty(dep.num_ues)
    for idx, r in zip(dep.assoc, dep.distances):
        r_all[idx] = r
    # draws happen in UE order so the result does not depend on AP count
    p_los, _ = blockage_probability(r_all, cfg.blockage_beta)
    los_all[:] = rng.random(dep.num_ues) < p_los
    order = np.where(los_all, cfg.nakagami_los, cfg.nakagami_nlos)
    h_all = sample_fading(order, rng) if dep.num_ues else np.zeros(0)
    alpha = np.where(los_all, cfg.pathloss_los, cfg.pathloss_nlos)
    g_all = r_all ** (-alpha) * h_all

    return ChannelRealization(
        los=tuple(los_all[idx] for idx in dep.assoc),
        fading=tuple(h_all[idx] for idx in dep.assoc),
        gains=tuple(g_all[idx] for idx in dep.assoc),
    )


def link_rate(power, gain, cfg: NetworkConfig):
    """SNR ``P g G / sigma^2`` and Shannon rate ``B log2(1 + SNR)`` in bit/s."""
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise NegativePower("transmit power must be nonnegative")
    snr = p * np.asarray(gain, dtype=float) * cfg.beam_gain / cfg.noise_power
    rate = cfg.subchannel_bw * np.log2(1.0 + snr)
    if snr.ndim == 0:
        return float(snr), float(rate)
    return snr, rate
