"""Zipf popularity, prefix cache placements and the power budget."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig

__all__ = [
    "PopularityModel",
    "CachePlacement",
    "zipf_popularity",
    "hit_ratio",
    "total_power",
    "caching_power",
]


@dataclass(frozen=True, eq=False)
class PopularityModel:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        # cumulative[j] = hit ratio with the j most popular files cached
        object.__setattr__(self, "cumulative", np.concatenate([[0.0], np.cumsum(p)]))

    @property
    def num_files(self) -> int:
        return len(self.probs)

    def prefix_hit(self, count):
        """Hit ratio of the ``count`` most popular files (array-friendly)."""
        c = np.clip(np.asarray(count, dtype=int), 0, self.num_files)
        out = self.cumulative[c]
        # the full catalog hits with certainty, not 1 - rounding
        out = np.where(c == self.num_files, 1.0, out)
        return float(out) if out.ndim == 0 else out

    def subset_hit(self, files) -> float:
        """Hit ratio of an arbitrary set of 0-based file indices."""
        return float(self.probs[np.asarray(files, dtype=int)].sum())


def zipf_popularity(num_files: int, delta: float) -> PopularityModel:
    """p_j = j^-delta / sum_n n^-delta for j = 1..J."""
    if num_files < 1:
        raise ValueError("need at least one file")
    if delta < 0:
        raise ValueError("Zipf exponent must be nonnegative")
    w = np.arange(1, num_files + 1, dtype=float) ** (-delta)
    return PopularityModel(w / w.sum())


@dataclass(frozen=True, eq=False)
class CachePlacement:
    """Per-AP count j_n of cached files; the j_n most popular are stored."""

    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))

    def validate(self, cfg: NetworkConfig) -> None:
        if np.any(self.counts < 0) or np.any(self.counts > cfg.max_cached_files):
            raise ValueError("cached count outside [0, min(J, Q/s)]")
        if np.any(caching_power(self.counts, cfg) > cfg.transmit_budget):
            raise ValueError("caching power exceeds P_M - P_cc")


def caching_power(count, cfg: NetworkConfig):
    return cfg.caching_power_coeff * np.asarray(count, dtype=float) * cfg.file_size


def hit_ratio(pl: CachePlacement, pop: PopularityModel, n: int) -> float:
    return pop.prefix_hit(pl.counts[n])


def total_power(sum_tx_power: float, pl: CachePlacement, cfg: NetworkConfig, n: int) -> float:
    """rho * sum P + omega * j_n * s + P_cc."""
    if sum_tx_power < 0:
        raise ValueError("transmit power must be nonnegative")
    return (cfg.power_amp_coeff * sum_tx_power
            + float(caching_power(pl.counts[n], cfg)) + cfg.circuit_power)
