"""Volume-adjustable water-filling (VABWF) for one AP and its KKT audit.

For a fixed number of cached files the AP spends whatever the caching
power leaves of P_M - P_cc on transmission, and splits it over its UEs by
water-filling. The "volume" of water therefore moves with the cache size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig

__all__ = [
    "WaterfillResult",
    "KKTReport",
    "EmptyUserSet",
    "NoTransmitBudget",
    "transmit_budget",
    "noise_floors",
    "vabwf",
    "waterfill_batch",
    "equal_power_rates",
    "verify_kkt",
]

LN2 = math.log(2.0)


class EmptyUserSet(ValueError):
    pass


class NoTransmitBudget(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WaterfillResult:
    powers: np.ndarray
    water_level: float
    mu: float
    sum_rate: float
    active_set: np.ndarray
    rates: np.ndarray = field(repr=False)
    iterations: int = 1


@dataclass
class KKTReport:
    """Worst residual of each KKT condition, all relative."""

    stationarity: float
    budget: float
    complementary_slackness: float
    dual_feasibility: float
    epsilon: np.ndarray = field(repr=False)
    tol: float = 1e-8

    @property
    def residuals(self) -> dict[str, float]:
        return {
            "stationarity": self.stationarity,
            "budget": self.budget,
            "complementary_slackness": self.complementary_slackness,
            "dual_feasibility": self.dual_feasibility,
        }

    @property
    def ok(self) -> bool:
        return all(v < self.tol for v in self.residuals.values())


def transmit_budget(cached_count, cfg: NetworkConfig):
    """Power left for the amplifier after caching: P_M - P_cc - omega j s."""
    return cfg.transmit_budget - cfg.caching_power_coeff * np.asarray(cached_count, dtype=float) * cfg.file_size


def noise_floors(gains, cfg: NetworkConfig) -> np.ndarray:
    """Vessel bottom sigma^2 / (G g) of each UE, in watts."""
    return cfg.noise_power / (cfg.beam_gain * np.asarray(gains, dtype=float))


def _rates(powers, floors, cfg):
    return cfg.subchannel_bw * np.log2(1.0 + powers / floors)


def vabwf(gains, cached_count: int, cfg: NetworkConfig) -> WaterfillResult:
    """Optimal per-UE powers of one AP with ``cached_count`` files cached.

    The common water level is recomputed over the surviving UEs until no
    allocation is negative; dropped UEs get zero power.

    Raises
    ------
    EmptyUserSet
        No gains given.
    NoTransmitBudget
        Caching alone uses up P_M - P_cc.
    """
    g = np.asarray(gains, dtype=float)
    if g.size == 0:
        raise EmptyUserSet("AP serves no UEs")
    budget = float(transmit_budget(cached_count, cfg))
    if budget <= 0:
        raise NoTransmitBudget(f"caching {cached_count} files leaves no transmit power")

    floors = noise_floors(g, cfg)
    volume = budget / cfg.power_amp_coeff
    active = np.ones(g.size, dtype=bool)
    it = 0
    while True:
        it += 1
        level = (volume + floors[active].sum()) / active.sum()
        drop = active & (level - floors <= 0)
        if not drop.any():
            break
        active &= ~drop

    powers = np.where(active, level - floors, 0.0)
    rates = _rates(powers, floors, cfg)
    mu = cfg.subchannel_bw / (cfg.power_amp_coeff * level * LN2)
    return WaterfillResult(
        powers=powers,
        water_level=level,
        mu=mu,
        sum_rate=float(rates.sum()),
        active_set=np.flatnonzero(active),
        rates=rates,
        iterations=it,
    )


def waterfill_batch(gains, budgets, cfg: NetworkConfig):
    """Water-fill one AP for many budgets at once.

    Returns ``(levels, sum_rates)``, one entry per budget. Same allocation
    as :func:`vabwf`, computed from the sorted-floor characterisation of
    the active set instead of iterating.
    """
    floors = np.sort(noise_floors(gains, cfg))
    vol = np.asarray(budgets, dtype=float) / cfg.power_amp_coeff
    k = np.arange(1, floors.size + 1)
    cand = (vol[:, None] + np.cumsum(floors)[None, :]) / k[None, :]
    # UE k (by increasing floor) is active iff the level with k users clears its floor
    n_active = (cand > floors[None, :]).sum(axis=1)
    levels = cand[np.arange(len(vol)), np.maximum(n_active, 1) - 1]
    p = np.maximum(levels[:, None] - floors[None, :], 0.0)
    return levels, _rates(p, floors[None, :], cfg).sum(axis=1)


def equal_power_rates(gains, budgets, cfg: NetworkConfig) -> np.ndarray:
    """Sum rate when each budget is split evenly over the UEs."""
    floors = noise_floors(gains, cfg)
    p = np.asarray(budgets, dtype=float)[:, None] / (cfg.power_amp_coeff * floors.size)
    return _rates(p, floors[None, :], cfg).sum(axis=1)


def verify_kkt(res: WaterfillResult, gains, cached_count: int, cfg: NetworkConfig,
               tol: float = 1e-8) -> KKTReport:
    """Residuals of stationarity, power-budget equality, eps*P = 0 and dual feasibility.

    eps_k = rho mu - B G g_k / ((sigma^2 + G g_k P_k) ln 2) is derived
    here from the result; it is zero on the active set.
    """
    floors = noise_floors(gains, cfg)
    p = np.asarray(res.powers, dtype=float)
    rho_mu = cfg.power_amp_coeff * res.mu
    marginal = cfg.subchannel_bw / ((floors + p) * LN2)
    eps = rho_mu - marginal
    on = p > 0

    stat = float(np.max(np.abs(eps[on])) / rho_mu) if on.any() else 0.0
    used = cfg.power_amp_coeff * p.sum() + cfg.caching_power_coeff * cached_count * cfg.file_size
    budget = abs(used - cfg.transmit_budget) / cfg.max_power
    cs = float(np.max(np.abs(eps * p)) / (rho_mu * res.water_level)) if p.size else 0.0
    dual = max(0.0, -float(eps[~on].min()) / rho_mu if (~on).any() else 0.0, -res.mu)
    return KKTReport(stat, budget, cs, dual, eps, tol)
