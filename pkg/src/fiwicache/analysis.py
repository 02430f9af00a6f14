"""Average mmWave rate, backhaul load and the throughput upper bound.

Everything here follows the circular-cell, PPP-averaged model: a cell of
radius D holds lambda*pi*D^2 UEs on average, link lengths have density
2r/D^2, and each AP spends P_T on transmission and P_M - P_cc - P_T on
caching. Rates returned by :func:`average_rate` are spectral
efficiencies (bit/s/Hz); helpers that report bit/s multiply by B.
"""

from __future__ import annotations

import csv
import functools
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .caching import PopularityModel, zipf_popularity
from .config import NetworkConfig

__all__ = [
    "RateModel",
    "UpperBoundResult",
    "IntegrationFailure",
    "rate_model",
    "average_rate",
    "expected_inverse_gain",
    "analytic_cached_files",
    "analytic_hit_ratio",
    "cell_rate",
    "backhaul_load",
    "upper_bound",
    "maximize_upper_bound",
    "golden_section_max",
    "analysis_curve",
    "write_analysis_csv",
    "ANALYSIS_COLUMNS",
]

ANALYSIS_COLUMNS = ["P_T_watts", "tau_bps_hz", "p_hit", "C_n_bps", "R_plus_bps"]

# exp(-40) ~ 4e-18: beyond this the t-integrand is below double precision
_PSI_CUTOFF = 40.0


class IntegrationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RateModel:
    """Constants of the average-rate integral for one transmit power.

    Per link state (index 0 = LOS, 1 = NLOS): ``eta = N (N!)^(-1/N)``,
    ``U = G N (D/2)^alpha / (N - 1)``; shared ``V = G / (sigma^2 lambda pi D^2)``.
    """

    P_T: float
    ue_density: float
    radius: float
    orders: tuple[int, int]
    exponents: tuple[float, float]
    eta: tuple[float, float]
    U: tuple[float, float]
    V: float


@dataclass(frozen=True)
class UpperBoundResult:
    P_T_star: float
    R_plus: float
    tau_at_star: float  # bit/s/Hz
    rate_at_star: float  # B * tau, bit/s per UE
    hit_ratio_at_star: float
    cache_utilization: float


def rate_model(P_T: float, cfg: NetworkConfig, ue_density: float | None = None,
               radius: float | None = None) -> RateModel:
    lam = cfg.ue_density if ue_density is None else ue_density
    D = cfg.cell_radius if radius is None else radius
    G = cfg.beam_gain
    orders = (cfg.nakagami_los, cfg.nakagami_nlos)
    alphas = (cfg.pathloss_los, cfg.pathloss_nlos)
    eta = tuple(N * math.factorial(N) ** (-1.0 / N) for N in orders)
    U = tuple(G * N * (D / 2) ** a / (N - 1) for N, a in zip(orders, alphas))
    V = G / (cfg.noise_power * lam * math.pi * D**2)
    return RateModel(float(P_T), lam, D, orders, alphas, eta, U, V)


def _quad(f: Callable[[float], float], a: float, b: float, epsrel: float, points=None) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsrel=epsrel, epsabs=0.0, limit=200, points=points)
        except integrate.IntegrationWarning as exc:
            raise IntegrationFailure(str(exc)) from exc
    return val


def _t_integral(x: float, N: int, G: float, t_max: float, epsrel: float) -> float:
    """int_0^t_max sum_m (-1)^(m+1) C(N,m) exp(-m x (2^t + G - 1)) dt."""
    coef = [(-1) ** (m + 1) * math.comb(N, m) for m in range(1, N + 1)]

    def f(t):
        base = x * (2.0**t + G - 1.0)
        return sum(c * math.exp(-(m + 1) * base) for m, c in enumerate(coef))

    # the integrand is ~1 up to the knee 2^t ~ 1/x, then collapses
    knee = math.log2(1.0 / x + 1.0 - G) if 1.0 / x + 1.0 - G > 1.0 else 0.0
    points = [knee] if 0.0 < knee < t_max else None
    return _quad(f, 0.0, t_max, epsrel, points)


def average_rate(model: RateModel, cfg: NetworkConfig, epsrel: float = 1e-6) -> float:
    """Average spectral efficiency tau(P_T) of a link, bit/s/Hz.

    Double integral over the link length r in [0, D] and the rate level
    t, with LOS/NLOS mixing exp(-beta r) and the Gamma tail written as a
    binomial sum. The t range stops where the fastest-surviving term
    has decayed to exp(-40) at r = r_min.
    """
    if model.P_T < 0:
        raise ValueError("P_T must be nonnegative")
    return _average_rate_cached(model, cfg.beam_gain, cfg.blockage_beta, cfg.min_distance, epsrel)


@functools.lru_cache(maxsize=4096)
def _average_rate_cached(model: RateModel, G: float, beta: float, r_min: float, epsrel: float) -> float:
    D = model.radius
    states = []
    for N, a, eta, U in zip(model.orders, model.exponents, model.eta, model.U):
        den = U + model.V * model.P_T
        x_min = eta * r_min**a / den
        t_max = math.log2(max(_PSI_CUTOFF / x_min - G + 1.0, 2.0))
        states.append((N, a, eta / den, t_max))
    inner_tol = epsrel * 1e-2

    def over_r(r: float) -> float:
        if r == 0.0:
            return 0.0
        p_los = math.exp(-beta * r)
        tot = 0.0
        for (N, a, scale, t_max), w in zip(states, (p_los, 1.0 - p_los)):
            if w == 0.0:
                continue
            tot += w * _t_integral(scale * r**a, N, G, t_max, inner_tol)
        return tot * 2.0 * r / D**2

    return _quad(over_r, 0.0, D, epsrel)


def expected_inverse_gain(cfg: NetworkConfig, ue_density: float | None = None,
                          radius: float | None = None) -> tuple[float, float]:
    """Mean sum of sigma^2/g over a cell, per state (LOS, NLOS), in watts.

    lambda pi D^2 (D/2)^alpha sigma^2 N/(N-1), using E[1/h] = N/(N-1)
    for unit-mean Gamma fading of order N.
    """
    lam = cfg.ue_density if ue_density is None else ue_density
    D = cfg.cell_radius if radius is None else radius
    out = []
    for N, a in ((cfg.nakagami_los, cfg.pathloss_los), (cfg.nakagami_nlos, cfg.pathloss_nlos)):
        if N < 2:
            raise ValueError("E[1/h] is finite only for N > 1")
        out.append(lam * math.pi * D**2 * (D / 2) ** a * cfg.noise_power * N / (N - 1))
    return out[0], out[1]


def analytic_cached_files(P_T: float, cfg: NetworkConfig) -> int:
    """Files the leftover caching power can hold: floor((P_M-P_cc-P_T)/omega) bits."""
    spare = max(cfg.transmit_budget - P_T, 0.0)
    bits = min(math.floor(spare / cfg.caching_power_coeff), cfg.cache_size)
    return int(min(math.floor(bits / cfg.file_size), cfg.num_files))


def analytic_hit_ratio(P_T: float, cfg: NetworkConfig, pop: PopularityModel) -> float:
    return pop.prefix_hit(analytic_cached_files(P_T, cfg))


def cell_rate(P_T: float, cfg: NetworkConfig) -> float:
    """Mean sum rate of one cell, lambda pi D^2 B tau(P_T), bit/s."""
    return cfg.ues_per_cell * cfg.subchannel_bw * average_rate(rate_model(P_T, cfg), cfg)


def backhaul_load(P_T: float, cfg: NetworkConfig, pop: PopularityModel) -> float:
    """Per-AP backhaul occupancy C_n = p_miss(P_T) * R_n(P_T), bit/s."""
    return (1.0 - analytic_hit_ratio(P_T, cfg, pop)) * cell_rate(P_T, cfg)


def upper_bound(P_T: float, cfg: NetworkConfig, pop: PopularityModel) -> float:
    """min(N R_n, C + p_hit N R_n) in bit/s."""
    wireless = cfg.num_aps * cell_rate(P_T, cfg)
    return min(wireless, cfg.backhaul_capacity + analytic_hit_ratio(P_T, cfg, pop) * wireless)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-4) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on [lo, hi]; returns ``(x, f(x))``.

    Endpoints are compared at the end so that boundary maxima are exact.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    cands = [(c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))]
    return max(cands, key=lambda p: p[1])


def maximize_upper_bound(cfg: NetworkConfig, pop: PopularityModel | None = None,
                         tol: float = 1e-4) -> UpperBoundResult:
    """Best transmit power for the bound and the cache utilization it implies."""
    pop = pop or zipf_popularity(cfg.num_files, cfg.zipf_delta)
    p_star, r_plus = golden_section_max(lambda p: upper_bound(p, cfg, pop), 0.0, cfg.transmit_budget, tol)
    tau = average_rate(rate_model(p_star, cfg), cfg)
    if cfg.cache_size > 0:
        util = (cfg.transmit_budget - p_star) / (cfg.caching_power_coeff * cfg.cache_size)
        util = min(max(util, 0.0), 1.0)
    else:
        util = 0.0
    return UpperBoundResult(
        P_T_star=p_star,
        R_plus=r_plus,
        tau_at_star=tau,
        rate_at_star=cfg.subchannel_bw * tau,
        hit_ratio_at_star=analytic_hit_ratio(p_star, cfg, pop),
        cache_utilization=util,
    )


def analysis_curve(cfg: NetworkConfig, grid_size: int, pop: PopularityModel | None = None) -> list[dict]:
    """Rows of ANALYSIS_COLUMNS over an even P_T grid on [0, P_M - P_cc]."""
    if grid_size < 1:
        raise ValueError("grid needs at least one point")
    pop = pop or zipf_popularity(cfg.num_files, cfg.zipf_delta)
    grid = np.linspace(0.0, cfg.transmit_budget, grid_size) if grid_size > 1 else np.array([cfg.transmit_budget])
    rows = []
    for p in grid:
        p = float(p)
        tau = average_rate(rate_model(p, cfg), cfg)
        hit = analytic_hit_ratio(p, cfg, pop)
        rn = cfg.ues_per_cell * cfg.subchannel_bw * tau
        wireless = cfg.num_aps * rn
        rows.append({
            "P_T_watts": p,
            "tau_bps_hz": tau,
            "p_hit": hit,
            "C_n_bps": (1.0 - hit) * rn,
            "R_plus_bps": min(wireless, cfg.backhaul_capacity + hit * wireless),
        })
    return rows


def write_analysis_csv(rows: list[dict], path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.DictWriter(fh, fieldnames=ANALYSIS_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(row[k])) for k in ANALYSIS_COLUMNS})
