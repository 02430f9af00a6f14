"""Monte Carlo harness: drops, channels, the four allocators, aggregation."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .caching import PopularityModel, zipf_popularity
from .channel import realize_channel
from .config import NetworkConfig, config_hash, trial_rng, validate_config
from .geometry import ApLayout, deploy
from .mckp import optimize
from .waterfill import equal_power_rates, noise_floors, transmit_budget, vabwf

__all__ = [
    "Algorithm",
    "TrialResult",
    "AggregateStats",
    "run_trial",
    "run_benchmark",
    "aggregate",
    "write_trials_csv",
    "write_aggregate_json",
    "TRIAL_COLUMNS",
    "THROTTLING_NOTE",
]

THROTTLING_NOTE = (
    "baselines whose miss traffic exceeds C have every AP's miss traffic "
    "scaled by C / total miss; cache-hit traffic is never throttled"
)


class Algorithm(str, Enum):
    VABWF_DP = "vabwf-dp"
    WF_FC = "wf-fc"
    EP_PF = "ep-pf"
    WF_RC = "wf-rc"

    @classmethod
    def parse(cls, name: "str | Algorithm") -> "Algorithm":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown algorithm {name!r}; valid: {valid}") from None


@dataclass(frozen=True, eq=False)
class TrialResult:
    """One drop under one allocator.

    ``tx_power[n]`` is the amplifier-side transmit consumption
    rho * sum_k P_nk of AP n (what caching competes with).
    """

    algorithm: str
    throughput: float
    backhaul_load: float
    ue_count: int
    tx_power: np.ndarray = field(repr=False)
    cached_count: np.ndarray = field(repr=False)
    hit_ratio: np.ndarray = field(repr=False)
    cell_sizes: np.ndarray = field(repr=False)
    throttle: float = 1.0
    skipped_aps: int = 0

    @property
    def active(self) -> np.ndarray:
        return self.cell_sizes > 0

    @property
    def mean_tx_power(self) -> float:
        """Average transmit consumption over APs that serve at least one UE."""
        a = self.active
        return float(self.tx_power[a].mean()) if a.any() else 0.0

    @property
    def mean_cached_files(self) -> float:
        a = self.active
        return float(self.cached_count[a].mean()) if a.any() else 0.0


@dataclass(frozen=True, eq=False)
class AggregateStats:
    algorithm: str
    trials: int
    mean_throughput: float
    std_throughput: float
    ci95_throughput: float
    mean_backhaul: float
    std_backhaul: float
    ci95_backhaul: float
    mean_tx_power: float
    ci95_tx_power: float
    mean_cached_files: float
    mean_utilization: float
    std_defined: bool
    results: tuple[TrialResult, ...] = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "trials": self.trials,
            "mean_throughput_bps": self.mean_throughput,
            "std_throughput_bps": self.std_throughput,
            "ci95_throughput_bps": self.ci95_throughput,
            "mean_backhaul_bps": self.mean_backhaul,
            "std_backhaul_bps": self.std_backhaul,
            "ci95_backhaul_bps": self.ci95_backhaul,
            "mean_tx_power_w": self.mean_tx_power,
            "ci95_tx_power_w": self.ci95_tx_power,
            "mean_cached_files": self.mean_cached_files,
            "mean_utilization": self.mean_utilization,
            "std_defined": self.std_defined,
        }


def _throttled(cfg, algorithm, nu, hit, cached, tx, sizes, ue_count) -> TrialResult:
    hit_traffic = float(np.sum(hit * nu))
    miss_traffic = float(np.sum((1.0 - hit) * nu))
    carried = min(miss_traffic, cfg.backhaul_capacity)
    throttle = carried / miss_traffic if miss_traffic > 0 else 1.0
    return TrialResult(algorithm, hit_traffic + carried, carried, ue_count,
                       tx, cached, hit, sizes, throttle)


def _full_cache_count(cfg: NetworkConfig) -> int:
    j = cfg.max_cached_files
    # never let caching eat the whole budget
    while j > 0 and transmit_budget(j, cfg) <= 0:
        j -= 1
    return j


def _ep_pf_count(g, pop, cfg) -> tuple[int, float]:
    """Cached count maximizing the AP's servable rate within a 1/N backhaul share."""
    js = np.arange(_full_cache_count(cfg) + 1)
    nu = equal_power_rates(g, transmit_budget(js, cfg), cfg)
    hit = pop.prefix_hit(js)
    share = cfg.backhaul_capacity / cfg.num_aps
    score = hit * nu + np.minimum((1.0 - hit) * nu, share)
    # last argmax: prefer more caching on ties
    i = len(score) - 1 - int(np.argmax(score[::-1]))
    return int(js[i]), float(nu[i])


def run_trial(cfg: NetworkConfig, algorithm, rng: np.random.Generator,
              pop: PopularityModel | None = None, aps: ApLayout | None = None) -> TrialResult:
    """Drop UEs, draw channels and allocate power and caches with ``algorithm``.

    The drop and channel consume the stream identically for every
    algorithm, so equal seeds give paired comparisons; WF-RC draws its
    random file sets afterwards.
    """
    alg = Algorithm.parse(algorithm)
    pop = pop or zipf_popularity(cfg.num_files, cfg.zipf_delta)
    dep = deploy(cfg, rng, aps)
    ch = realize_channel(dep, cfg, rng)
    sizes = dep.cell_sizes
    n_ap = len(sizes)
    rho = cfg.power_amp_coeff

    if alg is Algorithm.VABWF_DP:
        sol = optimize(dep, ch, pop, cfg)
        tx = np.array([rho * p.sum() for p in sol.powers])
        hit = np.array([pop.prefix_hit(j) if it is not None else 0.0
                        for j, it in zip(sol.cached_counts, sol.chosen)])
        skipped = sum(1 for n in sol.skipped if sizes[n] > 0)
        return TrialResult(alg.value, sol.throughput, sol.backhaul_load, dep.num_ues,
                           tx, sol.cached_counts.copy(), hit, sizes, 1.0, skipped)

    nu = np.zeros(n_ap)
    hit = np.zeros(n_ap)
    cached = np.zeros(n_ap, dtype=int)
    tx = np.zeros(n_ap)
    budget_full = transmit_budget(_full_cache_count(cfg), cfg)

    for n, g in enumerate(ch.gains):
        if alg is Algorithm.WF_FC:
            cached[n] = _full_cache_count(cfg)
            hit[n] = pop.prefix_hit(cached[n])
            if len(g):
                nu[n] = vabwf(g, int(cached[n]), cfg).sum_rate
        elif alg is Algorithm.EP_PF:
            if len(g):
                cached[n], nu[n] = _ep_pf_count(g, pop, cfg)
            hit[n] = pop.prefix_hit(cached[n])
        elif alg is Algorithm.WF_RC:
            m = _full_cache_count(cfg)
            files = rng.choice(cfg.num_files, size=m, replace=False)
            cached[n] = m
            hit[n] = pop.subset_hit(files)
            if len(g):
                if cfg.wfrc_waterfill:
                    nu[n] = vabwf(g, m, cfg).sum_rate
                else:
                    nu[n] = float(equal_power_rates(g, [budget_full], cfg)[0])
        if len(g):
            tx[n] = float(transmit_budget(cached[n], cfg))
    return _throttled(cfg, alg.value, nu, hit, cached, tx, sizes, dep.num_ues)


def _t_ci(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    if n < 2:
        return 0.0, 0.0
    sd = float(np.std(values, ddof=1))
    return sd, float(stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))


def aggregate(results: Sequence[TrialResult], cfg: NetworkConfig) -> AggregateStats:
    thr = np.array([r.throughput for r in results])
    bh = np.array([r.backhaul_load for r in results])
    txp = np.array([r.mean_tx_power for r in results])
    cached = np.array([r.mean_cached_files for r in results])
    sd_t, ci_t = _t_ci(thr)
    sd_b, ci_b = _t_ci(bh)
    _, ci_p = _t_ci(txp)
    full = cfg.max_cached_files
    return AggregateStats(
        algorithm=results[0].algorithm if results else "",
        trials=len(results),
        mean_throughput=float(thr.mean()),
        std_throughput=sd_t,
        ci95_throughput=ci_t,
        mean_backhaul=float(bh.mean()),
        std_backhaul=sd_b,
        ci95_backhaul=ci_b,
        mean_tx_power=float(txp.mean()),
        ci95_tx_power=ci_p,
        mean_cached_files=float(cached.mean()),
        mean_utilization=float(cached.mean() / full) if full else 0.0,
        std_defined=len(results) > 1,
        results=tuple(results),
    )


def _one(args):
    cfg, alg, seed, point, t = args
    return run_trial(cfg, alg, trial_rng(seed, point, t))


def run_benchmark(cfg: NetworkConfig, algorithm, trials: int, seed: int,
                  point: int = 0, workers: int = 1) -> AggregateStats:
    """Run ``trials`` independent drops; trial t uses stream (seed, point, t).

    Results are gathered in trial order whatever the completion order, so
    the statistics do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    validate_config(cfg)
    alg = Algorithm.parse(algorithm)
    jobs = [(cfg, alg, seed, point, t) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        results = [_one(j) for j in jobs]
    return aggregate(results, cfg)


TRIAL_COLUMNS = ["trial_id", "algorithm", "throughput_bps", "backhaul_bps",
                 "mean_tx_power_w", "mean_cached_files"]


def write_trials_csv(stats_: AggregateStats, path: str | Path, cfg: NetworkConfig) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={config_hash(cfg)}\n")
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for t, r in enumerate(stats_.results):
            w.writerow([t, r.algorithm, repr(r.throughput), repr(r.backhaul_load),
                        repr(r.mean_tx_power), repr(r.mean_cached_files)])


def write_aggregate_json(stats_: AggregateStats, path: str | Path, cfg: NetworkConfig,
                         extra: dict | None = None) -> None:
    doc = {"config_sha256": config_hash(cfg), **stats_.to_dict(), "backhaul_policy": THROTTLING_NOTE}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
