"""Joint cache/power selection as a multiple-choice knapsack.

Each AP is a class. Item j of AP n caches the j most popular files and
water-fills the remaining power; its profit is the AP's sum rate and its
weight is the backhaul the AP then occupies (miss ratio times sum rate).
At most one item per AP is chosen under the shared feeder capacity C.

An AP left out by the knapsack would otherwise go dark. With
``hit_only_fallback`` each AP also offers a zero-weight item that serves
only its cache hits, and backhaul the knapsack leaves unused is then
handed to those APs' miss traffic.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .caching import PopularityModel
from .channel import ChannelRealization
from .config import NetworkConfig
from .geometry import Deployment
from .waterfill import WaterfillResult, transmit_budget, vabwf, waterfill_batch

__all__ = [
    "CandidateItem",
    "ClassItems",
    "DPTable",
    "JointSolution",
    "CorruptTable",
    "candidate_counts",
    "build_candidates",
    "quantize_weights",
    "dp_solve",
    "backtrack",
    "solve_mckp",
    "optimize",
    "capacity_units",
    "write_candidates_csv",
]


class CorruptTable(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CandidateItem:
    ap: int
    cached_count: int
    weight: float  # backhaul occupied, bit/s
    profit: float  # sum rate, bit/s
    wf: WaterfillResult | None = None
    hit_only: bool = False


@dataclass(frozen=True, eq=False)
class ClassItems:
    """Items of one AP as arrays, ordered by ascending cached count.

    ``hit_only_index`` marks the zero-weight hit-only item, if any; it sits
    first so that every regular item wins a tie against it, and
    ``hit_only_miss`` is the miss traffic that item leaves unserved.
    """

    ap: int
    cached_counts: np.ndarray
    weights: np.ndarray
    profits: np.ndarray
    weight_units: np.ndarray | None = None
    hit_only_index: int = -1
    hit_only_miss: float = 0.0

    def __len__(self) -> int:
        return len(self.cached_counts)

    def item(self, i: int) -> CandidateItem:
        return CandidateItem(self.ap, int(self.cached_counts[i]),
                             float(self.weights[i]), float(self.profits[i]),
                             hit_only=(i == self.hit_only_index))


@dataclass(frozen=True, eq=False)
class DPTable:
    """``values[n, c]`` is the best profit using the first n classes within c units.

    Row 0 is the empty prefix. ``choice[n-1, c]`` is the item taken for
    class n at capacity c, or -1 when the class is skipped.
    """

    values: np.ndarray
    choice: np.ndarray
    capacity_units: int


@dataclass(frozen=True, eq=False)
class JointSolution:
    chosen: tuple[CandidateItem | None, ...]
    throughput: float
    backhaul_load: float
    weight_units: int
    cached_counts: np.ndarray = field(repr=False)
    powers: tuple[np.ndarray, ...] = field(repr=False, default=())
    fallback_carried: float = 0.0  # miss traffic of hit-only APs put on spare backhaul

    @property
    def skipped(self) -> list[int]:
        return [n for n, it in enumerate(self.chosen) if it is None]


def candidate_counts(cfg: NetworkConfig) -> np.ndarray:
    """Cached counts worth considering: storage-feasible and leaving transmit power."""
    per_file = cfg.caching_power_coeff * cfg.file_size
    by_power = math.ceil(cfg.transmit_budget / per_file) - 1
    top = min(cfg.max_cached_files, by_power)
    js = np.arange(0, max(top, 0) + 1)
    # float rounding in the ceil can let one zero-budget count through
    return js[transmit_budget(js, cfg) > 0]


def build_candidates(dep: Deployment, ch: ChannelRealization, pop: PopularityModel,
                     cfg: NetworkConfig, keep_wf: bool = False) -> list[ClassItems]:
    """Item arrays for every AP.

    With ``keep_wf`` the per-item water-filling results are retained
    (slow path, one :func:`vabwf` call per item); otherwise all counts of
    an AP are water-filled in one vectorized pass.
    """
    js = candidate_counts(cfg)
    out = []
    for n, g in enumerate(ch.gains):
        if len(g) == 0:
            out.append(ClassItems(n, np.zeros(1, dtype=int), np.zeros(1), np.zeros(1)))
            continue
        if keep_wf:
            results = [vabwf(g, int(j), cfg) for j in js]
            nu = np.array([r.sum_rate for r in results])
        else:
            _, nu = waterfill_batch(g, transmit_budget(js, cfg), cfg)
        hit = pop.prefix_hit(js)
        cls = ClassItems(n, js.copy(), (1.0 - hit) * nu, nu)
        if cfg.hit_only_fallback:
            cls = _with_hit_only(cls, hit)
        out.append(cls)
    return out


def _with_hit_only(cls: ClassItems, hit: np.ndarray) -> ClassItems:
    served = hit * cls.profits
    i = len(served) - 1 - int(np.argmax(served[::-1]))
    return ClassItems(
        cls.ap,
        np.concatenate([[cls.cached_counts[i]], cls.cached_counts]),
        np.concatenate([[0.0], cls.weights]),
        np.concatenate([[served[i]], cls.profits]),
        hit_only_index=0,
        hit_only_miss=float(cls.weights[i]),
    )


def quantize_weights(items: Sequence[ClassItems], unit: float) -> list[ClassItems]:
    """Round weights up to whole capacity units; profits stay real."""
    if unit <= 0:
        raise ValueError("capacity unit must be positive")
    out = []
    for cls in items:
        w = np.ceil(np.asarray(cls.weights) / unit)
        out.append(dataclasses.replace(cls, weight_units=w.astype(np.int64)))
    return out


def capacity_units(capacity: float, unit: float, items: Sequence[ClassItems] | None = None) -> int:
    """Number of whole units in ``capacity``, capped where it can no longer bind."""
    cap = math.inf if math.isinf(capacity) else math.floor(capacity / unit)
    if items is not None:
        cap = min(cap, sum(int(c.weight_units.max()) for c in items if len(c)))
    if math.isinf(cap):
        raise ValueError("infinite capacity needs items to bound the table")
    return int(cap)


def dp_solve(items: Sequence[ClassItems], capacity_units: int) -> DPTable:
    """Fill R(n, c) = max(R(n-1, c), max_j R(n-1, c - w_j) + v_j).

    A class may always be skipped. Among items tying for the max the one
    listed last (largest cached count) wins; an item that only ties with
    skipping is not recorded.
    """
    cu = int(capacity_units)
    n_cls = len(items)
    values = np.zeros((n_cls + 1, cu + 1))
    choice = np.full((n_cls, cu + 1), -1, dtype=np.int32)
    buf = np.empty(cu + 1)
    mask = np.empty(cu + 1, dtype=bool)
    for n, cls in enumerate(items, start=1):
        if cls.weight_units is None:
            raise ValueError("quantize item weights before solving")
        prev = values[n - 1]
        best = values[n]
        best[:] = prev
        pick = choice[n - 1]
        # Walking items from last to first with a strict '>' keeps the
        # later item on ties and never displaces a skip it merely equals.
        for i in range(len(cls) - 1, -1, -1):
            w = int(cls.weight_units[i])
            if w > cu or w < 0:
                continue
            span = cu + 1 - w
            cand, better = buf[:span], mask[:span]
            np.add(prev[:span], cls.profits[i], out=cand)
            np.greater(cand, best[w:], out=better)
            np.copyto(best[w:], cand, where=better)
            np.copyto(pick[w:], i, where=better)
    return DPTable(values, choice, cu)


def backtrack(table: DPTable, items: Sequence[ClassItems]) -> JointSolution:
    """Recover the chosen item per class from the choice pointers."""
    c = table.capacity_units
    picks: list[int] = [-1] * len(items)
    for n in range(len(items), 0, -1):
        i = int(table.choice[n - 1, c])
        if i >= 0:
            picks[n - 1] = i
            c -= int(items[n - 1].weight_units[i])
            if c < 0:
                raise CorruptTable("backtracking ran below zero capacity")

    chosen: list[CandidateItem | None] = []
    total = 0.0
    load = 0.0
    units = 0
    counts = np.zeros(len(items), dtype=int)
    # forward order reproduces the table's floating-point sums exactly
    for n, (cls, i) in enumerate(zip(items, picks)):
        if i < 0:
            chosen.append(None)
            continue
        it = cls.item(i)
        chosen.append(it)
        total = total + it.profit
        load += it.weight
        units += int(cls.weight_units[i])
        counts[n] = it.cached_count
    expect = table.values[len(items), table.capacity_units]
    if total != expect:
        raise CorruptTable(f"reconstructed {total!r} != table {expect!r}")
    return JointSolution(tuple(chosen), total, load, units, counts)


def solve_mckp(items: Sequence[ClassItems], capacity: float, unit: float) -> JointSolution:
    q = quantize_weights(items, unit)
    return backtrack(dp_solve(q, capacity_units(capacity, unit, q)), q)


def optimize(dep: Deployment, ch: ChannelRealization, pop: PopularityModel,
             cfg: NetworkConfig) -> JointSolution:
    """VABWF-DP end to end: candidates, quantization, DP, backtracking.

    The returned solution carries the per-UE powers of every chosen item;
    skipped APs get all-zero powers. Spare backhaul left after the DP
    (true, unquantized weights) carries the miss traffic of hit-only APs
    and is added to throughput and load. With the fallback on, the
    all-hit-only selection is kept instead when it scores higher.
    """
    items = quantize_weights(build_candidates(dep, ch, pop, cfg), cfg.dp_bandwidth_unit)
    sol = backtrack(dp_solve(items, capacity_units(cfg.backhaul_capacity, cfg.dp_bandwidth_unit, items)), items)
    sol = _fill_spare_backhaul(sol, items, cfg.backhaul_capacity)
    if cfg.hit_only_fallback:
        # Once the feeder saturates, every AP serving its hits and sharing C
        # among the misses can beat any packing the DP sees.
        rival = _all_hit_only(items, cfg.backhaul_capacity)
        # relative margin: with C slack the two agree up to rounding
        if rival.throughput > sol.throughput * (1.0 + 1e-12):
            sol = rival
    powers = []
    for g, it in zip(ch.gains, sol.chosen):
        if it is None or len(g) == 0:
            powers.append(np.zeros(len(g)))
        else:
            powers.append(vabwf(g, it.cached_count, cfg).powers)
    return dataclasses.replace(sol, powers=tuple(powers))


def _fill_spare_backhaul(sol: JointSolution, items: Sequence[ClassItems], capacity: float) -> JointSolution:
    unserved = sum(cls.hit_only_miss for cls, it in zip(items, sol.chosen)
                   if it is not None and it.hit_only)
    carried = min(unserved, max(capacity - sol.backhaul_load, 0.0))
    if carried == 0.0:
        return sol
    # the sum may round one ulp past C; the load cannot
    load = min(sol.backhaul_load + carried, capacity)
    return dataclasses.replace(sol, fallback_carried=carried,
                               throughput=sol.throughput + carried, backhaul_load=load)


def _all_hit_only(items: Sequence[ClassItems], capacity: float) -> JointSolution:
    chosen = tuple(cls.item(cls.hit_only_index) if cls.hit_only_index >= 0 else None for cls in items)
    served = sum(it.profit for it in chosen if it is not None)
    counts = np.array([it.cached_count if it is not None else 0 for it in chosen], dtype=int)
    sol = JointSolution(chosen, served, 0.0, 0, counts)
    return _fill_spare_backhaul(sol, items, capacity)


def write_candidates_csv(items: Sequence[ClassItems], path: str | Path) -> None:
    """Debug dump: one row per item with columns n, j, weight_units, profit_bps."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "j", "weight_units", "profit_bps"])
        for cls in items:
            units = cls.weight_units if cls.weight_units is not None else [""] * len(cls)
            for j, u, v in zip(cls.cached_counts, units, cls.profits):
                w.writerow([cls.ap, int(j), u if u == "" else int(u), repr(float(v))])
