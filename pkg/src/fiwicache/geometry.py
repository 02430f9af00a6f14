"""AP layout, PPP user drops and nearest-AP association."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import NetworkConfig

__all__ = [
    "ApLayout",
    "Deployment",
    "NonSquareCount",
    "deploy_aps",
    "load_ap_layout",
    "sample_ues",
    "associate",
    "deploy",
]


class NonSquareCount(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ApLayout:
    positions: np.ndarray  # (N, 2) metres

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True, eq=False)
class Deployment:
    """UEs partitioned over APs.

    ``assoc[n]`` holds the UE indices of AP n in ascending order and
    ``distances[n]`` the matching link lengths, already floored at r_min.
    """

    aps: ApLayout
    ues: np.ndarray  # (K, 2)
    serving_ap: np.ndarray  # (K,) AP index per UE
    assoc: tuple[np.ndarray, ...]
    distances: tuple[np.ndarray, ...]

    @property
    def num_ues(self) -> int:
        return len(self.ues)

    @property
    def cell_sizes(self) -> np.ndarray:
        return np.array([len(a) for a in self.assoc], dtype=int)


def deploy_aps(cfg: NetworkConfig, positions=None) -> ApLayout:
    """Place the N APs.

    Without ``positions`` the APs form a sqrt(N) x sqrt(N) grid with
    spacing area_side/sqrt(N), offset by half a spacing so that the
    square cells tile the area.
    """
    if positions is not None:
        layout = ApLayout(np.asarray(positions, dtype=float))
        if len(layout) != cfg.num_aps:
            raise ValueError(f"layout has {len(layout)} APs, config expects {cfg.num_aps}")
        if len(np.unique(layout.positions, axis=0)) != len(layout):
            raise ValueError("AP positions must be pairwise distinct")
        if np.any(layout.positions < 0) or np.any(layout.positions > cfg.area_side):
            raise ValueError("AP positions must lie inside the simulation square")
        return layout

    side = math.isqrt(cfg.num_aps)
    if side * side != cfg.num_aps:
        raise NonSquareCount(f"N={cfg.num_aps} is not a perfect square; supply an explicit layout")
    spacing = cfg.area_side / side
    axis = spacing * (np.arange(side) + 0.5)
    # row-major: AP index = row * side + col, x varies fastest
    xx, yy = np.meshgrid(axis, axis)
    return ApLayout(np.column_stack([xx.ravel(), yy.ravel()]))


def load_ap_layout(path: str | Path) -> np.ndarray:
    """Read one ``x y`` (or ``x,y``) pair per line; ``#`` starts a comment."""
    pts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        x, y = line.replace(",", " ").split()
        pts.append((float(x), float(y)))
    return np.array(pts, dtype=float).reshape(-1, 2)


def sample_ues(cfg: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """PPP of density lambda over the square: Poisson count, uniform positions."""
    k = rng.poisson(cfg.ue_density * cfg.area_side**2)
    return rng.uniform(0.0, cfg.area_side, size=(k, 2))


def associate(aps: ApLayout, ues: np.ndarray, cfg: NetworkConfig) -> Deployment:
    ues = np.asarray(ues, dtype=float).reshape(-1, 2)
    n_ap = len(aps)
    if len(ues) == 0:
        empty = tuple(np.zeros(0, dtype=int) for _ in range(n_ap))
        return Deployment(aps, ues, np.zeros(0, dtype=int), empty,
                          tuple(np.zeros(0) for _ in range(n_ap)))

    d = np.linalg.norm(ues[:, None, :] - aps.positions[None, :, :], axis=2)
    # argmin returns the first minimum, i.e. ties go to the lower AP index
    serving = np.argmin(d, axis=1)
    r = np.maximum(d[np.arange(len(ues)), serving], cfg.min_distance)
    assoc = tuple(np.flatnonzero(serving == n) for n in range(n_ap))
    dist = tuple(r[idx] for idx in assoc)
    return Deployment(aps, ues, serving, assoc, dist)


def deploy(cfg: NetworkConfig, rng: np.random.Generator, aps: ApLayout | None = None) -> Deployment:
    """One full drop: layout, PPP users and association."""
    aps = aps if aps is not None else deploy_aps(cfg)
    return associate(aps, sample_ues(cfg, rng), cfg)
