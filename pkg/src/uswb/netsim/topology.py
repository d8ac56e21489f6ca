"""Node placement, pairing into connections and the interference relation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._util import substream

SINGLE_SQUARE = "single_square"
THREE_CLUSTERS = "three_clusters"
SETTINGS = (SINGLE_SQUARE, THREE_CLUSTERS)


@dataclass(frozen=True)
class TopologyConfig:
    setting: str = SINGLE_SQUARE
    n_connections: int = 9
    side: float = 0.20  # single square
    cluster_side: float = 0.10
    cluster_spacing: float = 0.20  # centre to centre
    cluster_std: float = 0.02
    middle_connections: int = 1  # the edge clusters split the rest evenly
    range_m: float | None = None  # default: covers the square / 0.30 m for clusters
    sound_speed: float = 1540.0
    max_redraws: int = 1000

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown topology setting {self.setting!r}; expected one of {SETTINGS}")
        if self.n_connections < 1:
            raise ValueError("n_connections must be >= 1")
        if self.setting == THREE_CLUSTERS:
            edge = self.n_connections - self.middle_connections
            if self.middle_connections < 1 or edge < 2 or edge % 2:
                raise ValueError("three_clusters needs middle_connections >= 1 and an even, non-zero remainder for the edge clusters")
        if min(self.side, self.cluster_side, self.cluster_spacing, self.cluster_std, self.sound_speed) <= 0:
            raise ValueError("lengths and sound speed must be positive")

    @property
    def transmission_range(self) -> float:
        if self.range_m is not None:
            return self.range_m
        return self.side * math.sqrt(2) * 1.05 if self.setting == SINGLE_SQUARE else 0.30


@dataclass
class Topology:
    """Connection ``i`` runs from node ``tx[i]`` to node ``rx[i]``."""

    positions: np.ndarray  # (n_nodes, 2)
    tx: np.ndarray
    rx: np.ndarray
    range_m: float
    sound_speed: float
    cluster: np.ndarray  # cluster index per connection (0 for the single square)

    def __post_init__(self) -> None:
        pairs = np.concatenate([self.tx, self.rx])
        if np.unique(pairs).size != pairs.size:
            raise ValueError("connections must use disjoint node pairs")
        d = self.positions[:, None, :] - self.positions[None, :, :]
        self.distances = np.sqrt((d**2).sum(-1))
        self.delays = self.distances / self.sound_speed

    @property
    def n_connections(self) -> int:
        return self.tx.size

    def link_delay(self, i: int) -> float:
        return float(self.delays[self.tx[i], self.rx[i]])

    def interferes(self, a: int, b: int) -> bool:
        """Symmetric: either transmitter reaches the other connection's receiver."""
        if a == b:
            return False
        r = self.range_m
        return bool(self.distances[self.tx[a], self.rx[b]] <= r or self.distances[self.tx[b], self.rx[a]] <= r)

    def interference_sets(self) -> list[list[int]]:
        n = self.n_connections
        return [[b for b in range(n) if self.interferes(a, b)] for a in range(n)]

    def receivers_in_range(self, i: int) -> list[int]:
        """Connections whose receiver lies within range of connection ``i``'s receiver."""
        r = self.range_m
        return [j for j in range(self.n_connections) if j != i and self.distances[self.rx[i], self.rx[j]] <= r]


def _truncated_gaussian(rng, centre, std, half, n):
    out = np.empty((n, 2))
    for k in range(n):
        while True:
            p = rng.normal(centre, std)
            if np.all(np.abs(p - centre) <= half):
                out[k] = p
                break
    return out


def generate_topology(cfg: TopologyConfig, seed: int) -> Topology:
    """Draw a topology; the same ``(cfg, seed)`` always gives the same layout.

    ``single_square``: ``2 n`` nodes uniform in the square, connection ``i``
    pairs nodes ``2i`` and ``2i+1``. ``three_clusters``: clusters centred
    ``cluster_spacing`` apart on a line, ``middle_connections`` in the middle
    one and the rest split evenly between the edges, nodes Gaussian around the centre and
    truncated to the cluster square; layouts are redrawn until connections in
    adjacent clusters all interfere and those in non-adjacent clusters do not.
    """
    n = cfg.n_connections
    rng = substream(seed, 0x70_90)
    if cfg.setting == SINGLE_SQUARE:
        pos = rng.uniform(0.0, cfg.side, size=(2 * n, 2))
        topo = Topology(pos, np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2), cfg.transmission_range, cfg.sound_speed, np.zeros(n, dtype=np.int64))
        return topo

    half = cfg.cluster_side / 2
    edge = (n - cfg.middle_connections) // 2
    sizes = (edge, cfg.middle_connections, edge)
    cluster = np.repeat(np.arange(3), sizes)
    for _ in range(cfg.max_redraws):
        pos = np.concatenate(
            [
                _truncated_gaussian(rng, np.array([half + c * cfg.cluster_spacing, half]), cfg.cluster_std, half, 2 * sizes[c])
                for c in range(3)
            ]
        )
        topo = Topology(pos, np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2), cfg.transmission_range, cfg.sound_speed, cluster)
        if _cluster_structure_ok(topo):
            return topo
    raise RuntimeError("could not draw a three-cluster layout with the required interference structure")


def _cluster_structure_ok(topo: Topology) -> bool:
    n = topo.n_connections
    for a in range(n):
        for b in range(a + 1, n):
            gap = abs(int(topo.cluster[a]) - int(topo.cluster[b]))
            if topo.interferes(a, b) != (gap <= 1):
                return False
    return True
