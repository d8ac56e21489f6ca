"""Event-driven network simulator: topologies, MAC, adaptation in the loop."""

from .engine import MODES, MacConfig, NetConfig, SimResult, Simulator, activation_schedule, simulate
from .metrics import LoadStep, convergence_rounds, load_steps, pair_at, window_rows, write_outputs
from .topology import SETTINGS, THREE_CLUSTERS, SINGLE_SQUARE, Topology, TopologyConfig, generate_topology

__all__ = [
    "MODES",
    "MacConfig",
    "NetConfig",
    "SimResult",
    "Simulator",
    "activation_schedule",
    "simulate",
    "LoadStep",
    "convergence_rounds",
    "load_steps",
    "pair_at",
    "window_rows",
    "write_outputs",
    "SETTINGS",
    "SINGLE_SQUARE",
    "THREE_CLUSTERS",
    "Topology",
    "TopologyConfig",
    "generate_topology",
]
