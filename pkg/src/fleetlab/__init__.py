"""fleetlab: graph-based ride-hailing fleet repositioning laboratory.

Road networks are directed graphs with drivers living on the edges. A
simulator advances drivers, matches orders, and rebalances the fleet; graph
neural networks (GCN/GAT on the reversed line graph) approximate per-road
action values; stochastic relocation policies are built directly from those
values; and a two-road toy model exposes the policy families analytically.
"""

from . import gnn, marl, roadnet, scenario, sim, toylab
from .roadnet import DualGraph, Road, RoadNetwork, build_dual_graph
from .sim import WorldState, init_world, observe, order_response_rate, step

__version__ = "0.1.0"

__all__ = [
    "roadnet",
    "sim",
    "gnn",
    "marl",
    "toylab",
    "scenario",
    "Road",
    "RoadNetwork",
    "DualGraph",
    "build_dual_graph",
    "WorldState",
    "init_world",
    "step",
    "observe",
    "order_response_rate",
    "__version__",
]
