"""How the relocation policy families shape driver flow for the same Q values.

A road with three successors of unequal value shows the spectrum: uniform
diffusion, call-proportional, power and exponential weighting at several
sharpness levels, and the greedy limit.

Run: python3 demos/03_policy_families.py
"""

import numpy as np

from fleetlab.marl import PolicyKind, policy_from_q
from fleetlab.roadnet import RoadNetwork, build_dual_graph
from fleetlab.sim import Observation

# road 0 fans out into roads 1, 2, 3
network = RoadNetwork.from_edges(
    ["a", "b", "c", "d", "e"],
    [("a", "b", 1.0), ("b", "c", 1.0), ("b", "d", 1.0), ("b", "e", 1.0)],
)
dual = build_dual_graph(network)

q = np.array([0.50, 0.30, 0.55, 0.70])  # per-road action values
observation = Observation(
    idle_counts=np.zeros(4, dtype=int),
    call_counts=np.array([0, 1, 2, 5]),
    speeds=np.ones(4),
)

kinds = [
    PolicyKind("random"),
    PolicyKind("proportional"),
    PolicyKind("pow", beta=0.5),
    PolicyKind("pow", beta=2.0),
    PolicyKind("pow", beta=8.0),
    PolicyKind("exp", beta=2.0),
    PolicyKind("exp", beta=8.0),
    PolicyKind("eps-greedy", epsilon=0.1),
    PolicyKind("greedy"),
]

print(f"successor q values: {q[1:]}  (call counts {observation.call_counts[1:]})\n")
print(f"{'policy':>22}   P(->road 1)  P(->road 2)  P(->road 3)")
for kind in kinds:
    policy = policy_from_q(q, dual, kind, observation)
    _, probs = policy.distribution(0)
    cells = "  ".join(f"{p:11.4f}" for p in probs)
    print(f"{kind.label():>22}   {cells}")

print(
    "\nRaising beta sweeps pow/exp from uniform diffusion toward the greedy"
    "\nall-or-nothing split; between the extremes drivers spread in proportion"
    "\nto how promising each next road looks."
)
