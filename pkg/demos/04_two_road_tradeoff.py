"""The two-road toy model: why all-or-nothing relocation loses to spreading.

Ten drivers sit on road 1 with 3 calls; road 2 ahead holds 7 calls. Sending
everyone to the better road serves 7; splitting 30/70 serves all 10. The
sweep shows how the converged reward of the power/exponential policy families
rises from the uniform limit (8) toward the optimum and falls to the greedy
limit (7) as the sharpness parameter grows.

Run: python3 demos/04_two_road_tradeoff.py
"""

import numpy as np

from fleetlab.toylab import (
    fixed_point_iterate,
    optimal_reward,
    sweep_beta,
    total_reward,
)

print("hand-picked splits (stay fraction, move fraction) -> total reward")
for policy in ([0.3, 0.7], [0.5, 0.5], [0.0, 1.0]):
    print(f"  {policy} -> {total_reward(policy):.1f}")
print(f"optimum over all splits: {optimal_reward():.1f}\n")

grid = np.logspace(-2, 2, 33)
sweeps = {family: sweep_beta(grid, family) for family in ("pow", "exp")}

print(f"{'beta':>10}   {'pow reward':>10}   {'exp reward':>10}")
for i, beta in enumerate(grid):
    if i % 4 == 0 or i == len(grid) - 1:
        print(
            f"{beta:10.3f}   {sweeps['pow'][i].reward:10.4f}   "
            f"{sweeps['exp'][i].reward:10.4f}"
        )

for family in ("pow", "exp"):
    rewards = [p.reward for p in sweeps[family]]
    best = int(np.argmax(rewards))
    print(f"\n{family}: peak reward {rewards[best]:.4f} at beta = {grid[best]:.3f}")

uniform = fixed_point_iterate(1e-6, "pow")
greedy = fixed_point_iterate(1e6, "pow")
print(
    f"\nlimits: beta->0 gives reward {uniform.reward:.4f} (uniform split), "
    f"beta->inf gives {greedy.reward:.4f} (greedy split)"
)
