"""
Occupancy measures on the benchmark gridworld
=============================================

Exact discounted state-action densities, their Monte-Carlo estimate, and
the returns of the expert and of the five weaker snapshot policies.
"""
import numpy as np

from rilco.mdp import (expected_return, flow_residual, gridworld, histogram, occupancy_exact,
                       sample_occupancy, snapshot_policies, total_variation)

mdp = gridworld()
snaps = snapshot_policies(mdp)
for i, pi in enumerate(snaps):
    print(f"snapshot {i}: return {expected_return(mdp, pi):.4f}")

# %% the expert's density satisfies the flow equations
rho = occupancy_exact(mdp, snaps[0]).density
print("flow residual", flow_residual(mdp, snaps[0], rho))

# %% sampling converges to it
for n in (1_000, 10_000, 100_000):
    emp = histogram(sample_occupancy(mdp, snaps[0], n, 0), mdp.shape)
    print(f"n={n:>7d} TV={total_variation(emp, rho):.4f}")

# %% where the expert spends its time (state marginal on the 5x5 grid)
print(np.round(rho.sum(axis=1).reshape(5, 5), 3))
