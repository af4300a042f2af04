"""
Matching the noisy density is not imitation
===========================================

The policy whose occupancy equals the noisy data density lands strictly
between the non-expert and the expert in return.
"""
import numpy as np

from rilco.mdp import expected_return, gridworld, occupancy_exact, snapshot_policies
from rilco.verify import density_matching_optimum

mdp = gridworld()
snaps = snapshot_policies(mdp)
rho_e = occupancy_exact(mdp, snaps[0]).density
rho_n = np.mean([occupancy_exact(mdp, p).density for p in snaps[1:]], axis=0)
print(f"expert {expected_return(mdp, snaps[0]):.4f}")
for alpha in (1.0, 0.9, 0.75, 0.6):
    pi = density_matching_optimum(rho_e, rho_n, alpha)
    target = alpha * rho_e + (1 - alpha) * rho_n
    resid = np.max(np.abs(occupancy_exact(mdp, pi).density - target))
    print(f"alpha={alpha}: return {expected_return(mdp, pi):.4f} (occupancy residual {resid:.1e})")
