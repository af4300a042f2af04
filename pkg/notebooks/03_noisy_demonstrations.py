"""
Noisy demonstration datasets
============================

Mixing expert and non-expert samples at the published noise rates, and
splitting a dataset into the two halves used for co-training.
"""
from rilco.demos import generate_noisy_dataset, mixture_density, split_dataset
from rilco.mdp import gridworld, histogram, snapshot_policies, total_variation

mdp = gridworld()
snaps = snapshot_policies(mdp)

for delta in (0.0, 0.1, 0.2, 0.3, 0.4):
    data, prov = generate_noisy_dataset(mdp, snaps, 10_000, delta, rng_seed=1)
    alpha = prov.true_alpha
    tv = total_variation(histogram(data.samples, mdp.shape), mixture_density(mdp, snaps, alpha))
    print(f"delta={delta}: {len(data):>5d} samples, expert fraction {alpha:.4f}, TV to mixture {tv:.4f}")

# %% the halves keep the expert fraction of the parent
data, prov = generate_noisy_dataset(mdp, snaps, 10_000, 0.4, rng_seed=1)
halves = split_dataset(data, 0)
for name, idx in (("D1", halves.index1), ("D2", halves.index2)):
    print(name, len(idx), f"expert fraction {prov.subset(idx).true_alpha:.4f}")
