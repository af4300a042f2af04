"""
Noise-rate sweep
================

A small (method x noise rate x seed) grid written to ``sweep_out/`` with an
aggregate CSV and a grouped bar chart.  The full protocol is the ``sweep``
subcommand with five seeds.
"""
from rilco.mdp import gridworld
from rilco.sweep import SweepSpec, run_sweep, write_sweep

spec = SweepSpec(methods=("ril_co", "gail_logistic"), noise_rates=(0.0, 0.4), seeds=(1, 2),
                 n_expert=10_000)
result = run_sweep(gridworld(), spec)
out = write_sweep(result, "sweep_out")
for a in result.aggregates():
    print(f'{a["method"]:14s} delta={a["delta"]}: {a["mean_return"]:.4f} +- {a["stderr"]:.4f}')
print("chart:", out / "chart.svg")
