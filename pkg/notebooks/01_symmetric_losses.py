"""
Symmetric margin losses
=======================

A loss is symmetric when l(z) + l(-z) is constant.  The check below sweeps a
dense grid of margins and reports the worst deviation for every loss.
"""
import numpy as np

from rilco.losses import KINDS, eval_loss, eval_loss_grad, normalize, symmetry_defect

z = np.linspace(-50, 50, 10_001)
for kind in KINDS:
    print(f"{kind:10s} defect={symmetry_defect(kind, z):.3g}")

# %% the AP loss mixes the normalized logistic and the sigmoid losses
zs = np.array([-2.0, 0.0, 2.0])
print("ap       ", eval_loss("ap", zs))
print("nlogistic", eval_loss(normalize("logistic"), zs))
print("sigmoid  ", eval_loss("sigmoid", zs))

# %% for a symmetric loss the derivative is an even function
print("ap'(z) - ap'(-z):", np.max(np.abs(eval_loss_grad("ap", z) - eval_loss_grad("ap", -z))))
