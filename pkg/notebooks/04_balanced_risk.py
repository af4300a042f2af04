"""
Balanced risk under a mixture learner
=====================================

With a symmetric loss the balanced risk on noisy data decomposes into a
scaled clean risk plus a constant.  The scale alpha - kappa (1 - lambda)
stays positive for every alpha > 1/2 exactly when lambda >= 1/2.
"""
import numpy as np

from rilco.risk import Classifier, lemma1_decompose
from rilco.verify import inequality_sweep

rng = np.random.default_rng(0)
shape = (25, 4)
e, n = rng.dirichlet(np.ones(100)).reshape(shape), rng.dirichlet(np.ones(100)).reshape(shape)
g = Classifier(rng.normal(scale=2, size=shape), "ap")
for kappa, lam in ((0.2, 0.5), (0.9, 0.0), (0.9, 0.5)):
    lhs, rhs = lemma1_decompose(g, e, n, kappa * e + (1 - kappa) * n, 0.6, kappa, lam)
    print(f"kappa={kappa} lambda={lam}: lhs={lhs:.12f} rhs={rhs:.12f} scale={0.6 - kappa * (1 - lam):+.2f}")

# %% the logistic loss breaks the identity
g = Classifier(g.scores, "logistic")
lhs, rhs = lemma1_decompose(g, e, n, 0.5 * e + 0.5 * n, 0.6, 0.5, 0.5, allow_nonsymmetric=True)
print("logistic gap", abs(lhs - rhs))

# %% which lambda values keep the scale positive everywhere
lams, ok = inequality_sweep(101)
print("smallest safe lambda:", lams[ok].min())
