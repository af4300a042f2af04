"""Registered verification checks.

Each check returns a list of :class:`VerificationReport`.  The ``verify``
subcommand runs them against an environment file; the acceptance tests call
them directly with the published tolerances.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .losses import KINDS, symmetry_defect
from .mdp import (FINITE, INFINITE, MdpSpec, expected_return, flow_residual, horizon_for,
                  histogram, occupancy_exact, random_mdp, sample_occupancy, snapshot_policies)
from .risk import Classifier, empirical_risk_co, empirical_risk_grad, lemma1_decompose
from .verify import (VerificationReport, density_matching_optimum, fit_gap, inequality_sweep,
                     kappa_estimate)

SYMMETRIC = ("sigmoid", "unhinged", "nlogistic", "nhinge", "ap")
NONSYMMETRIC = ("logistic", "hinge")


def _dirichlet(rng, shape):
    x = rng.gamma(1.0, size=shape)
    return x / x.sum()


def check_loss_symmetry(step: float = 0.01, bound: float = 50.0, tol: float = 1e-9):
    zs = np.arange(-round(bound / step), round(bound / step) + 1) * step
    out = []
    for kind in SYMMETRIC:
        d = symmetry_defect(kind, zs)
        out.append(VerificationReport(f"symmetry:{kind}", d < tol, d, tol, "max defect"))
    for kind in NONSYMMETRIC:
        d = symmetry_defect(kind, zs)
        out.append(VerificationReport(f"asymmetry:{kind}", d > 0.1, d, 0.1, "defect must exceed"))
    return out


def check_lemma1(shape=(25, 4), draws: int = 1000, seed: int = 0, tol: float = 1e-9):
    """Randomized decomposition identity for every symmetric loss."""
    rng = np.random.default_rng(seed)
    out = []
    for kind in SYMMETRIC:
        worst = 0.0
        for _ in range(draws):
            g = Classifier(rng.normal(scale=3.0, size=shape), kind)
            e, n = _dirichlet(rng, shape), _dirichlet(rng, shape)
            alpha = rng.uniform(0.5, 1.0)
            kappa, lam = rng.uniform(), rng.uniform()
            lhs, rhs = lemma1_decompose(g, e, n, kappa * e + (1 - kappa) * n, alpha, kappa, lam)
            worst = max(worst, abs(lhs - rhs))
        out.append(VerificationReport(f"lemma1:{kind}", worst < tol, worst, tol, f"{draws} draws"))
    return out


def check_gradients(shape=(25, 4), configs: int = 100, seed: int = 0, tol: float = 1e-5,
                    h: float = 1e-6):
    """Central finite differences of the empirical risk against the analytic gradient.

    Scores are kept away from the hinge kinks so the difference quotient is
    well defined.
    """
    rng = np.random.default_rng(seed)
    S, A = shape
    kinds = [k for k in KINDS]
    worst = 0.0
    for i in range(configs):
        kind = kinds[i % len(kinds)]
        scores = rng.normal(scale=2.0, size=shape)
        if kind in ("hinge", "nhinge"):
            near = np.abs(np.abs(scores) - 1.0) < 1e-3
            scores[near] += 0.01
        g = Classifier(scores, kind)

        def batch(n):
            return np.stack([rng.integers(0, S, n), rng.integers(0, A, n)], axis=1)

        data, pseudo, pol = batch(rng.integers(1, 40)), batch(rng.integers(0, 20)), batch(rng.integers(1, 40))
        lam = rng.uniform()
        grad = empirical_risk_grad(g, data, pseudo, pol, lam)
        # probe the entries the batches touch plus one random entry
        touched = {tuple(x) for x in np.concatenate([data, pseudo, pol])}
        touched.add((int(rng.integers(S)), int(rng.integers(A))))
        for s, a in touched:
            up, dn = scores.copy(), scores.copy()
            up[s, a] += h
            dn[s, a] -= h
            fd = (empirical_risk_co(Classifier(up, kind), data, pseudo, pol, lam).total
                  - empirical_risk_co(Classifier(dn, kind), data, pseudo, pol, lam).total) / (2 * h)
            err = abs(fd - grad[s, a]) / max(abs(fd), abs(grad[s, a]), 1e-3)
            worst = max(worst, err)
    return [VerificationReport("gradient:finite_difference", worst < tol, worst, tol,
                               f"{configs} configurations")]


def check_occupancy(mdp: MdpSpec, seed: int = 0, rollouts: int = 100_000, tol: float = 1e-9,
                    z: float = 3.0):
    """Flow conservation, finite vs infinite horizon, Monte-Carlo agreement."""
    pi = snapshot_policies(mdp, (1.0,))[0]
    rho = occupancy_exact(mdp, pi).density
    out = [VerificationReport("occupancy:flow_residual", flow_residual(mdp, pi, rho) < tol,
                              flow_residual(mdp, pi, rho), tol)]
    long = MdpSpec(mdp.transition, mdp.initial, mdp.reward, mdp.gamma, horizon_for(mdp.gamma, 1e-13))
    gap = float(np.max(np.abs(occupancy_exact(long, pi, FINITE).density
                              - occupancy_exact(long, pi, INFINITE).density)))
    out.append(VerificationReport("occupancy:finite_vs_infinite", gap < tol, gap, tol,
                                  f"T={long.horizon}"))
    if rollouts:
        draws = sample_occupancy(mdp, pi, rollouts, seed)
        # scalar statistic: discounted return estimated from the draws
        vals = mdp.reward[draws[:, 0], draws[:, 1]] / (1.0 - mdp.gamma)
        se = vals.std(ddof=1) / np.sqrt(rollouts)
        exact = expected_return(mdp, pi)
        zr = abs(vals.mean() - exact) / se if se > 0 else float(vals.mean() != exact) * np.inf
        out.append(VerificationReport("occupancy:monte_carlo_return", zr < z, zr, z,
                                      f"{rollouts} draws, |z| of the return estimate"))
        # per-cell statistic with a Bonferroni bound over the cells
        emp = histogram(draws, mdp.shape)
        mask = rho > 0
        cell_se = np.sqrt(rho * (1 - rho) / rollouts)
        zmax = float(np.max(np.abs(emp - rho)[mask] / cell_se[mask]))
        bound = max(z, float(norm.isf(0.0027 / 2 / mask.sum())))
        out.append(VerificationReport("occupancy:monte_carlo_cells", zmax < bound, zmax, bound,
                                      f"{rollouts} draws, max |z| over {int(mask.sum())} cells"))
    return out


def check_density_matching(mdp: MdpSpec | None = None, alpha: float = 0.6, n_random: int = 50, seed: int = 0,
              tol: float = 1e-9, margin: float = 1e-6):
    """Density matching on noisy data lands strictly between the two policies."""
    out = []
    if mdp is not None:
        envs = [("env", mdp)]
    else:
        rng = np.random.default_rng(seed)
        envs = [(f"random{i}", random_mdp(int(rng.integers(3, 12)), int(rng.integers(2, 5)),
                                          float(rng.uniform(0.5, 0.95)), int(rng.integers(1 << 30))))
                for i in range(n_random)]
    worst_res, order_ok = 0.0, True
    for _, m in envs:
        snaps = snapshot_policies(m)
        e = occupancy_exact(m, snaps[0]).density
        n = occupancy_exact(m, snaps[-1]).density
        pi = density_matching_optimum(e, n, alpha)
        target = alpha * e + (1 - alpha) * n
        worst_res = max(worst_res, float(np.max(np.abs(occupancy_exact(m, pi).density - target))))
        ret_e, ret_n, ret = (expected_return(m, snaps[0]), expected_return(m, snaps[-1]),
                             expected_return(m, pi))
        if abs(ret_e - ret_n) > 0.01:
            lo, hi = sorted((ret_e, ret_n))
            order_ok &= (lo + margin < ret < hi - margin)
    out.append(VerificationReport("density_matching:occupancy_round_trip", worst_res < tol, worst_res, tol,
                                  f"{len(envs)} MDPs alpha={alpha}"))
    out.append(VerificationReport("density_matching:return_strictly_between", bool(order_ok), float(order_ok), 1.0,
                                  "non-expert < mixture-optimum < expert"))
    return out


def check_inequality_region(n: int = 101):
    lams, ok = inequality_sweep(n)
    expected = lams >= 0.5
    agree = bool(np.all(ok == expected))
    return [VerificationReport("inequality_region", agree, float(np.sum(ok != expected)), 0.0,
                               f"{n}^3 grid, disagreements with lambda >= 0.5")]


def check_theorem1(mdp: MdpSpec | None = None, pairs: int = 20, seed: int = 0, loss: str = "ap"):
    """Payoff gap of the converged classifier on random pairs (and the env's own pair)."""
    rng = np.random.default_rng(seed)
    dens = []
    if mdp is not None:
        snaps = snapshot_policies(mdp)
        dens.append((occupancy_exact(mdp, snaps[0]).density,
                     np.mean([occupancy_exact(mdp, p).density for p in snaps[1:]], axis=0)))
    while len(dens) < pairs + (mdp is not None):
        e, n = _dirichlet(rng, (25, 4)), _dirichlet(rng, (25, 4))
        if 0.5 * np.abs(e - n).sum() > 0.1:
            dens.append((e, n))
    gaps = [fit_gap(e, n, loss)[0] for e, n in dens]
    worst = float(min(gaps))
    return [VerificationReport("theorem1:payoff_gap", worst > 0.0, worst, 0.0,
                               f"{len(gaps)} density pairs, min gap")]


def check_kappa(mdp: MdpSpec):
    snaps = snapshot_policies(mdp)
    e = occupancy_exact(mdp, snaps[0]).density
    n = np.mean([occupancy_exact(mdp, p).density for p in snaps[1:]], axis=0)
    k, r = kappa_estimate(0.3 * e + 0.7 * n, e, n)
    err = abs(k - 0.3) + r
    return [VerificationReport("kappa:segment_member", err < 1e-12, err, 1e-12)]


def registry(mdp: MdpSpec, rollouts: int = 100_000):
    """Check name -> zero-argument callable for one environment."""
    return {
        "symmetry": check_loss_symmetry,
        "lemma1": lambda: check_lemma1(mdp.shape),
        "gradient": lambda: check_gradients(mdp.shape),
        "occupancy": lambda: check_occupancy(mdp, rollouts=rollouts),
        "density_matching": lambda: check_density_matching(mdp),
        "inequality": check_inequality_region,
        "theorem1": lambda: check_theorem1(mdp),
        "kappa": lambda: check_kappa(mdp),
    }

