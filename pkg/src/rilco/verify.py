"""Closed-form and brute-force checks of the method's analytical claims."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mdp import TabularPolicy, as_array, policy_from_density
from .risk import Classifier, fit_classifier_exact
from .losses import eval_loss


@dataclass(frozen=True)
class VerificationReport:
    check_name: str
    passed: bool
    observed: float
    threshold: float
    details: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return (f"{self.status} {self.check_name}: observed={self.observed:.6g} "
                f"threshold={self.threshold:.6g} {self.details}").rstrip()

    def csv_row(self) -> list:
        return [self.check_name, int(self.passed), repr(float(self.observed)),
                repr(float(self.threshold)), self.details]


def density_matching_optimum(rho_e, rho_n, alpha: float) -> TabularPolicy:
    """Policy whose occupancy is exactly alpha rho_E + (1 - alpha) rho_N.

    Per state it mixes pi_E and pi_N with weights proportional to
    ``alpha rho_E(s)`` and ``(1 - alpha) rho_N(s)`` (state marginals).
    States neither policy visits get the uniform row.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    e, n = as_array(rho_e), as_array(rho_n)
    pi_e = policy_from_density(e).probs
    pi_n = policy_from_density(n).probs
    we = alpha * e.sum(axis=1, keepdims=True)
    wn = (1.0 - alpha) * n.sum(axis=1, keepdims=True)
    tot = we + wn
    A = e.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(tot > 0, (we * pi_e + wn * pi_n) / tot, 1.0 / A)
    return TabularPolicy.from_probs(pi)


def inequality_holds(alpha, kappa, lam):
    """alpha - kappa (1 - lam) > 0, elementwise."""
    return np.asarray(alpha) - np.asarray(kappa) * (1.0 - np.asarray(lam)) > 0.0


def check_inequality_region(alpha: float, kappa: float, lam: float) -> VerificationReport:
    for name, v in (("alpha", alpha), ("kappa", kappa), ("lambda", lam)):
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {v}")
    margin = alpha - kappa * (1.0 - lam)
    return VerificationReport("inequality_region", bool(margin > 0), margin, 0.0,
                              f"alpha={alpha} kappa={kappa} lambda={lam}")


def inequality_grid(n: int = 101):
    """Grid axes: alpha in (0.5, 1], kappa and lambda in [0, 1]."""
    alphas = 0.5 + 0.5 * np.arange(1, n + 1) / n
    kappas = np.linspace(0.0, 1.0, n)
    lams = np.linspace(0.0, 1.0, n)
    return alphas, kappas, lams


def inequality_sweep(n: int = 101):
    """For each lambda on the grid, does the inequality hold at every (alpha, kappa)?"""
    alphas, kappas, lams = inequality_grid(n)
    ok = inequality_holds(alphas[:, None, None], kappas[None, :, None], lams[None, None, :])
    return lams, ok.all(axis=(0, 1))


def theorem1_gap(g_star: Classifier, rho_e, rho_n) -> float:
    """E_E[l(-g*)] - E_N[l(-g*)]: reward gap of expert over non-expert data."""
    r = eval_loss(g_star.loss, -g_star.scores)
    return float(np.sum((as_array(rho_e) - as_array(rho_n)) * r))


def fit_gap(rho_e, rho_n, loss="ap", **fit_kw) -> tuple[float, Classifier]:
    """Train g* on the exact (rho_E, rho_N) balanced risk and return its gap."""
    g = fit_classifier_exact(loss, rho_e, rho_n, **fit_kw)
    return theorem1_gap(g, rho_e, rho_n), g


def kappa_estimate(rho_pi, rho_e, rho_n) -> tuple[float, float]:
    """L2 projection of rho_pi onto the segment between rho_N and rho_E.

    Returns the clipped coefficient and the distance to the segment.
    """
    p, e, n = as_array(rho_pi), as_array(rho_e), as_array(rho_n)
    diff = (e - n).ravel()
    den = float(diff @ diff)
    if den == 0.0:
        raise DomainError("expert and non-expert densities coincide")
    k = float(np.clip(((p - n).ravel() @ diff) / den, 0.0, 1.0))
    resid = float(np.linalg.norm(p - (k * e + (1.0 - k) * n)))
    return k, resid
