"""Balanced classification risks over state-action tables.

The classifier is a score table ``g[s, a]``.  Positive scores mean "looks
like demonstration data", negative scores mean "looks like the negative
class" (learner or pseudo-labeled non-expert samples).

Two flavours are provided: exact risks over full density tables, and
empirical risks over minibatches of ``(state, action)`` index pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .losses import LossSpec, as_loss, eval_loss, eval_loss_grad
from .mdp import StateActionDensity, as_array


@dataclass(frozen=True, eq=False)
class Classifier:
    scores: np.ndarray
    loss: LossSpec

    def __post_init__(self):
        s = np.array(self.scores, dtype=float)
        if not np.all(np.isfinite(s)):
            raise DomainError("classifier scores must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "loss", as_loss(self.loss))

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, loss) -> "Classifier":
        return cls(np.zeros((n_states, n_actions)), loss)

    def __call__(self, batch) -> np.ndarray:
        """Scores of an ``(n, 2)`` batch of (state, action) pairs."""
        batch = np.asarray(batch, dtype=np.int64).reshape(-1, 2)
        return self.scores[batch[:, 0], batch[:, 1]]

    def require_symmetric(self):
        if not self.loss.is_symmetric:
            raise DomainError(f"loss {self.loss} is not symmetric")
        return self


@dataclass(frozen=True)
class RiskReport:
    total: float
    term_data: float
    term_pseudo: float
    term_policy: float
    lam: float

    def as_row(self) -> dict:
        return {"total": self.total, "term_data": self.term_data,
                "term_pseudo": self.term_pseudo, "term_policy": self.term_policy,
                "lambda": self.lam}


# --- exact ----------------------------------------------------------------------

def balanced_risk_exact(g: Classifier, rho_pos, rho_neg) -> float:
    """1/2 E_pos[l(g)] + 1/2 E_neg[l(-g)]."""
    pos, neg = as_array(rho_pos), as_array(rho_neg)
    return float(0.5 * np.sum(pos * eval_loss(g.loss, g.scores))
                 + 0.5 * np.sum(neg * eval_loss(g.loss, -g.scores)))


def balanced_risk_grad(g: Classifier, rho_pos, rho_neg) -> np.ndarray:
    pos, neg = as_array(rho_pos), as_array(rho_neg)
    return 0.5 * pos * eval_loss_grad(g.loss, g.scores) - 0.5 * neg * eval_loss_grad(g.loss, -g.scores)


def mixture_density_lambda(rho_n, rho_pi, lam: float) -> StateActionDensity:
    """lam * rho_N + (1 - lam) * rho_pi."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    return StateActionDensity(lam * as_array(rho_n) + (1.0 - lam) * as_array(rho_pi))


def lemma1_decompose(g: Classifier, rho_e, rho_n, rho_pi, alpha: float, kappa: float,
                     lam: float, *, allow_nonsymmetric: bool = False) -> tuple[float, float]:
    """Both sides of the balanced-risk decomposition under a mixture learner density.

    lhs = R(g; alpha rho_E + (1-alpha) rho_N, rho_pi^lam)
    rhs = (alpha - kappa (1-lam)) R(g; rho_E, rho_N) + (1 - alpha + kappa (1-lam)) c / 2

    ``rho_pi`` is expected to equal ``kappa rho_E + (1-kappa) rho_N``.  For a
    non-symmetric loss the identity fails; ``allow_nonsymmetric`` evaluates it
    anyway with ``c = 2 l(0)``.
    """
    loss = g.loss
    if loss.is_symmetric:
        c = loss.symmetry_constant
    elif allow_nonsymmetric:
        c = 2.0 * eval_loss(loss, 0.0)
    else:
        raise DomainError(f"decomposition requires a symmetric loss, got {loss}")
    e, n = as_array(rho_e), as_array(rho_n)
    rho_data = alpha * e + (1.0 - alpha) * n
    lhs = balanced_risk_exact(g, rho_data, lam * n + (1.0 - lam) * as_array(rho_pi))
    w = kappa * (1.0 - lam)
    rhs = (alpha - w) * balanced_risk_exact(g, e, n) + 0.5 * (1.0 - alpha + w) * c
    return lhs, rhs


def fit_classifier_exact(loss, rho_pos, rho_neg, step: float = 50.0, weight_decay: float = 1e-4,
                         max_iter: int = 100_000, grad_tol: float = 1e-8,
                         init=None) -> Classifier:
    """Gradient descent on the exact balanced risk plus ``weight_decay * |g|^2``.

    Stops when the gradient sup-norm drops below ``grad_tol`` or after
    ``max_iter`` steps.
    """
    loss = as_loss(loss)
    pos, neg = as_array(rho_pos), as_array(rho_neg)
    scores = np.zeros(pos.shape) if init is None else np.array(init, dtype=float)
    for _ in range(max_iter):
        grad = (0.5 * pos * eval_loss_grad(loss, scores)
                - 0.5 * neg * eval_loss_grad(loss, -scores)
                + 2.0 * weight_decay * scores)
        if np.max(np.abs(grad)) < grad_tol:
            break
        scores = scores - step * grad
    return Classifier(scores, loss)


# --- empirical ----------------------------------------------------------------

def _batch(x) -> np.ndarray:
    return np.asarray(x, dtype=np.int64).reshape(-1, 2)


def _mean_loss(g: Classifier, batch, sign: float) -> float:
    if len(batch) == 0:
        return 0.0
    return float(np.mean(eval_loss(g.loss, sign * g(batch))))


def empirical_risk_co(g: Classifier, data, pseudo, policy_batch, lam: float) -> RiskReport:
    """1/2 E_D[l(g)] + lam/2 E_P[l(-g)] + (1-lam)/2 E_B[l(-g)].

    An empty pseudo batch contributes zero.
    """
    data, pseudo, policy_batch = _batch(data), _batch(pseudo), _batch(policy_batch)
    if len(data) == 0 or len(policy_batch) == 0:
        raise DomainError("data and policy batches must be non-empty")
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    t_d = 0.5 * _mean_loss(g, data, 1.0)
    t_p = 0.5 * lam * _mean_loss(g, pseudo, -1.0)
    t_b = 0.5 * (1.0 - lam) * _mean_loss(g, policy_batch, -1.0)
    return RiskReport(t_d + t_p + t_b, t_d, t_p, t_b, lam)


def empirical_risk_pseudo(g: Classifier, data, pseudo, policy_batch, lam: float) -> RiskReport:
    """Single-classifier pseudo-labeling risk; same formula as the co-risk,
    but ``data`` is the unsplit demonstration batch and ``pseudo`` was
    selected by ``g`` itself."""
    return empirical_risk_co(g, data, pseudo, policy_batch, lam)


def _accumulate(shape, batch, values) -> np.ndarray:
    S, A = shape
    flat = np.bincount(batch[:, 0] * A + batch[:, 1], weights=values, minlength=S * A)
    return flat.reshape(S, A)


def empirical_risk_grad(g: Classifier, data, pseudo, policy_batch, lam: float) -> np.ndarray:
    """Gradient of :func:`empirical_risk_co` with respect to every score entry."""
    data, pseudo, policy_batch = _batch(data), _batch(pseudo), _batch(policy_batch)
    shape = g.scores.shape
    grad = _accumulate(shape, data, 0.5 / len(data) * eval_loss_grad(g.loss, g(data)))
    if len(pseudo):
        grad -= _accumulate(shape, pseudo,
                            0.5 * lam / len(pseudo) * eval_loss_grad(g.loss, -g(pseudo)))
    grad -= _accumulate(shape, policy_batch,
                        0.5 * (1.0 - lam) / len(policy_batch)
                        * eval_loss_grad(g.loss, -g(policy_batch)))
    return grad


def classifier_grad_step(g: Classifier, data, pseudo, policy_batch, lam: float,
                         step_size: float, weight_decay: float = 0.0) -> Classifier:
    """One gradient-descent step on the empirical risk + ``weight_decay * |g|^2``."""
    if not step_size > 0:
        raise DomainError("step_size must be positive")
    grad = empirical_risk_grad(g, data, pseudo, policy_batch, lam)
    grad += 2.0 * weight_decay * g.scores
    return Classifier(g.scores - step_size * grad, g.loss)
