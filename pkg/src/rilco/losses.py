"""Margin losses for binary classification and their symmetry properties.

A loss ``l`` is *symmetric* when ``l(z) + l(-z)`` is the same constant ``c``
for every margin ``z``.  Logistic and hinge are not; sigmoid, unhinged, the
normalized variants and the active-passive (AP) combination are.

All evaluators accept scalars or numpy arrays and are vectorized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError

BASE_KINDS = ("logistic", "hinge", "sigmoid", "unhinged")
KINDS = ("logistic", "hinge", "sigmoid", "unhinged", "nlogistic", "nhinge", "ap")

_SYMMETRY = {
    "logistic": None,
    "hinge": None,
    "sigmoid": 1.0,
    "unhinged": 2.0,
    "nlogistic": 1.0,
    "nhinge": 1.0,
    "ap": 1.0,
}


@dataclass(frozen=True)
class LossSpec:
    """A named margin loss.  ``kind`` is one of :data:`KINDS`."""

    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")

    @property
    def symmetry_constant(self) -> float | None:
        return _SYMMETRY[self.kind]

    @property
    def is_symmetric(self) -> bool:
        return self.symmetry_constant is not None

    @property
    def base(self) -> str | None:
        """Underlying non-symmetric loss of a normalized kind."""
        if self.kind in ("nlogistic", "nhinge"):
            return self.kind[1:]
        return None

    def __call__(self, z):
        return eval_loss(self, z)

    def grad(self, z):
        return eval_loss_grad(self, z)

    def __str__(self):
        return self.kind


def as_loss(spec) -> LossSpec:
    return spec if isinstance(spec, LossSpec) else LossSpec(str(spec))


def _check(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("loss evaluated at a non-finite margin")
    return z


def _out(v, z):
    return float(v) if np.ndim(z) == 0 else v


def _softplus(z):
    return np.logaddexp(0.0, z)


def _ratio(num, other):
    den = num + other
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    # both branches underflowed: the symmetric limit is 1/2
    return np.where(den > 0, r, 0.5)


def _logistic(z):
    return _softplus(-z)


def _hinge(z):
    return np.maximum(1.0 - z, 0.0)


def _sigmoid(z):
    return expit(-z)


def _unhinged(z):
    return 1.0 - z


def _nlogistic(z):
    return _ratio(_softplus(-z), _softplus(z))


def _nhinge(z):
    return _ratio(_hinge(z), _hinge(-z))


def _ap(z):
    # explicit two-term form; see tests for the identity with the composed form
    a = _softplus(-z)
    b = _softplus(z)
    return 0.5 * a / (a + b) + 0.5 * expit(-z)


_EVAL = {
    "logistic": _logistic,
    "hinge": _hinge,
    "sigmoid": _sigmoid,
    "unhinged": _unhinged,
    "nlogistic": _nlogistic,
    "nhinge": _nhinge,
    "ap": _ap,
}


def eval_loss(spec, z):
    """Value of the loss at margin ``z``.  Raises :class:`DomainError` on inf/nan."""
    spec = as_loss(spec)
    z = _check(z)
    return _out(_EVAL[spec.kind](z), z)


# --- derivatives -----------------------------------------------------------
# Kinks use the right derivative (hinge: 0 at z=1, nhinge: slope of the
# branch active for z slightly above the kink).

def _d_logistic(z):
    return -expit(-z)


def _d_hinge(z):
    return np.where(z < 1.0, -1.0, 0.0)


def _d_sigmoid(z):
    return -expit(z) * expit(-z)


def _d_unhinged(z):
    return -np.ones_like(z)


def _d_normalized(a, da, b, db):
    den = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        g = (da * b - a * db) / (den * den)
    return np.where(den > 0, g, 0.0)


def _d_nlogistic(z):
    return _d_normalized(_softplus(-z), -expit(-z), _softplus(z), expit(z))


def _d_nhinge(z):
    a = _hinge(z)
    b = _hinge(-z)
    da = np.where(z < 1.0, -1.0, 0.0)
    db = np.where(z >= -1.0, 1.0, 0.0)
    return _d_normalized(a, da, b, db)


def _d_ap(z):
    return 0.5 * _d_nlogistic(z) + 0.5 * _d_sigmoid(z)


_GRAD = {
    "logistic": _d_logistic,
    "hinge": _d_hinge,
    "sigmoid": _d_sigmoid,
    "unhinged": _d_unhinged,
    "nlogistic": _d_nlogistic,
    "nhinge": _d_nhinge,
    "ap": _d_ap,
}


def eval_loss_grad(spec, z):
    """Derivative ``dl/dz`` at margin ``z``."""
    spec = as_loss(spec)
    z = _check(z)
    return _out(_GRAD[spec.kind](z), z)


def normalize(kind) -> LossSpec:
    """Symmetric counterpart ``l(z) / (l(z) + l(-z))`` of a base loss."""
    kind = str(kind)
    if kind not in ("logistic", "hinge"):
        raise DomainError(f"normalization is defined for logistic and hinge, not {kind!r}")
    return LossSpec("n" + kind)


def symmetry_defect(spec, zs) -> float:
    """max |l(z) + l(-z) - 2 l(0)| over ``zs``."""
    spec = as_loss(spec)
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    if zs.size == 0:
        raise DomainError("symmetry_defect needs at least one margin")
    c = 2.0 * eval_loss(spec, 0.0)
    return float(np.max(np.abs(eval_loss(spec, zs) + eval_loss(spec, -zs) - c)))
