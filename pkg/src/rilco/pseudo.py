"""Pseudo-labeling of demonstration samples as negatives.

Both the cross (co-) and the self variant use the same rule: score the
candidates, keep those scored below zero, order them from most to least
negative, and keep at most ``k``.  The only difference is who consumes the
result, which the trainer enforces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SOURCES = ("from_d1", "from_d2", "self")


@dataclass(frozen=True, eq=False)
class PseudoBatch:
    samples: np.ndarray               # (n, 2)
    source: str
    scores_at_selection: np.ndarray   # ascending
    index: np.ndarray                 # positions within the candidate batch

    def __len__(self):
        return len(self.samples)


def select_negatives(scores, k: int, relaxed: bool = False) -> np.ndarray:
    """Positions of the (at most) ``k`` most negative scores, ascending.

    Ties keep candidate order.  ``relaxed`` drops the ``score < 0`` filter and
    simply returns the ``k`` smallest.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(scores, kind="stable")
    if not relaxed:
        order = order[scores[order] < 0.0]
    return order[:k]


def _label(scorer, candidates, k, source, relaxed):
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1, 2)
    if len(candidates) == 0:
        raise DomainError("no candidates to pseudo-label")
    scores = scorer(candidates)
    pos = select_negatives(scores, k, relaxed)
    return PseudoBatch(candidates[pos], source, scores[pos], pos)


def co_pseudo_label(scorer, candidates, k: int, source: str = "from_d2",
                    relaxed: bool = False) -> PseudoBatch:
    """Negatives chosen by ``scorer`` for the *other* classifier to train on."""
    if source not in ("from_d1", "from_d2"):
        raise DomainError(f"cross-labeled batches come from_d1 or from_d2, not {source!r}")
    return _label(scorer, candidates, k, source, relaxed)


def self_pseudo_label(scorer, candidates, k: int, relaxed: bool = False) -> PseudoBatch:
    """Negatives chosen by ``scorer`` for itself (naive pseudo-labeling)."""
    return _label(scorer, candidates, k, "self", relaxed)
