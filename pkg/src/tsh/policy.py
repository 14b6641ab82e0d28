"""Thompson Sampling with an exponent ``h`` on the best-arm probabilities.

Arm ``i`` is played with probability proportional to
``P(i is the posterior-best arm) ** h``.  ``h = 1`` is ordinary Thompson
Sampling; larger ``h`` exploits harder, smaller ``h`` explores more.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bandit import PosteriorState
from .errors import DegenerateInputError, DomainError
from .posterior import beta_sample, best_arm_probabilities

# Weights below this after normalisation are flushed to exact zero.
WEIGHT_FLUSH = 1e-300


class SelectionMode(str, enum.Enum):
    EXACT_PROBABILITY = "exact_probability"
    POSTERIOR_DRAW_BASELINE = "posterior_draw_baseline"


@dataclass(frozen=True)
class PolicyConfig:
    h: float = 1.0
    selection_mode: SelectionMode = SelectionMode.EXACT_PROBABILITY

    def __post_init__(self) -> None:
        h = float(self.h)
        if not h >= 0.0 or math.isinf(h):
            raise DomainError(f"h must be a finite real >= 0, got {self.h!r}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "selection_mode", SelectionMode(self.selection_mode))


def _check_h(h: float) -> None:
    if not h >= 0.0 or math.isinf(h):
        raise DomainError(f"h must be a finite real >= 0, got {h!r}")


def selection_weights(best_probs: Sequence[float], h: float) -> np.ndarray:
    """Normalise ``best_probs ** h``, computed as ``exp(h log p - max)``.

    At ``h = 0`` the result is uniform over the arms with nonzero input.
    """
    _check_h(h)
    p = np.asarray(best_probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("best_probs must be a non-empty vector")
    if np.any(p < 0.0) or np.any(p > 1.0) or np.any(np.isnan(p)):
        raise DomainError("best_probs entries must lie in [0, 1]")
    support = p > 0.0
    if not support.any():
        raise DegenerateInputError("all best-arm probabilities are zero")
    if abs(p.sum() - 1.0) > 1e-6:
        raise DomainError(f"best_probs must sum to 1 (got {p.sum()!r})")
    if h == 0.0:
        return support / support.sum()
    logw = np.full(p.shape, -np.inf)
    logw[support] = h * np.log(p[support])
    w = np.exp(logw - logw.max())
    w /= w.sum()
    w[w < WEIGHT_FLUSH] = 0.0
    return w / w.sum()


def two_arm_selection(p: float, h: float) -> float:
    """Probability of playing arm 0 when it is posterior-best with probability ``p``.

    Equals ``1 / (1 + (1/p - 1) ** h)``; evaluated as a logistic function of
    ``h`` times the log-odds of ``p``.
    """
    _check_h(h)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return p
    if h == 0.0:
        return 0.5
    return _logistic(h * (math.log(p) - math.log1p(-p)))


def two_arm_selection_from_pair(p: float, q: float, h: float) -> float:
    """As :func:`two_arm_selection`, given ``p`` and its complement ``q`` separately.

    Keeps precision when ``q`` (or ``p``) is far below machine epsilon.
    """
    if h == 0.0:
        return 0.5
    if q <= 0.0:
        return 1.0
    if p <= 0.0:
        return 0.0
    return _logistic(h * (math.log(p) - math.log(q)))


def _logistic(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def expected_gap_plays(p: float, h: float) -> float:
    """Expected arm-1 plays between consecutive arm-0 plays, ``(1/p - 1) ** h``.

    Returns ``inf`` at ``p = 0`` and ``0`` at ``p = 1``.
    """
    _check_h(h)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.0:
        return math.inf
    if p == 1.0:
        return 0.0
    return math.exp(h * (math.log1p(-p) - math.log(p)))


def select_arm(state: PosteriorState, config: PolicyConfig, rng: np.random.Generator) -> int:
    if config.selection_mode is SelectionMode.POSTERIOR_DRAW_BASELINE:
        draws = [beta_sample(params, rng) for params in state.params]
        return int(np.argmax(draws))
    weights = selection_weights(best_arm_probabilities(state.params), config.h)
    return categorical(weights, rng.random())


def categorical(weights: np.ndarray, u: float) -> int:
    """Index ``i`` with ``cumsum[i-1] <= u < cumsum[i]``, skipping zero-weight arms."""
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    idx = min(idx, len(weights) - 1)
    while weights[idx] == 0.0:
        idx -= 1
    return idx
