"""Beta posteriors and Binomial distribution functions for integer parameters.

Every posterior here comes from a Beta(1, 1) prior updated with Bernoulli
observations, so parameters are positive integers.  That makes the
probability that one posterior draw exceeds another a finite sum, and lets
the simulator update it in O(1) per observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConsistencyError, DomainError

# Above this parameter size quadrature becomes unreliable; fall back to Monte Carlo.
QUADRATURE_PARAM_LIMIT = 10_000
MC_FALLBACK_DRAWS = 1_000_000


@dataclass(frozen=True, order=True)
class BetaParams:
    """Integer Beta parameters: ``alpha = successes + 1``, ``beta = failures + 1``."""

    alpha: int
    beta: int

    def __post_init__(self) -> None:
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise DomainError(f"{name} must be >= 1, got {value}")

    @classmethod
    def from_counts(cls, successes: int, plays: int) -> "BetaParams":
        if not 0 <= successes <= plays:
            raise DomainError(f"need 0 <= successes <= plays, got {successes}, {plays}")
        return cls(successes + 1, plays - successes + 1)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def _check_prob(p: float, name: str = "p") -> None:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")


# ---------------------------------------------------------------------------
# Binomial
# ---------------------------------------------------------------------------


def _binomial_logpmf(n: int, p: float, k: np.ndarray) -> np.ndarray:
    # 0 < p < 1 only; degenerate p is branched out by callers.
    return (
        special.gammaln(n + 1)
        - special.gammaln(k + 1)
        - special.gammaln(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def binomial_pmf(n: int, p: float, k: int) -> float:
    """Return ``C(n, k) p^k (1-p)^(n-k)``, with ``0^0 = 1``."""
    if n < 0 or k < 0 or k > n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    _check_prob(p)
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    logpmf = (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )
    return math.exp(logpmf)


def binomial_cdf(n: int, p: float, k: int) -> float:
    """Return ``P(Bin(n, p) <= k)``.

    The sum runs over whichever tail is shorter of the mean, so values near 1
    are formed as ``1 - (small upper tail)`` rather than by accumulating
    terms up to 1.
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    _check_prob(p)
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    if k < n * p:
        ks = np.arange(0, k + 1, dtype=np.float64)
        return min(1.0, math.fsum(np.exp(_binomial_logpmf(n, p, ks))))
    ks = np.arange(k + 1, n + 1, dtype=np.float64)
    return max(0.0, 1.0 - math.fsum(np.exp(_binomial_logpmf(n, p, ks))))


def binomial_cdf_all(n: int, p: float) -> np.ndarray:
    """CDF of ``Bin(n, p)`` at every ``k = 0..n`` (vectorised ``binomial_cdf``)."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    _check_prob(p)
    if p == 0.0:
        return np.ones(n + 1)
    if p == 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    ks = np.arange(n + 1, dtype=np.float64)
    pmf = np.exp(_binomial_logpmf(n, p, ks))
    lower = np.cumsum(pmf)
    # upper[k] = P(X > k)
    upper = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    out = np.where(ks < n * p, lower, 1.0 - upper)
    out[n] = 1.0
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Beta
# ---------------------------------------------------------------------------


def beta_cdf(params: BetaParams, x: float) -> float:
    """Regularized incomplete beta function ``I_x(alpha, beta)``."""
    _check_prob(x, "x")
    return float(special.betainc(params.alpha, params.beta, x))


def beta_sample(params: BetaParams, rng: np.random.Generator) -> float:
    """One draw from ``Beta(alpha, beta)``; Beta(1, 1) consumes a single uniform."""
    if params.alpha == 1 and params.beta == 1:
        return float(rng.random())
    return float(rng.beta(params.alpha, params.beta))


def _log_beta(a: int, b: int) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _prob_second_exceeds(a: int, b: int, c: int, d: int) -> float:
    """``P(Y > X)`` for ``X ~ Beta(a, b)``, ``Y ~ Beta(c, d)``; ``c`` positive terms."""
    i = np.arange(c, dtype=np.float64)
    log_terms = (
        special.betaln(a + i, b + d)
        - np.log(d + i)
        - special.betaln(1.0 + i, d)
        - _log_beta(a, b)
    )
    return math.fsum(np.exp(log_terms))


def _prob_first_exceeds_direct(a: int, b: int, c: int, d: int) -> float:
    # P(X > Y) as a positive sum over min(a, d) terms.
    if a <= d:
        return _prob_second_exceeds(c, d, a, b)
    # reflect both variables: 1 - X ~ Beta(b, a), 1 - Y ~ Beta(d, c)
    return _prob_second_exceeds(b, a, d, c)


def _prob_second_exceeds_direct(a: int, b: int, c: int, d: int) -> float:
    # P(Y > X) as a positive sum over min(b, c) terms.
    if c <= b:
        return _prob_second_exceeds(a, b, c, d)
    return _prob_second_exceeds(d, c, b, a)


def exceedance_pair(p1: BetaParams, p2: BetaParams) -> tuple[float, float]:
    """Return ``(P(X1 > X2), P(X2 > X1))``, each summed directly.

    Both values keep full relative precision even when one of them is far
    below machine epsilon, which the selection rule needs at large ``h``.
    """
    a, b, c, d = p1.alpha, p1.beta, p2.alpha, p2.beta
    first = _prob_first_exceeds_direct(a, b, c, d)
    second = _prob_second_exceeds_direct(a, b, c, d)
    return min(1.0, first), min(1.0, second)


def beta_exceedance(p1: BetaParams, p2: BetaParams) -> float:
    """Return ``P(X1 > X2)`` for independent ``Xi ~ Beta(pi)``.

    Uses the shortest of the four equivalent finite sums.  Arguments are put
    in a canonical order first so that swapping them yields the exact
    complement.
    """
    if p1 == p2:
        return 0.5
    if p2 < p1:
        return 1.0 - beta_exceedance(p2, p1)
    a, b, c, d = p1.alpha, p1.beta, p2.alpha, p2.beta
    if min(a, d) <= min(b, c):
        return min(1.0, _prob_first_exceeds_direct(a, b, c, d))
    return max(0.0, 1.0 - _prob_second_exceeds_direct(a, b, c, d))


def exceedance_step(a: int, b: int, c: int, d: int, which_arm: int, success: bool) -> float:
    """Change in ``P(X1 > X2)`` when one parameter of ``(a, b, c, d)`` increments.

    With ``G = B(a+c, b+d) / (B(a, b) B(c, d))`` the four moves are
    ``a+1: +G/a``, ``b+1: -G/b``, ``c+1: -G/c``, ``d+1: +G/d``.
    """
    log_g = _log_beta(a + c, b + d) - _log_beta(a, b) - _log_beta(c, d)
    g = math.exp(log_g)
    if which_arm == 0:
        return g / a if success else -g / b
    return -g / c if success else g / d


@dataclass(frozen=True)
class ExceedanceState:
    """Two posteriors and the current ``P(X1 > X2)``.

    ``complement`` carries ``P(X2 > X1)`` separately so that a tiny value on
    either side is never reconstructed as ``1 - (almost 1)``.
    """

    params1: BetaParams
    params2: BetaParams
    prob: float
    complement: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.prob <= 1.0:
            raise ConsistencyError(f"prob outside [0, 1]: {self.prob!r}")
        if self.complement is None:
            object.__setattr__(self, "complement", 1.0 - self.prob)
        elif abs(self.prob + self.complement - 1.0) > 1e-9:
            raise ConsistencyError(
                f"prob and complement do not sum to 1: {self.prob!r} + {self.complement!r}"
            )

    @classmethod
    def from_params(cls, params1: BetaParams, params2: BetaParams) -> "ExceedanceState":
        prob, comp = exceedance_pair(params1, params2)
        return cls(params1, params2, prob, comp)

    def resync(self) -> "ExceedanceState":
        return ExceedanceState.from_params(self.params1, self.params2)


def exceedance_increment(state: ExceedanceState, which_arm: int, success: bool) -> ExceedanceState:
    """Observe one outcome on arm ``which_arm`` (0 or 1) and update ``P(X1 > X2)`` in O(1)."""
    if which_arm not in (0, 1):
        raise DomainError(f"which_arm must be 0 or 1, got {which_arm!r}")
    a, b = state.params1.alpha, state.params1.beta
    c, d = state.params2.alpha, state.params2.beta
    step = exceedance_step(a, b, c, d, which_arm, success)
    prob = state.prob + step
    comp = state.complement - step
    # drift beyond rounding means the incoming state was not what it claimed
    if prob < -1e-9 or comp < -1e-9:
        raise ConsistencyError("increment left [0, 1]; state prob does not match its params")
    prob, comp = min(max(prob, 0.0), 1.0), min(max(comp, 0.0), 1.0)
    if which_arm == 0:
        p1 = BetaParams(a + 1, b) if success else BetaParams(a, b + 1)
        return ExceedanceState(p1, state.params2, prob, comp)
    p2 = BetaParams(c + 1, d) if success else BetaParams(c, d + 1)
    return ExceedanceState(state.params1, p2, prob, comp)


class ExceedanceTracker:
    """Mutable two-arm tracker for the simulator hot path.

    Holds integer parameters and both exceedance probabilities, applies the
    one-parameter recurrence per observation, and recomputes from scratch
    every ``resync_every`` updates to bound floating-point drift.
    """

    __slots__ = ("a", "b", "c", "d", "prob", "complement", "resync_every", "_since", "_lg")

    def __init__(self, max_param: int, resync_every: int = 1024) -> None:
        self.a = self.b = self.c = self.d = 1
        self.prob = 0.5
        self.complement = 0.5
        self.resync_every = resync_every
        self._since = 0
        # log-gamma table covering every a + b + c + d reachable in the run
        self._lg = [math.lgamma(k) if k > 0 else math.inf for k in range(max_param + 5)]

    def observe(self, which_arm: int, success: bool) -> None:
        lg = self._lg
        a, b, c, d = self.a, self.b, self.c, self.d
        log_g = (
            lg[a + c] + lg[b + d] - lg[a + b + c + d]
            - lg[a] - lg[b] + lg[a + b]
            - lg[c] - lg[d] + lg[c + d]
        )
        g = math.exp(log_g)
        if which_arm == 0:
            if success:
                step = g / a
                self.a = a + 1
            else:
                step = -g / b
                self.b = b + 1
        else:
            if success:
                step = -g / c
                self.c = c + 1
            else:
                step = g / d
                self.d = d + 1
        self.prob += step
        self.complement -= step
        self._since += 1
        if self._since >= self.resync_every or self.prob < 0.0 or self.complement < 0.0:
            self.resync()

    def resync(self) -> None:
        self.prob, self.complement = exceedance_pair(
            BetaParams(self.a, self.b), BetaParams(self.c, self.d)
        )
        self._since = 0


# ---------------------------------------------------------------------------
# n-arm best-arm probabilities
# ---------------------------------------------------------------------------


def _quadrature_best_probs(posteriors: Sequence[BetaParams]) -> np.ndarray:
    alphas = np.array([p.alpha for p in posteriors], dtype=np.float64)
    betas = np.array([p.beta for p in posteriors], dtype=np.float64)
    breakpoints = sorted({float(m) for m in alphas / (alphas + betas)})
    out = np.empty(len(posteriors))
    for i in range(len(posteriors)):
        others = np.arange(len(posteriors)) != i

        def integrand(x: float, i: int = i, others: np.ndarray = others) -> float:
            dens = math.exp(
                (alphas[i] - 1) * math.log(x)
                + (betas[i] - 1) * math.log1p(-x)
                - special.betaln(alphas[i], betas[i])
            )
            return dens * float(np.prod(special.betainc(alphas[others], betas[others], x)))

        value, _ = integrate.quad(
            integrand, 0.0, 1.0, points=breakpoints, epsabs=1e-13, epsrel=1e-11, limit=500
        )
        out[i] = value
    return out


def _monte_carlo_best_probs(
    posteriors: Sequence[BetaParams], rng: np.random.Generator, draws: int
) -> np.ndarray:
    samples = np.column_stack([rng.beta(p.alpha, p.beta, size=draws) for p in posteriors])
    counts = np.bincount(np.argmax(samples, axis=1), minlength=len(posteriors))
    return counts / draws


def best_arm_probabilities(
    posteriors: Sequence[BetaParams], rng: np.random.Generator | None = None
) -> np.ndarray:
    """Probability that each arm's posterior draw is the largest.

    Two arms use the exact finite sum.  Three or more use adaptive
    quadrature of ``pdf_i(x) * prod_{j != i} cdf_j(x)``, or Monte Carlo with
    ``MC_FALLBACK_DRAWS`` draws once any parameter exceeds
    ``QUADRATURE_PARAM_LIMIT``.
    """
    posteriors = list(posteriors)
    n = len(posteriors)
    if n < 2:
        raise DomainError(f"need at least two arms, got {n}")
    if all(p == posteriors[0] for p in posteriors):
        return np.full(n, 1.0 / n)
    if n == 2:
        p = beta_exceedance(posteriors[0], posteriors[1])
        return np.array([p, 1.0 - p])
    largest = max(max(p.alpha, p.beta) for p in posteriors)
    if largest > QUADRATURE_PARAM_LIMIT:
        if rng is None:
            rng = np.random.default_rng(0)
        probs = _monte_carlo_best_probs(posteriors, rng, MC_FALLBACK_DRAWS)
    else:
        probs = _quadrature_best_probs(posteriors)
    probs = np.clip(probs, 0.0, 1.0)
    return probs / probs.sum()
