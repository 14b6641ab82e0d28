"""Closed-form regret-analysis quantities for the two-arm problem.

Notation: ``mu1 > mu2`` are the arm means, ``delta = mu1 - mu2`` and
``y = (mu1 + mu2) / 2``.  The analysis quantities are

    R = mu1 (1-y)^h / (y^h (1-mu1))
    S = (1-mu1) / (1-y)^h
    U = R^y S

whose positions relative to 1 (and to ``exp(delta^2/16)``) decide which
regret order the upper bound delivers.  ``ln U`` is affine in ``h`` with
slope equal to the binary entropy of ``y``, and ``ln U(1) = -KL(y || mu1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .posterior import binomial_cdf_all

# Grid coordinates computed in floating point are snapped to the nearest
# integer when they lie this close to one.
_SNAP = 1e-9


# ---------------------------------------------------------------------------
# Scalar quantities
# ---------------------------------------------------------------------------


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(y)


def kl_bernoulli(y: float, mu: float) -> float:
    """``D(Bernoulli(y) || Bernoulli(mu))`` in nats, with ``0 ln 0 = 0``."""
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"y must lie in [0, 1], got {y!r}")
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"mu must lie in [0, 1], got {mu!r}")
    if (mu == 0.0 and y > 0.0) or (mu == 1.0 and y < 1.0):
        return math.inf
    value = 0.0
    if y > 0.0:
        value += y * math.log(y / mu)
    if y < 1.0:
        value += (1.0 - y) * math.log((1.0 - y) / (1.0 - mu))
    return max(value, 0.0)


def binary_entropy(y: float) -> float:
    return -_xlogy(1.0 - y, 1.0 - y) - _xlogy(y, y)


def phase_length(horizon: float, delta: float) -> int:
    """Arm-2 play count ``ceil(16 ln T / delta^2)`` separating the two proof phases."""
    if horizon < 2:
        raise DomainError(f"horizon must be >= 2, got {horizon!r}")
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}")
    raw = 16.0 * math.log(horizon) / (delta * delta)
    nearest = round(raw)
    if abs(raw - nearest) < _SNAP * max(1.0, raw):
        return int(nearest)
    return math.ceil(raw)


def _check_pair(mu1: float, y: float) -> None:
    if not 0.0 < mu1 < 1.0:
        raise DomainError(f"mu1 must lie in (0, 1), got {mu1!r}")
    if not 0.0 < y < 1.0:
        raise DomainError(f"y must lie in (0, 1), got {y!r}")
    if not mu1 > y:
        raise DomainError(f"need mu1 > y, got mu1={mu1!r}, y={y!r}")


def log_quantity_R(mu1: float, y: float, h: float) -> float:
    _check_pair(mu1, y)
    return math.log(mu1) - math.log1p(-mu1) + h * (math.log1p(-y) - math.log(y))


def log_quantity_S(mu1: float, y: float, h: float) -> float:
    _check_pair(mu1, y)
    return math.log1p(-mu1) - h * math.log1p(-y)


def log_quantity_U(mu1: float, y: float, h: float) -> float:
    return y * log_quantity_R(mu1, y, h) + log_quantity_S(mu1, y, h)


def quantity_R(mu1: float, y: float, h: float) -> float:
    return math.exp(log_quantity_R(mu1, y, h))


def quantity_S(mu1: float, y: float, h: float) -> float:
    return math.exp(log_quantity_S(mu1, y, h))


def quantity_U(mu1: float, y: float, h: float) -> float:
    return math.exp(log_quantity_U(mu1, y, h))


def _midpoint(mu1: float, mu2: float) -> float:
    if not 0.0 < mu2 < mu1 < 1.0:
        raise DomainError(f"need 0 < mu2 < mu1 < 1, got mu1={mu1!r}, mu2={mu2!r}")
    return 0.5 * (mu1 + mu2)


def h_threshold_R(mu1: float, y: float) -> float:
    """``h`` at which ``R = 1``; ``inf`` when ``y <= 1/2`` (then ``R >= 1`` for all ``h >= 1``)."""
    _check_pair(mu1, y)
    if y <= 0.5:
        return math.inf
    return math.log((1.0 - mu1) / mu1) / math.log((1.0 - y) / y)


def h_threshold_U(mu1: float, y: float) -> float:
    """Closed-form root of ``U(h) = 1``."""
    _check_pair(mu1, y)
    num = math.log1p(-mu1) + y * math.log(mu1 / (1.0 - mu1))
    den = _xlogy(1.0 - y, 1.0 - y) + _xlogy(y, y)
    return num / den


def h_threshold_S(mu1: float, y: float) -> float:
    """``h`` at which ``S = 1``."""
    _check_pair(mu1, y)
    return math.log1p(-mu1) / math.log1p(-y)


@dataclass(frozen=True)
class HRange:
    low: float
    high: float

    def __contains__(self, h: float) -> bool:
        return self.low <= h <= self.high

    def as_list(self) -> list[float]:
        return [self.low, self.high]


def theorem1_h_range(mu1: float, mu2: float) -> HRange:
    """Interval of ``h`` for which the two-arm regret bound is ``O(log T)``."""
    y = _midpoint(mu1, mu2)
    h_u = h_threshold_U(mu1, y)
    h_max = min(h_threshold_R(mu1, y), h_u) if y > 0.5 else h_u
    if not h_max >= 1.0 - 1e-12:
        raise AssertionError(f"h_max={h_max!r} < 1 for mu=({mu1}, {mu2})")
    return HRange(0.5, h_max)


def h_max_via_root(mu1: float, mu2: float, tol: float = 1e-14) -> float:
    """Root of ``ln U(h) = 0`` by bisection, using only that ``ln U`` increases in ``h``."""
    y = _midpoint(mu1, mu2)
    lo, hi = 0.0, 1.0
    if log_quantity_U(mu1, y, lo) > 0.0:
        raise DomainError("ln U(0) > 0: no positive root")
    while log_quantity_U(mu1, y, hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise DomainError("ln U does not cross zero")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if log_quantity_U(mu1, y, mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Regimes
# ---------------------------------------------------------------------------

LOGARITHMIC = "Logarithmic"
POLYNOMIAL_SMALL_H = "PolynomialSmallH"
POLYNOMIAL_LARGE_H = "PolynomialLargeH"
TRIVIAL_BOUND = "TrivialBound"


@dataclass(frozen=True)
class RegimeLabel:
    """Order of the regret upper bound; ``exponent`` is the power of ``T`` where polynomial."""

    kind: str
    exponent: float | None = None
    branch: str | None = None  # "S" or "U" for PolynomialLargeH / TrivialBound above h_max

    def __str__(self) -> str:
        if self.exponent is None:
            return self.kind
        return f"{self.kind}({self.exponent:.12g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "exponent": self.exponent, "branch": self.branch}


def classify_regime(mu1: float, mu2: float, h: float) -> RegimeLabel:
    if not h >= 0.0 or math.isinf(h):
        raise DomainError(f"h must be a finite real >= 0, got {h!r}")
    h_range = theorem1_h_range(mu1, mu2)
    if h < 0.5:
        return RegimeLabel(POLYNOMIAL_SMALL_H, 1.0 - 2.0 * h)
    if h in h_range:
        return RegimeLabel(LOGARITHMIC)
    y = 0.5 * (mu1 + mu2)
    delta = mu1 - mu2
    log_limit = delta * delta / 16.0
    if log_quantity_R(mu1, y, h) < 0.0:
        branch, log_q = "S", log_quantity_S(mu1, y, h)
    else:
        branch, log_q = "U", log_quantity_U(mu1, y, h)
    if log_q < log_limit:
        return RegimeLabel(POLYNOMIAL_LARGE_H, 16.0 * log_q / (delta * delta), branch)
    return RegimeLabel(TRIVIAL_BOUND, None, branch)


def regime_breakpoints(mu1: float, mu2: float) -> list[float]:
    """Values of ``h`` at which :func:`classify_regime` changes kind."""
    y = 0.5 * (mu1 + mu2)
    delta = mu1 - mu2
    log_limit = delta * delta / 16.0
    h_max = theorem1_h_range(mu1, mu2).high
    h_r = h_threshold_R(mu1, y)
    # U is live up to h_R and S after it; they agree at h_R (R = 1), so the
    # live quantity is continuous and increasing and crosses the limit once.
    u_cross = (log_limit - (math.log1p(-mu1) + y * math.log(mu1 / (1.0 - mu1)))) / binary_entropy(y)
    s_cross = (math.log1p(-mu1) - log_limit) / math.log1p(-y)
    return [0.5, h_max, u_cross if u_cross <= h_r else s_cross]


@dataclass(frozen=True)
class ThresholdReport:
    mu1: float
    mu2: float
    h: float | None
    horizon: int | None
    y: float
    delta: float
    kl: float
    N: int | None
    R: float | None
    S: float | None
    U: float | None
    h_range: HRange
    h_threshold_R: float
    h_threshold_U: float
    regime: RegimeLabel | None

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "mu2": self.mu2,
            "h": self.h,
            "horizon": self.horizon,
            "y": self.y,
            "delta": self.delta,
            "kl": self.kl,
            "N": self.N,
            "R": self.R,
            "S": self.S,
            "U": self.U,
            "h_range": self.h_range.as_list(),
            "h_threshold_R": None if math.isinf(self.h_threshold_R) else self.h_threshold_R,
            "h_threshold_U": self.h_threshold_U,
            "regime": None if self.regime is None else str(self.regime),
            "regime_detail": None if self.regime is None else self.regime.to_dict(),
        }


def threshold_report(
    mu1: float, mu2: float, h: float | None = None, horizon: int | None = None
) -> ThresholdReport:
    y = _midpoint(mu1, mu2)
    delta = mu1 - mu2
    has_h = h is not None
    return ThresholdReport(
        mu1=mu1,
        mu2=mu2,
        h=h,
        horizon=horizon,
        y=y,
        delta=delta,
        kl=kl_bernoulli(y, mu1),
        N=phase_length(horizon, delta) if horizon is not None else None,
        R=quantity_R(mu1, y, h) if has_h else None,
        S=quantity_S(mu1, y, h) if has_h else None,
        U=quantity_U(mu1, y, h) if has_h else None,
        h_range=theorem1_h_range(mu1, mu2),
        h_threshold_R=h_threshold_R(mu1, y),
        h_threshold_U=h_threshold_U(mu1, y),
        regime=classify_regime(mu1, mu2, h) if has_h else None,
    )


# ---------------------------------------------------------------------------
# Numeric verification suites
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    """Per-grid-point results of one verification suite.

    ``residual`` is ``|lhs - rhs|`` for identities and ``rhs - lhs`` for
    inequalities of the form ``lhs >= rhs`` (positive means violated).
    """

    suite: str
    coords: tuple[str, ...]
    lemma: np.ndarray
    grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    passed: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return int(self.passed.size)

    @property
    def n_violations(self) -> int:
        return int((~self.passed).sum())

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def sorted(self) -> "VerificationReport":
        order = np.lexsort(tuple(self.grid[:, k] for k in reversed(range(self.grid.shape[1]))))
        order = order[np.argsort(self.lemma[order], kind="stable")]
        return VerificationReport(
            self.suite, self.coords, self.lemma[order], self.grid[order], self.lhs[order],
            self.rhs[order], self.residual[order], self.passed[order], dict(self.summary),
        )

    def records(self) -> Iterable[dict]:
        for i in range(self.n_points):
            yield {
                "lemma": str(self.lemma[i]),
                "grid_point": {c: _plain(self.grid[i, k]) for k, c in enumerate(self.coords)},
                "lhs": float(self.lhs[i]),
                "rhs": float(self.rhs[i]),
                "pass": bool(self.passed[i]),
            }

    def violations(self) -> list[dict]:
        return [r for r in self.records() if not r["pass"]]

    def write_json(self, fh) -> None:
        """Stream the per-point records as a JSON array."""
        fh.write("[")
        for i, rec in enumerate(self.sorted().records()):
            fh.write(",\n" if i else "\n")
            fh.write(json.dumps(rec))
        fh.write("\n]\n")


def _plain(v: float) -> float | int:
    v = float(v)
    return int(v) if v.is_integer() else v


def _build(
    suite: str, coords: Sequence[str], rows: list[tuple], **summary
) -> VerificationReport:
    # rows: (lemma, coord..., lhs, rhs, residual, passed)
    k = len(coords)
    if rows:
        lemma = np.array([r[0] for r in rows])
        data = np.array([r[1:k + 4] for r in rows], dtype=np.float64)
        passed = np.array([r[k + 4] for r in rows], dtype=bool)
    else:
        lemma = np.array([], dtype=str)
        data = np.empty((0, k + 3))
        passed = np.empty(0, dtype=bool)
    return VerificationReport(
        suite, tuple(coords), lemma, data[:, :k], data[:, k], data[:, k + 1], data[:, k + 2],
        passed, summary,
    )


def _from_arrays(
    suite: str, lemma: str, coords: Sequence[str], grid: np.ndarray, lhs: np.ndarray,
    rhs: np.ndarray, residual: np.ndarray, passed: np.ndarray, **summary,
) -> VerificationReport:
    return VerificationReport(
        suite, tuple(coords), np.full(lhs.shape, lemma), grid, lhs, rhs, residual, passed, summary
    )


def _snap_floor(x: float) -> int:
    return math.floor(x + _SNAP)


def _snap_ceil(x: float) -> int:
    return math.ceil(x - _SNAP)


def default_unit_grid(step: float = 0.05, include_ends: bool = True) -> np.ndarray:
    count = round(1.0 / step)
    grid = np.arange(count + 1) / count
    return grid if include_ends else grid[1:-1]


def verify_lemma3(
    max_param: int = 200, x_grid: Sequence[float] | None = None, tol: float = 1e-10
) -> VerificationReport:
    """Beta CDF against the Binomial route: ``I_x(a, b) = 1 - F_Bin(a+b-1, x)(a-1)``."""
    xs = np.arange(1, 100) / 100.0 if x_grid is None else np.asarray(x_grid, dtype=float)
    grids, lhs_parts, rhs_parts = [], [], []
    for n in range(1, 2 * max_param):
        alphas = np.arange(max(1, n + 1 - max_param), min(max_param, n) + 1)
        betas = n + 1 - alphas
        for x in xs:
            cdf = binomial_cdf_all(n, float(x))
            lhs_parts.append(special.betainc(alphas, betas, x))
            rhs_parts.append(1.0 - cdf[alphas - 1])
            grids.append(np.column_stack([alphas, betas, np.full(alphas.shape, x)]))
    grid = np.vstack(grids)
    lhs = np.concatenate(lhs_parts)
    rhs = np.concatenate(rhs_parts)
    residual = np.abs(lhs - rhs)
    return _from_arrays(
        "lemma3", "lemma3", ("alpha", "beta", "x"), grid, lhs, rhs, residual, residual <= tol,
        tolerance=tol,
    )


def verify_fact2(
    n_max: int = 200, p_grid: Sequence[float] | None = None, tol: float = 1e-12
) -> VerificationReport:
    """Binomial median lies in ``{floor(np), ceil(np)}``.

    ``lhs`` is ``min(P(X <= m), P(X >= m))`` for the best candidate ``m``;
    it must reach 1/2 (``tol`` absorbs rounding at exact halves).
    """
    ps = np.arange(1, 100) / 100.0 if p_grid is None else np.asarray(p_grid, dtype=float)
    rows = []
    for n in range(1, n_max + 1):
        for p in ps:
            cdf = binomial_cdf_all(n, float(p))
            best = -1.0
            for m in {math.floor(n * p), math.ceil(n * p)}:
                if not 0 <= m <= n:
                    continue
                below = cdf[m]
                above = 1.0 - (cdf[m - 1] if m >= 1 else 0.0)
                best = max(best, min(below, above))
            rows.append(("fact2", n, float(p), best, 0.5, 0.5 - best, best >= 0.5 - tol))
    return _build("fact2", ("n", "p"), rows, tolerance=tol)


def verify_lemma4(
    n_values: Sequence[int] | None = None,
    p_grid: Sequence[float] | None = None,
    delta_grid: Sequence[float] | None = None,
) -> VerificationReport:
    """``F_Bin(n+1, p)(floor(np + n Delta)) >= 1 - exp(4 Delta - 2 n Delta^2)``."""
    ns = range(1, 501) if n_values is None else n_values
    ps = default_unit_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    deltas = default_unit_grid() if delta_grid is None else np.asarray(delta_grid, dtype=float)
    rows = []
    for n in ns:
        for p in ps:
            cdf = binomial_cdf_all(n + 1, float(p))
            for d in deltas:
                k = _snap_floor(n * p + n * d)
                lhs = 1.0 if k >= n + 1 else float(cdf[k]) if k >= 0 else 0.0
                rhs = 1.0 - math.exp(4.0 * d - 2.0 * n * d * d)
                rows.append(("lemma4", n, float(p), float(d), lhs, rhs, rhs - lhs, lhs >= rhs))
    return _build("lemma4", ("n", "p", "delta"), rows)


def verify_chernoff(
    n_values: Sequence[int] | None = None,
    p_grid: Sequence[float] | None = None,
    delta_grid: Sequence[float] | None = None,
) -> VerificationReport:
    """Both Hoeffding tails of ``Bin(n, p)`` at deviation ``a = n Delta``.

    ``lhs`` is the Hoeffding bound ``exp(-2 a^2 / n)`` and ``rhs`` the exact
    tail, so ``lhs >= rhs`` is the claim.
    """
    ns = range(1, 501) if n_values is None else n_values
    ps = default_unit_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    deltas = default_unit_grid() if delta_grid is None else np.asarray(delta_grid, dtype=float)
    rows = []
    for n in ns:
        for p in ps:
            cdf = binomial_cdf_all(n, float(p))
            for d in deltas:
                a = n * d
                bound = math.exp(-2.0 * a * a / n)
                k_up = _snap_ceil(n * p + a)  # P(S >= k_up)
                upper = 0.0 if k_up > n else 1.0 - (cdf[k_up - 1] if k_up >= 1 else 0.0)
                k_lo = _snap_floor(n * p - a)  # P(S <= k_lo)
                lower = 0.0 if k_lo < 0 else float(cdf[min(k_lo, n)])
                for lemma, tail in (("chernoff_upper", upper), ("chernoff_lower", lower)):
                    tail = max(float(tail), 0.0)
                    rows.append((lemma, n, float(p), float(d), bound, tail, tail - bound, bound >= tail))
    return _build("chernoff", ("n", "p", "delta"), rows)


def default_lemma567_grid() -> list[tuple[float, float, float]]:
    grid = []
    mu1s = np.round(np.arange(0.05, 0.96, 0.05), 10)
    hs = np.round(np.concatenate([np.arange(1.05, 3.0, 0.05), np.arange(3.0, 10.01, 0.5)]), 10)
    for mu1 in mu1s:
        # y ranges over midpoints of valid instances: mu2 = 2y - mu1 in (0, mu1)
        for y in np.round(np.arange(0.025, 0.99, 0.025), 10):
            if mu1 / 2.0 < y < mu1:
                for h in hs:
                    grid.append((float(mu1), float(y), float(h)))
    return grid


def verify_lemma567(
    grid: Iterable[tuple[float, float, float]] | None = None, margin: float = 1e-9
) -> VerificationReport:
    """Check the R / S / U conditions on a grid of ``(mu1, y, h)`` with ``h > 1``.

    ``lhs`` is the quantity (R, S or U), ``rhs`` the reference value 1 and
    ``residual`` a 0/1 mismatch flag.

    Points within ``margin`` (relative) of a threshold in ``h`` are skipped,
    since there the sign of ``ln R`` or ``ln U`` is decided by rounding.
    """
    rows = []
    skipped = 0
    for mu1, y, h in default_lemma567_grid() if grid is None else grid:
        if not h > 1.0:
            raise DomainError(f"R/S/U grid requires h > 1, got {h!r}")
        log_r = log_quantity_R(mu1, y, h)
        log_s = log_quantity_S(mu1, y, h)
        log_u = log_quantity_U(mu1, y, h)
        h_r = h_threshold_R(mu1, y)
        h_u = h_threshold_U(mu1, y)
        if abs(h - h_r) <= margin * h or abs(h - h_u) <= margin * h:
            skipped += 1
            continue
        r_below = y > 0.5 and h > h_r
        # R < 1 exactly when y > 1/2 and h > h_R
        ok5 = (log_r < 0.0) == r_below
        rows.append(("lemma5", mu1, y, h, math.exp(log_r), 1.0, float(not ok5), ok5))
        # in that same region S > 1
        if r_below:
            ok6 = log_s > 0.0
            rows.append(("lemma6", mu1, y, h, math.exp(log_s), 1.0, float(not ok6), ok6))
        # U <= 1 exactly when h <= h_U
        ok7 = (log_u <= 0.0) == (h <= h_u)
        rows.append(("lemma7", mu1, y, h, math.exp(log_u), 1.0, float(not ok7), ok7))
    return _build("lemma567", ("mu1", "y", "h"), rows, skipped_near_threshold=skipped)


def exceedance_quadrature(p1, p2) -> float:
    """``P(X1 > X2)`` as ``int_0^1 pdf_1(x) cdf_2(x) dx`` (adaptive quadrature oracle)."""
    from scipy import integrate, stats

    def integrand(x: float) -> float:
        return stats.beta.pdf(x, p1.alpha, p1.beta) * special.betainc(p2.alpha, p2.beta, x)

    points = sorted({p1.mean, p2.mean})
    value, _ = integrate.quad(integrand, 0.0, 1.0, points=points, epsabs=1e-14, epsrel=1e-12, limit=500)
    return value


def verify_exceedance(
    pairs: int = 200,
    max_param: int = 100,
    trajectories: int = 20,
    steps: int = 200,
    seed: int = 0,
    quad_tol: float = 1e-8,
    increment_tol: float = 1e-10,
) -> VerificationReport:
    """Exact exceedance against quadrature, and the O(1) recurrence against scratch sums."""
    from .posterior import BetaParams, ExceedanceState, beta_exceedance, exceedance_increment

    rng = np.random.default_rng(seed)
    rows = []
    for k in range(pairs):
        a, b, c, d = (int(v) for v in rng.integers(1, max_param + 1, size=4))
        p1, p2 = BetaParams(a, b), BetaParams(c, d)
        exact = beta_exceedance(p1, p2)
        oracle = exceedance_quadrature(p1, p2)
        err = abs(exact - oracle)
        rows.append(("quadrature", k, 0, a, b, c, d, exact, oracle, err, err <= quad_tol))
    for k in range(trajectories):
        state = ExceedanceState.from_params(BetaParams(1, 1), BetaParams(1, 1))
        for step in range(1, steps + 1):
            state = exceedance_increment(state, int(rng.integers(2)), bool(rng.integers(2)))
            scratch = beta_exceedance(state.params1, state.params2)
            err = abs(state.prob - scratch)
            rows.append((
                "increment", k, step, state.params1.alpha, state.params1.beta,
                state.params2.alpha, state.params2.beta, state.prob, scratch, err, err <= increment_tol,
            ))
    return _build(
        "exceedance", ("case", "step", "alpha1", "beta1", "alpha2", "beta2"), rows,
        quadrature_tolerance=quad_tol, increment_tolerance=increment_tol,
    )
