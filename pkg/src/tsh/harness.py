"""Monte Carlo experiments: episodes, regret curves, growth fits and h sweeps."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .bandit import (
    STREAM_ENV,
    STREAM_POLICY,
    STREAM_SWEEP,
    PosteriorState,
    ProblemInstance,
    RandomStream,
    StepRecord,
    derive_seed,
)
from .errors import DomainError
from .policy import PolicyConfig, SelectionMode, categorical, selection_weights
from .posterior import BetaParams, ExceedanceTracker, beta_sample, best_arm_probabilities
from .theory import RegimeLabel, classify_regime, phase_length

RESYNC_EVERY = 1024


def geometric_checkpoints(horizon: int) -> tuple[int, ...]:
    points = []
    t = 1
    while t < horizon:
        points.append(t)
        t *= 2
    points.append(horizon)
    return tuple(points)


def linear_checkpoints(horizon: int, count: int) -> tuple[int, ...]:
    if count < 1:
        raise DomainError("linear checkpoint count must be >= 1")
    points = {max(1, round(horizon * i / count)) for i in range(1, count + 1)}
    return tuple(sorted(points | {horizon}))


@dataclass(frozen=True)
class ExperimentConfig:
    instance: ProblemInstance
    policy: PolicyConfig
    horizon: int
    runs: int = 1
    master_seed: int = 0
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.runs < 1:
            raise DomainError(f"runs must be >= 1, got {self.runs}")
        cps = tuple(int(t) for t in self.checkpoints) or geometric_checkpoints(self.horizon)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise DomainError("checkpoints must be strictly increasing")
        if cps[0] < 1 or cps[-1] != self.horizon:
            raise DomainError("checkpoints must lie in [1, horizon] and end at the horizon")
        object.__setattr__(self, "checkpoints", cps)

    def to_dict(self) -> dict:
        return {
            "mu": list(self.instance.means),
            "h": self.policy.h,
            "selection_mode": self.policy.selection_mode.value,
            "horizon": self.horizon,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "checkpoints": list(self.checkpoints),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(
            instance=ProblemInstance(tuple(data["mu"])),
            policy=PolicyConfig(data["h"], SelectionMode(data.get("selection_mode", "exact_probability"))),
            horizon=int(data["horizon"]),
            runs=int(data["runs"]),
            master_seed=int(data["master_seed"]),
            checkpoints=tuple(data["checkpoints"]),
        )


@dataclass(frozen=True)
class GapStatistics:
    """Plays of the other arms between consecutive plays of arm 0.

    ``gaps[0]`` counts plays before the first arm-0 play; ``gaps[j]`` counts
    plays strictly between the j-th and (j+1)-th.  ``trailing`` counts plays
    after the last arm-0 play, so ``arm0_plays + sum(gaps) + trailing`` is
    the horizon.
    """

    gaps: np.ndarray
    trailing: int
    arm0_plays: int
    j1_at_phase_end: int | None
    phase_length: int | None

    @property
    def total(self) -> int:
        return int(self.arm0_plays + self.gaps.sum() + self.trailing)


@dataclass(frozen=True)
class Episode:
    instance: ProblemInstance
    chosen: np.ndarray
    rewards: np.ndarray

    @property
    def horizon(self) -> int:
        return int(self.chosen.size)

    def instant_regret(self) -> np.ndarray:
        return np.asarray(self.instance.gaps)[self.chosen]

    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.instant_regret())

    def records(self) -> Iterator[StepRecord]:
        inst = self.instant_regret()
        for t in range(self.horizon):
            yield StepRecord(t + 1, int(self.chosen[t]), int(self.rewards[t]), float(inst[t]))


def gap_statistics(episode: Episode) -> GapStatistics:
    horizon = episode.horizon
    times = np.flatnonzero(episode.chosen == 0) + 1
    gaps = np.diff(np.concatenate([[0], times])) - 1
    trailing = horizon - (int(times[-1]) if times.size else 0)
    n_phase = j1 = None
    inst = episode.instance
    if inst.n_arms == 2 and inst.first_arm_unique_optimal and horizon >= 2:
        n_phase = phase_length(horizon, inst.delta)
        arm1_times = np.flatnonzero(episode.chosen == 1)
        if arm1_times.size >= n_phase:
            end = int(arm1_times[n_phase - 1])
            j1 = int(np.count_nonzero(episode.chosen[: end + 1] == 0))
    return GapStatistics(gaps.astype(np.int64), trailing, int(times.size), j1, n_phase)


def _two_arm_exact(
    means: tuple[float, float], h: float, env_u: np.ndarray, pol_u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    horizon = env_u.size
    tracker = ExceedanceTracker(max_param=horizon + 4, resync_every=RESYNC_EVERY)
    chosen = np.empty(horizon, dtype=np.int8)
    rewards = np.empty(horizon, dtype=np.int8)
    mu0, mu1 = means
    log, exp = math.log, math.exp
    observe = tracker.observe
    for t in range(horizon):
        p, q = tracker.prob, tracker.complement
        if h == 0.0:
            w = 0.5
        elif q <= 0.0:
            w = 1.0
        elif p <= 0.0:
            w = 0.0
        else:
            z = h * (log(p) - log(q))
            w = 1.0 / (1.0 + exp(-z)) if z >= 0.0 else exp(z) / (1.0 + exp(z))
        arm = 0 if pol_u[t] < w else 1
        success = env_u[t] < (mu0 if arm == 0 else mu1)
        observe(arm, success)
        chosen[t] = arm
        rewards[t] = success
    return chosen, rewards


def _general(
    instance: ProblemInstance, policy: PolicyConfig, env_u: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    horizon = env_u.size
    n = instance.n_arms
    plays = [0] * n
    wins = [0] * n
    chosen = np.empty(horizon, dtype=np.int8)
    rewards = np.empty(horizon, dtype=np.int8)
    baseline = policy.selection_mode is SelectionMode.POSTERIOR_DRAW_BASELINE
    for t in range(horizon):
        params = [BetaParams(s + 1, j - s + 1) for j, s in zip(plays, wins)]
        if baseline:
            draws = [beta_sample(p, rng) for p in params]
            arm = int(np.argmax(draws))
        else:
            arm = categorical(selection_weights(best_arm_probabilities(params, rng), policy.h), rng.random())
        success = env_u[t] < instance.means[arm]
        plays[arm] += 1
        wins[arm] += success
        chosen[t] = arm
        rewards[t] = success
    return chosen, rewards


def run_episode(config: ExperimentConfig, run_index: int) -> tuple[Episode, GapStatistics]:
    """Simulate one run of ``config.horizon`` steps.

    The environment stream supplies one uniform per step; the policy stream
    supplies one uniform per step (exact mode) or one Beta draw per arm per
    step (baseline mode).  Output depends only on ``(config, run_index)``.
    """
    instance = config.instance
    env_u = RandomStream(config.master_seed, run_index, STREAM_ENV).generator().random(config.horizon)
    pol_rng = RandomStream(config.master_seed, run_index, STREAM_POLICY).generator()
    exact = config.policy.selection_mode is SelectionMode.EXACT_PROBABILITY
    if exact and instance.n_arms == 2:
        chosen, rewards = _two_arm_exact(
            instance.means, config.policy.h, env_u, pol_rng.random(config.horizon)
        )
    else:
        chosen, rewards = _general(instance, config.policy, env_u, pol_rng)
    episode = Episode(instance, chosen, rewards)
    return episode, gap_statistics(episode)


def final_state(episode: Episode) -> PosteriorState:
    n = episode.instance.n_arms
    plays = np.bincount(episode.chosen, minlength=n)
    wins = np.bincount(episode.chosen, weights=episode.rewards, minlength=n).astype(np.int64)
    return PosteriorState(tuple(int(v) for v in plays), tuple(int(v) for v in wins))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegretCurve:
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    runs: int
    per_run: np.ndarray = field(repr=False)

    def at(self, t: int) -> float:
        idx = np.flatnonzero(self.t == t)
        if not idx.size:
            raise KeyError(f"no checkpoint at t={t}")
        return float(self.mean[idx[0]])


def _run_chunk(config: ExperimentConfig, run_indices: Sequence[int]) -> np.ndarray:
    cps = np.asarray(config.checkpoints) - 1
    out = np.empty((len(run_indices), cps.size))
    for row, r in enumerate(run_indices):
        episode, _ = run_episode(config, r)
        out[row] = episode.cumulative_regret()[cps]
    return out


def default_workers() -> int:
    env = os.environ.get("TSH_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            raise DomainError(f"TSH_THREADS must be an integer, got {env!r}") from None
    return cpus


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> RegretCurve:
    """Mean cumulative pseudo-regret over ``config.runs`` independent runs.

    Runs are split across worker processes but reassembled by run index, so
    the result does not depend on ``workers``.
    """
    workers = default_workers() if workers is None else max(1, workers)
    indices = list(range(config.runs))
    if workers == 1 or config.runs == 1:
        per_run = _run_chunk(config, indices)
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        per_run = np.empty((config.runs, len(config.checkpoints)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, block in zip(chunks, pool.map(_run_chunk, [config] * workers, chunks)):
                per_run[chunk] = block
    mean = per_run.mean(axis=0)
    if config.runs > 1:
        stderr = per_run.std(axis=0, ddof=1) / math.sqrt(config.runs)
    else:
        stderr = np.zeros_like(mean)
    return RegretCurve(np.asarray(config.checkpoints), mean, stderr, config.runs, per_run)


def _tail_window(curve: RegretCurve, tail_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < tail_fraction <= 1.0:
        raise DomainError(f"tail_fraction must lie in (0, 1], got {tail_fraction!r}")
    count = math.ceil(tail_fraction * curve.t.size)
    if count < 4:
        raise DomainError(f"need >= 4 checkpoints in the tail window, got {count}")
    return curve.t[-count:].astype(np.float64), curve.mean[-count:]


def fit_log_slope(curve: RegretCurve, tail_fraction: float = 0.5) -> tuple[float, float, float]:
    """Least-squares ``mean ~ slope * ln t + intercept``; returns RMS residual as well."""
    t, mean = _tail_window(curve, tail_fraction)
    x = np.log(t)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, mean, rcond=None)
    resid = mean - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_power_exponent(curve: RegretCurve, tail_fraction: float = 0.5) -> float:
    """Slope of ``ln mean`` against ``ln t`` over the tail window."""
    t, mean = _tail_window(curve, tail_fraction)
    if np.any(mean <= 0.0):
        raise DomainError("power-law fit needs positive regret in the tail window")
    x = np.log(t)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, _), *_ = np.linalg.lstsq(design, np.log(mean), rcond=None)
    return float(slope)


def log_ratio_change(curve: RegretCurve, horizon: int | None = None) -> float:
    """Relative change of ``mean(t) / ln t`` from ``t = T/2`` to ``t = T``.

    Near zero for logarithmic growth; large and positive for growth faster
    than ``ln t``.
    """
    horizon = int(curve.t[-1]) if horizon is None else horizon
    half = horizon // 2
    early = curve.at(half) / math.log(half)
    late = curve.at(horizon) / math.log(horizon)
    if early == 0.0:
        return 0.0 if late == 0.0 else math.inf
    return late / early - 1.0


@dataclass(frozen=True)
class SweepRow:
    h: float
    config: ExperimentConfig
    curve: RegretCurve
    log_slope: float | None
    power_exponent: float | None
    predicted: RegimeLabel | None


def sweep_h(
    base_config: ExperimentConfig,
    h_list: Sequence[float],
    workers: int | None = None,
    tail_fraction: float = 0.5,
) -> list[SweepRow]:
    """Run one experiment per ``h``; row ``i`` gets its own master seed.

    The derived seed is stored in each row's config so that
    ``run_experiment(row.config)`` reproduces the row.
    """
    if not h_list:
        raise DomainError("h grid is empty")
    inst = base_config.instance
    rows = []
    for i, h in enumerate(h_list):
        cfg = replace(
            base_config,
            policy=replace(base_config.policy, h=float(h)),
            master_seed=derive_seed(base_config.master_seed, STREAM_SWEEP, i),
        )
        curve = run_experiment(cfg, workers)
        try:
            slope = fit_log_slope(curve, tail_fraction)[0]
        except DomainError:
            slope = None
        try:
            exponent = fit_power_exponent(curve, tail_fraction)
        except DomainError:
            exponent = None
        predicted = None
        if inst.n_arms == 2 and inst.first_arm_unique_optimal and 0.0 < inst.means[1] and inst.means[0] < 1.0:
            predicted = classify_regime(inst.means[0], inst.means[1], float(h))
        rows.append(SweepRow(float(h), cfg, curve, slope, exponent, predicted))
    return rows
