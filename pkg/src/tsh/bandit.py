"""Bernoulli bandit environment, posterior bookkeeping and seeded streams.

Arms are indexed from 0; arm 0 plays the role of the unique optimal arm
whenever the analysis in :mod:`tsh.theory` is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .posterior import BetaParams

# Purpose tags for per-run streams.  Values are part of the reproducibility
# contract: changing them changes every simulated trajectory.
STREAM_ENV = 0
STREAM_POLICY = 1
STREAM_SWEEP = 2


@dataclass(frozen=True)
class ProblemInstance:
    means: tuple[float, ...]

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.means)
        if len(means) < 2:
            raise DomainError("a bandit needs at least two arms")
        for m in means:
            if not 0.0 <= m <= 1.0 or math.isnan(m):
                raise DomainError(f"arm means must lie in [0, 1], got {m!r}")
        object.__setattr__(self, "means", means)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def gaps(self) -> tuple[float, ...]:
        best = max(self.means)
        return tuple(best - m for m in self.means)

    @property
    def max_gap(self) -> float:
        return max(self.gaps)

    @property
    def first_arm_unique_optimal(self) -> bool:
        return all(self.means[0] > m for m in self.means[1:])

    @property
    def delta(self) -> float:
        self._require_two_arms()
        return self.means[0] - self.means[1]

    @property
    def midpoint(self) -> float:
        """The midpoint ``y = (mu1 + mu2) / 2`` used by the regret analysis."""
        self._require_two_arms()
        return 0.5 * (self.means[0] + self.means[1])

    def _require_two_arms(self) -> None:
        if self.n_arms != 2:
            raise DomainError("delta and midpoint are defined for two-arm instances only")


@dataclass(frozen=True)
class PosteriorState:
    plays: tuple[int, ...]
    successes: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.plays) != len(self.successes):
            raise DomainError("plays and successes must have equal length")
        for j, s in zip(self.plays, self.successes):
            if not 0 <= s <= j:
                raise DomainError(f"need 0 <= successes <= plays, got {s}, {j}")

    @classmethod
    def fresh(cls, n_arms: int) -> "PosteriorState":
        return cls((0,) * n_arms, (0,) * n_arms)

    @property
    def n_arms(self) -> int:
        return len(self.plays)

    @property
    def params(self) -> list[BetaParams]:
        return [BetaParams(s + 1, j - s + 1) for j, s in zip(self.plays, self.successes)]


def update(state: PosteriorState, arm: int, reward: int) -> PosteriorState:
    """Return a new state with one more play (and possibly success) on ``arm``."""
    if not 0 <= arm < state.n_arms:
        raise DomainError(f"arm {arm} out of range for {state.n_arms} arms")
    plays = list(state.plays)
    successes = list(state.successes)
    plays[arm] += 1
    if reward:
        successes[arm] += 1
    return PosteriorState(tuple(plays), tuple(successes))


@dataclass(frozen=True)
class RandomStream:
    """Identifies an independent random stream.

    The 64-bit state is derived by numpy's ``SeedSequence``, which hashes the
    master seed together with the spawn key ``(run_index, purpose)``.
    Distinct identifiers give statistically independent PCG64 streams;
    identical ones reproduce the same sequence.
    """

    master_seed: int
    run_index: int
    purpose: int

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.run_index, self.purpose)
        )
        return np.random.Generator(np.random.PCG64(seq))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 64-bit seed derived from ``master_seed`` and a spawn key."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def pull(instance: ProblemInstance, arm: int, rng: np.random.Generator) -> int:
    """Bernoulli reward for ``arm``; consumes exactly one uniform from ``rng``."""
    if not 0 <= arm < instance.n_arms:
        raise DomainError(f"arm {arm} out of range for {instance.n_arms} arms")
    return int(rng.random() < instance.means[arm])


@dataclass(frozen=True)
class StepRecord:
    t: int
    chosen_arm: int
    reward: int
    instant_pseudo_regret: float


def cumulative_pseudo_regret(instance: ProblemInstance, chosen: Sequence[int]) -> np.ndarray:
    gaps = np.asarray(instance.gaps)
    return np.cumsum(gaps[np.asarray(chosen, dtype=np.int64)])
