"""Regret accounting, the UCB pull-count and regret bounds, and a synthetic testbed.

Two notions of regret live here. :class:`RegretTrace` compares a policy
against a per-timeslot genie (used by the train simulation, where the best
beams change every slot). :func:`stationary_regret` is the classical form for
a fixed set of arms, where the reference is the top-``D`` arms by mean.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.stats import truncnorm

from . import kernels

PI2_OVER_3 = math.pi ** 2 / 3


@dataclass
class RegretTrace:
    per_slot_policy_rate: np.ndarray
    per_slot_genie_rate: np.ndarray
    cumulative_regret: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.per_slot_policy_rate = np.asarray(self.per_slot_policy_rate, dtype=float)
        self.per_slot_genie_rate = np.asarray(self.per_slot_genie_rate, dtype=float)
        if self.per_slot_policy_rate.shape != self.per_slot_genie_rate.shape:
            raise ValueError("policy and genie rate sequences must have equal length")
        if self.cumulative_regret is None:
            self.cumulative_regret = cumulative_regret(self)


def cumulative_regret(trace: RegretTrace) -> np.ndarray:
    """Running sum of ``genie - policy``."""
    return np.cumsum(trace.per_slot_genie_rate - trace.per_slot_policy_rate)


def _best_set(arm_means: Sequence[float], num_streams: int) -> np.ndarray:
    means = np.asarray(arm_means, dtype=float)
    return np.argsort(-means, kind="stable")[:num_streams]


def stationary_regret(arm_means: Sequence[float], chosen_arms: np.ndarray, num_streams: int) -> np.ndarray:
    """Cumulative pseudo-regret against the fixed top-``D`` arms.

    ``chosen_arms`` is ``(T, D)``; slot ``t`` pays the means of its arms.
    """
    means = np.asarray(arm_means, dtype=float)
    best = means[_best_set(means, num_streams)].sum()
    return np.cumsum(best - means[np.asarray(chosen_arms)].sum(axis=1))


def lemma1_bound(c: float, delta_min: float, n: float) -> float:
    """Upper bound on the expected number of times a suboptimal arm is chosen."""
    if not delta_min > 0:
        raise ValueError("delta_min must be positive (equal means make the bound undefined)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return 4.0 * c * c * math.log(n) / delta_min ** 2 + 1.0 + PI2_OVER_3


def arm_gaps(arm_means: Sequence[float], num_streams: int) -> dict[int, tuple[float, float]]:
    """``{arm: (delta_min, delta_max)}`` for every arm outside the best ``D``.

    Gaps are taken against each member of the best set.
    """
    means = np.asarray(arm_means, dtype=float)
    best = _best_set(means, num_streams)
    out = {}
    for i in range(len(means)):
        if i in best:
            continue
        gaps = np.abs(means[best] - means[i])
        out[i] = (float(gaps.min()), float(gaps.max()))
    return out


NoiseFamily = Literal["bernoulli", "truncated-gaussian", "deterministic"]


@dataclass(frozen=True)
class SyntheticBanditSpec:
    arm_means: tuple[float, ...]
    arm_noise: NoiseFamily = "bernoulli"
    num_measure: int = 2
    num_streams: int = 1
    exploration_c: float = 1.0
    horizon: int = 10_000
    num_seeds: int = 200
    # std of the truncated-gaussian reward noise before truncation
    noise_std: float = 0.1
    # std of the pilot measurement noise used to rank measured arms
    measurement_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "arm_means", tuple(float(m) for m in self.arm_means))
        m = self.arm_means
        if any(not 0.0 <= x <= 1.0 for x in m):
            raise ValueError("arm means must lie in [0, 1]")
        if len(set(m)) != len(m):
            raise ValueError("arm means must be distinct")
        if self.arm_noise not in ("bernoulli", "truncated-gaussian", "deterministic"):
            raise ValueError(f"unknown noise family {self.arm_noise!r}")
        if not 1 <= self.num_streams < self.num_measure <= len(m):
            raise ValueError("need 1 <= D < M <= number of arms")
        if self.horizon < 1 or self.num_seeds < 1:
            raise ValueError("horizon and num_seeds must be >= 1")

    @property
    def num_arms(self) -> int:
        return len(self.arm_means)


def theorem1_bound(spec: SyntheticBanditSpec, n: float) -> float:
    """Upper bound on the expected cumulative regret after ``n`` slots."""
    total = 0.0
    for d_min, d_max in arm_gaps(spec.arm_means, spec.num_streams).values():
        total += d_max * lemma1_bound(spec.exploration_c, d_min, n)
    return total


def draw_rewards(spec: SyntheticBanditSpec, rng: np.random.Generator) -> np.ndarray:
    """``(horizon, K)`` reward table; every draw has the arm's mean and lies in [0, 1]."""
    means = np.asarray(spec.arm_means)
    shape = (spec.horizon, spec.num_arms)
    if spec.arm_noise == "deterministic":
        return np.broadcast_to(means, shape).copy()
    if spec.arm_noise == "bernoulli":
        return (rng.random(shape) < means).astype(float)
    # symmetric truncation keeps the mean in place
    half = np.minimum(means, 1.0 - means)
    out = np.broadcast_to(means, shape).copy()
    for i, (mu, r) in enumerate(zip(means, half)):
        if r > 0 and spec.noise_std > 0:
            b = r / spec.noise_std
            out[:, i] = truncnorm.rvs(-b, b, loc=mu, scale=spec.noise_std,
                                      size=spec.horizon, random_state=rng)
    return out


def checkpoints(horizon: int, first_exponent: int = 6) -> list[int]:
    ks = []
    e = first_exponent
    while 2 ** e <= horizon:
        ks.append(2 ** e)
        e += 1
    return ks


@dataclass
class BoundReport:
    checkpoints: list[int]
    # rows are checkpoints, columns arms; optimal arms hold nan bounds
    empirical_pulls: np.ndarray
    empirical_regret: np.ndarray
    lemma1_bounds: np.ndarray
    theorem1_bounds: np.ndarray
    violations: list[tuple[int, str]]

    @property
    def pull_margins(self) -> np.ndarray:
        return self.lemma1_bounds - self.empirical_pulls

    @property
    def regret_margins(self) -> np.ndarray:
        return self.theorem1_bounds - self.empirical_regret

    def octave_increments(self) -> np.ndarray:
        """``regret(2T) - regret(T)`` between consecutive checkpoints."""
        return np.diff(self.empirical_regret)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["checkpoint_n", "arm_id", "mean_pulls", "lemma1_bound",
                             "mean_regret", "theorem1_bound"])
            for r, n in enumerate(self.checkpoints):
                for arm in range(self.empirical_pulls.shape[1]):
                    lb = self.lemma1_bounds[r, arm]
                    writer.writerow([n, arm, f"{self.empirical_pulls[r, arm]:.6f}",
                                     "" if np.isnan(lb) else f"{lb:.6f}",
                                     f"{self.empirical_regret[r]:.6f}",
                                     f"{self.theorem1_bounds[r]:.6f}"])


def run_synthetic(spec: SyntheticBanditSpec, seed_index: int, backend=None) -> np.ndarray:
    """Chosen arms ``(horizon, D)`` for one seed of the synthetic testbed."""
    kern = kernels.get_backend(backend)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, seed_index]))
    rewards = draw_rewards(spec, rng)
    measure = np.broadcast_to(np.asarray(spec.arm_means), rewards.shape).copy()
    if spec.measurement_noise > 0:
        measure += spec.measurement_noise * rng.standard_normal(measure.shape)
    out = np.empty((spec.horizon, spec.num_streams), dtype=np.int64)
    kern.synthetic_bandit(measure, rewards, spec.num_measure, spec.num_streams,
                          spec.exploration_c, out)
    return out


def verify_bounds(spec: SyntheticBanditSpec, backend=None) -> BoundReport:
    """Monte Carlo check of both bounds at power-of-two checkpoints.

    Violations are collected, never raised.
    """
    cps = checkpoints(spec.horizon)
    idx = np.asarray(cps) - 1
    k = spec.num_arms
    pulls = np.zeros((len(cps), k))
    regret = np.zeros(len(cps))
    for s in range(spec.num_seeds):
        arms = run_synthetic(spec, s, backend)
        hits = np.zeros((spec.horizon, k))
        np.add.at(hits, (np.arange(spec.horizon)[:, None], arms), 1.0)
        pulls += np.cumsum(hits, axis=0)[idx]
        regret += stationary_regret(spec.arm_means, arms, spec.num_streams)[idx]
    pulls /= spec.num_seeds
    regret /= spec.num_seeds

    gaps = arm_gaps(spec.arm_means, spec.num_streams)
    lemma = np.full((len(cps), k), np.nan)
    for arm, (d_min, _) in gaps.items():
        lemma[:, arm] = [lemma1_bound(spec.exploration_c, d_min, n) for n in cps]
    theorem = np.array([theorem1_bound(spec, n) for n in cps])

    violations = []
    for r, n in enumerate(cps):
        for arm in gaps:
            if pulls[r, arm] > lemma[r, arm]:
                violations.append((n, f"arm {arm}"))
        if regret[r] > theorem[r]:
            violations.append((n, "regret"))
    return BoundReport(cps, pulls, regret, lemma, theorem, violations)
