"""UCB beam searching: score arms, measure the top ``M``, transmit on the best ``D``.

Bandit state is kept per location bin so that each table sees approximately
stationary arm rewards; tables persist across traverses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .codebook import (
    Codebook,
    MeasurementConfig,
    MeasurementRecord,
    arm_to_pair,
    beam_gain,
    estimated_rate,
    measure_arm,
    pilot_power,
    stream_rates,
)


@dataclass
class BanditTable:
    num_arms: int
    pull_counts: np.ndarray = field(default=None, repr=False)
    mean_rewards: np.ndarray = field(default=None, repr=False)
    clock: int = 0

    def __post_init__(self):
        if self.pull_counts is None:
            self.pull_counts = np.zeros(self.num_arms, dtype=np.int64)
        if self.mean_rewards is None:
            self.mean_rewards = np.zeros(self.num_arms)


@dataclass(frozen=True)
class PolicyConfig:
    exploration_c: float = 1.0
    num_measure: int = 6
    num_streams: int = 3
    reward_ref_rate: float = 1.0
    # also credit measured-but-unused arms with their pilot-estimated rate
    update_measured: bool = False

    def __post_init__(self):
        if self.exploration_c < 0:
            raise ValueError("exploration_c must be non-negative")
        if not 1 <= self.num_streams < self.num_measure:
            raise ValueError(
                f"need 1 <= num_streams < num_measure, got D={self.num_streams}, M={self.num_measure}"
            )
        if not self.reward_ref_rate > 0:
            raise ValueError("reward_ref_rate must be positive")

    def check_arms(self, num_arms: int):
        if self.num_measure > num_arms:
            raise ValueError(f"num_measure={self.num_measure} exceeds {num_arms} arms")


def bin_index(timeslot: int, bin_len_slots: int) -> int:
    if bin_len_slots < 1:
        raise ValueError("bin_len_slots must be >= 1")
    return timeslot // bin_len_slots


def ucb_scores(table: BanditTable, cfg: PolicyConfig) -> np.ndarray:
    """``mu + c sqrt(ln t / n)``; never-pulled arms score ``+inf``."""
    n = table.pull_counts
    scores = np.full(table.num_arms, np.inf)
    pulled = n > 0
    if pulled.any():
        if table.clock < 1:
            raise ValueError("clock must be >= 1 once an arm has been pulled")
        bonus = cfg.exploration_c * np.sqrt(math.log(table.clock) / n[pulled])
        scores[pulled] = table.mean_rewards[pulled] + bonus
    return scores


def top_k(values: Sequence[float], ids: Sequence[int], k: int) -> list[int]:
    """Positions of the ``k`` largest values, best first, ties to the lower id."""
    return sorted(range(len(ids)), key=lambda i: (-values[i], ids[i]))[:k]


def select_arms(table: BanditTable, cfg: PolicyConfig) -> np.ndarray:
    cfg.check_arms(table.num_arms)
    scores = ucb_scores(table, cfg)
    return np.argsort(-scores, kind="stable")[: cfg.num_measure]


def select_streams(measurements: Sequence[MeasurementRecord], cfg: PolicyConfig) -> list[int]:
    """Arm ids of the ``D`` strongest measured pilots."""
    if len(measurements) != cfg.num_measure:
        raise ValueError(f"expected {cfg.num_measure} measurements, got {len(measurements)}")
    y = [r.measured_power_w for r in measurements]
    ids = [r.arm_id for r in measurements]
    return [ids[i] for i in top_k(y, ids, cfg.num_streams)]


def update(table: BanditTable, rewards: Mapping[int, float]) -> None:
    """Fold one reward per arm into the running means.

    The clock is not touched here; :func:`run_timeslot` advances it once per
    slot before scoring.
    """
    for arm, x in rewards.items():
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"reward {x} for arm {arm} outside [0, 1]")
    for arm, x in rewards.items():
        n = table.pull_counts[arm]
        table.mean_rewards[arm] = (x + table.mean_rewards[arm] * n) / (n + 1)
        table.pull_counts[arm] = n + 1


def normalized_reward(rate: float, cfg: PolicyConfig) -> float:
    return min(1.0, rate / cfg.reward_ref_rate)


def run_timeslot(table: BanditTable, cfg: PolicyConfig, snapshot, measurement_cfg: MeasurementConfig,
                 rng: np.random.Generator, *, tx_cb: Codebook, rx_cb: Codebook,
                 pilot_noise=None):
    """One TTI of the beam search on ``table``.

    ``pilot_noise`` optionally supplies the ``(u, g)`` noise terms for the
    ``M`` measurements instead of drawing them from ``rng``.

    Returns ``(G_M, G_D, rates, rewards)`` with ``rates`` aligned to ``G_D``.
    """
    h = snapshot.h_matrix
    table.clock += 1
    g_m = select_arms(table, cfg)
    if pilot_noise is None:
        records = [measure_arm(h, int(a), measurement_cfg, rng, tx_cb=tx_cb, rx_cb=rx_cb) for a in g_m]
    else:
        u, g = pilot_noise
        records = []
        for m, a in enumerate(g_m):
            y = pilot_power(abs(beam_gain(h, int(a), tx_cb, rx_cb)), u[m], g[m], measurement_cfg)
            records.append(MeasurementRecord(int(a), arm_to_pair(a, tx_cb.num_beams), y,
                                             estimated_rate(y, measurement_cfg)))
    g_d = select_streams(records, cfg)
    gains_sq = [abs(beam_gain(h, a, tx_cb, rx_cb)) ** 2 for a in g_d]
    rates = stream_rates(gains_sq, measurement_cfg, cfg.num_streams)
    rewards = {a: normalized_reward(r, cfg) for a, r in zip(g_d, rates)}
    if cfg.update_measured:
        extra = {r.arm_id: normalized_reward(
                     estimated_rate(r.measured_power_w, measurement_cfg, cfg.num_streams), cfg)
                 for r in records if r.arm_id not in rewards}
        update(table, extra)
    update(table, rewards)
    return [int(a) for a in g_m], g_d, rates, rewards


def export_tables_csv(tables: Sequence[BanditTable], path, n_t: int) -> None:
    """One row per (bin, arm): pull count and mean reward."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "arm_id", "tx_index", "rx_index", "pull_count", "mean_reward"])
        for b, table in enumerate(tables):
            for arm in range(table.num_arms):
                p, q = arm_to_pair(arm, n_t)
                writer.writerow([b, arm, p, q, int(table.pull_counts[arm]),
                                 f"{table.mean_rewards[arm]:.9f}"])
