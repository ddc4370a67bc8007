"""Reference policies: a memoryless sequential scanner and the perfect-CSI genie."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bandit import top_k
from .codebook import (
    Codebook,
    MeasurementConfig,
    arm_to_pair,
    beam_gain,
    estimated_rate,
    measure_arm,
    pilot_power,
    MeasurementRecord,
    stream_rates,
    virtual_channel,
)


@dataclass
class SequentialScanState:
    num_arms: int
    cursor: int = 0
    held_arms: list[int] = field(default_factory=list)


def scan_candidates(state: SequentialScanState, num_measure: int) -> list[int]:
    """Held arms first, then fresh arms in row-major order from the cursor.

    Advances the cursor past every arm it consumes, duplicates included.
    """
    picks = list(state.held_arms)
    while len(picks) < num_measure:
        a = state.cursor
        state.cursor = (state.cursor + 1) % state.num_arms
        if a not in picks:
            picks.append(a)
    return picks


def sequential_step(state: SequentialScanState, num_measure: int, num_streams: int, snapshot,
                    measurement_cfg: MeasurementConfig, rng: np.random.Generator, *,
                    tx_cb: Codebook, rx_cb: Codebook, pilot_noise=None):
    if not num_measure > num_streams:
        raise ValueError("sequential search needs num_measure > num_streams")
    h = snapshot.h_matrix
    g_m = scan_candidates(state, num_measure)
    records = []
    for m, a in enumerate(g_m):
        if pilot_noise is None:
            records.append(measure_arm(h, a, measurement_cfg, rng, tx_cb=tx_cb, rx_cb=rx_cb))
        else:
            y = pilot_power(abs(beam_gain(h, a, tx_cb, rx_cb)), pilot_noise[0][m],
                            pilot_noise[1][m], measurement_cfg)
            records.append(MeasurementRecord(a, arm_to_pair(a, tx_cb.num_beams), y,
                                             estimated_rate(y, measurement_cfg)))
    y = [r.measured_power_w for r in records]
    g_d = [g_m[i] for i in top_k(y, g_m, num_streams)]
    gains_sq = [abs(beam_gain(h, a, tx_cb, rx_cb)) ** 2 for a in g_d]
    state.held_arms = list(g_d)
    return g_m, g_d, stream_rates(gains_sq, measurement_cfg, num_streams)


def genie_rates(snapshot, max_streams: int, measurement_cfg: MeasurementConfig, *,
                tx_cb: Codebook, rx_cb: Codebook):
    """Best noiseless sum rate over ``1..max_streams`` streams on the strongest beam pairs.

    Returns ``(arms, rates)`` for the winning stream count.
    """
    hv = virtual_channel(snapshot.h_matrix, tx_cb, rx_cb)
    power = np.abs(hv.ravel()) ** 2
    order = np.argsort(-power, kind="stable")[:max_streams]
    n_beams = tx_cb.num_beams * rx_cb.num_beams
    best, best_k = -1.0, 1
    for k in range(1, max_streams + 1):
        total = float(stream_rates(n_beams * power[order[:k]], measurement_cfg, k).sum())
        if total > best:
            best, best_k = total, k
    arms = [int(a) for a in order[:best_k]]
    return arms, stream_rates(n_beams * power[order[:best_k]], measurement_cfg, best_k)
