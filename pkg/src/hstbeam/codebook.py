"""DFT beam codebooks, the virtual channel matrix and the pilot measurement model.

Arms index beam pairs row-major over the virtual channel: ``arm = q * N_t + p``
with ``p`` the transmit beam and ``q`` the receive beam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .channel import ArrayGeometry, grid_angles, grid_directions, steering_vector


@dataclass(frozen=True)
class Codebook:
    side: Literal["transmit", "receive"]
    geometry: ArrayGeometry
    # column n is the steering vector of beam n, so matrix @ matrix^H = I
    matrix: np.ndarray = field(repr=False)
    grid_angles: np.ndarray = field(repr=False)

    @classmethod
    def dft(cls, geometry: ArrayGeometry, side="transmit") -> "Codebook":
        angles = grid_angles(geometry)
        mat = np.column_stack([steering_vector(geometry, a) for a in angles])
        return cls(side, geometry, mat, grid_directions(geometry.num_elements))

    @property
    def num_beams(self) -> int:
        return self.matrix.shape[1]

    def beam(self, index: int) -> np.ndarray:
        return self.matrix[:, index]


@dataclass(frozen=True)
class MeasurementConfig:
    tx_power_w: float
    noise_power_w: float
    pilot_length: int = 16
    tti_s: float = 0.25e-3
    pilot_fraction: float = 0.2

    def __post_init__(self):
        if not (self.tx_power_w > 0 and self.noise_power_w > 0 and self.tti_s > 0):
            raise ValueError("powers and TTI must be positive")
        if self.pilot_length < 1:
            raise ValueError("pilot_length must be >= 1")
        if not 0 < self.pilot_fraction < 1:
            raise ValueError("pilot_fraction must lie in (0, 1)")

    def data_fraction(self, num_measure: int, num_arms: int) -> float:
        """Share of the TTI left for data after ``num_measure`` pilot measurements.

        A sweep of all ``num_arms`` beam pairs would use the whole pilot budget.
        """
        return 1.0 - self.pilot_fraction * num_measure / num_arms


@dataclass(frozen=True)
class MeasurementRecord:
    arm_id: int
    beam_pair: tuple[int, int]
    measured_power_w: float
    est_rate_bps_hz: float


def arm_to_pair(arm_id: int, n_t: int) -> tuple[int, int]:
    """``(tx_index p, rx_index q)`` of an arm."""
    q, p = divmod(int(arm_id), n_t)
    return p, q


def pair_to_arm(p: int, q: int, n_t: int) -> int:
    return q * n_t + p


def virtual_channel(h: np.ndarray, tx_cb: Codebook, rx_cb: Codebook) -> np.ndarray:
    nr, nt = h.shape
    if nt != tx_cb.num_beams or nr != rx_cb.num_beams:
        raise ValueError(
            f"channel is {nr}x{nt} but codebooks are {rx_cb.num_beams} (rx) x {tx_cb.num_beams} (tx)"
        )
    return rx_cb.matrix.conj().T @ h @ tx_cb.matrix / math.sqrt(nt * nr)


def beam_gain(h: np.ndarray, arm_id: int, tx_cb: Codebook, rx_cb: Codebook) -> complex:
    """Effective scalar channel ``w_q^H H f_p`` of one beam pair."""
    p, q = arm_to_pair(arm_id, tx_cb.num_beams)
    return complex(rx_cb.beam(q).conj() @ h @ tx_cb.beam(p))


def draw_pilot_noise(rng: np.random.Generator, pilot_length: int, size=None):
    """Noise terms for :func:`pilot_power`, in units of the noise power.

    Returns the projection of the pilot-window noise onto the pilot sequence
    (complex, unit variance) and the energy left in the orthogonal complement
    (Gamma with shape ``pilot_length - 1``).
    """
    u = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2)
    g = rng.gamma(pilot_length - 1, 1.0, size) if pilot_length > 1 else np.zeros(size or ())
    return u, g


def pilot_power(gain_abs: float, u: complex, g: float, cfg: MeasurementConfig) -> float:
    """Mean received pilot power over ``pilot_length`` samples.

    With a constant-modulus pilot the sample sum splits into the component
    along the pilot, ``|sqrt(Np P) |w^H H f| + sigma u|^2``, and ``sigma^2 g``
    from the orthogonal noise.
    """
    sigma = math.sqrt(cfg.noise_power_w)
    n_p = cfg.pilot_length
    along = math.sqrt(n_p * cfg.tx_power_w) * gain_abs + sigma * u
    return (along.real ** 2 + along.imag ** 2 + cfg.noise_power_w * g) / n_p


def estimated_rate(measured_power_w: float, cfg: MeasurementConfig, num_streams: int = 1) -> float:
    snr = max(0.0, measured_power_w - cfg.noise_power_w) / cfg.noise_power_w
    return math.log2(1.0 + snr / num_streams)


def measure_arm(h: np.ndarray, arm_id: int, cfg: MeasurementConfig,
                rng: np.random.Generator, *, tx_cb: Codebook, rx_cb: Codebook) -> MeasurementRecord:
    n_arms = tx_cb.num_beams * rx_cb.num_beams
    if not 0 <= arm_id < n_arms:
        raise ValueError(f"arm_id {arm_id} outside [0, {n_arms})")
    gain = beam_gain(h, arm_id, tx_cb, rx_cb)
    u, g = draw_pilot_noise(rng, cfg.pilot_length)
    y = pilot_power(abs(gain), complex(u), float(g), cfg)
    return MeasurementRecord(arm_id, arm_to_pair(arm_id, tx_cb.num_beams), y, estimated_rate(y, cfg))


def stream_rates(gains_sq: Sequence[float], cfg: MeasurementConfig, num_streams: int) -> np.ndarray:
    """Per-stream spectral efficiency with the power split evenly over ``num_streams``."""
    g = np.asarray(gains_sq, dtype=float)
    return np.log2(1.0 + cfg.tx_power_w / num_streams * g / cfg.noise_power_w)


def transmit_rates(h: np.ndarray, chosen_arms: Iterable[int], cfg: MeasurementConfig, *,
                   tx_cb: Codebook, rx_cb: Codebook) -> np.ndarray:
    arms = list(chosen_arms)
    if len(set(arms)) != len(arms):
        raise ValueError(f"duplicate arms in {arms}")
    gains_sq = [abs(beam_gain(h, a, tx_cb, rx_cb)) ** 2 for a in arms]
    return stream_rates(gains_sq, cfg, len(arms))
