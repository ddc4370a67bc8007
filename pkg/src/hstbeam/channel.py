"""Sparse mmWave backhaul channel between a trackside mRRH and a train roof terminal.

Coordinates: the track runs along ``x`` at ``y = 0``; the serving mast sits at
``(0, track_offset_m)`` and the train crosses the coverage from
``-mrrh_spacing_m / 2`` to ``+mrrh_spacing_m / 2``.  Reflectors live on a
building line at ``y = -building_offset_m``.  Both ULAs have their axis across
the track, so angles are measured from the along-track broadside direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

C_LIGHT = 299_792_458.0
LOS_DEATH = math.inf


@dataclass(frozen=True)
class ArrayGeometry:
    num_elements: int
    carrier_wavelength: float
    element_spacing: float | None = None

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError(f"num_elements must be >= 1, got {self.num_elements}")
        if not self.carrier_wavelength > 0:
            raise ValueError("carrier_wavelength must be positive")
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.carrier_wavelength / 2)
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")


@dataclass(frozen=True)
class PathState:
    path_id: int
    is_los: bool
    complex_gain: complex
    aod: float
    aoa: float
    doppler_hz: float
    birth_window: int
    death_window: float
    # (x, y) of the scattering point; None for the LoS path
    reflector: tuple[float, float] | None = None
    reflection_phase: float = 0.0


@dataclass(frozen=True)
class PathDynamicsConfig:
    """Birth/death process of the NLoS paths.

    ``birth_prob`` is indexed by the number of live paths (LoS included) at the
    start of the window, so ``birth_prob[0]`` applies when only the LoS path is
    alive.  A scalar applies to every count.  No birth happens once
    ``max_paths`` paths are alive.
    """

    wss_window_s: float = 0.025
    birth_prob: float | tuple[float, ...] = (0.205, 0.202, 0.092, 0.018)
    max_paths: int = 5
    lifetime_mean_s: float = 0.25
    lifetime_std_s: float = 0.12
    lifetime_min_s: float = 0.025
    lifetime_max_s: float = 3.0
    nlos_extra_loss_db: float = 15.0
    warmup_windows: int = 60

    def __post_init__(self):
        if isinstance(self.birth_prob, (list, np.ndarray)):
            object.__setattr__(self, "birth_prob", tuple(float(p) for p in self.birth_prob))
        probs = self.birth_prob if isinstance(self.birth_prob, tuple) else (self.birth_prob,)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError(f"birth probabilities must lie in [0, 1], got {self.birth_prob}")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")
        if not 0 < self.lifetime_min_s <= self.lifetime_max_s:
            raise ValueError("need 0 < lifetime_min_s <= lifetime_max_s")
        if not self.lifetime_min_s <= self.lifetime_mean_s <= self.lifetime_max_s:
            raise ValueError("lifetime_mean_s must lie within the truncation bounds")
        if not self.lifetime_std_s > 0:
            raise ValueError("lifetime_std_s must be positive")
        if not self.wss_window_s > 0:
            raise ValueError("wss_window_s must be positive")

    def window_slots(self, tti_s: float) -> int:
        ratio = self.wss_window_s / tti_s
        slots = round(ratio)
        if slots < 1 or abs(ratio - slots) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"wss_window_s={self.wss_window_s} is not an integer multiple of tti_s={tti_s}"
            )
        return slots

    def birth_probability(self, live_count: int) -> float:
        if live_count >= self.max_paths:
            return 0.0
        if isinstance(self.birth_prob, tuple):
            idx = min(live_count - 1, len(self.birth_prob) - 1)
            return self.birth_prob[max(idx, 0)]
        return self.birth_prob

    def sample_lifetime(self, rng: np.random.Generator, size=None):
        lo = (self.lifetime_min_s - self.lifetime_mean_s) / self.lifetime_std_s
        hi = (self.lifetime_max_s - self.lifetime_mean_s) / self.lifetime_std_s
        return truncnorm.rvs(
            lo, hi, loc=self.lifetime_mean_s, scale=self.lifetime_std_s,
            size=size, random_state=rng,
        )


@dataclass(frozen=True)
class Site:
    """Physical layout of one mRRH coverage section."""

    mrrh_spacing_m: float = 500.0
    track_offset_m: float = 5.0
    building_offset_m: float = 15.0
    carrier_hz: float = 28e9
    train_speed_mps: float = 100.0
    tti_s: float = 0.25e-3
    slots_per_traverse: int = 20000
    tx_antenna_gain_dbi: float = 25.0
    rx_antenna_gain_dbi: float = 12.0

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.carrier_hz

    @property
    def start_x(self) -> float:
        return -self.mrrh_spacing_m / 2

    def train_x(self, timeslot) -> float:
        return self.start_x + self.train_speed_mps * timeslot * self.tti_s


@dataclass(frozen=True)
class ChannelSnapshot:
    timeslot: int
    live_paths: tuple[PathState, ...]
    h_matrix: np.ndarray = field(repr=False)


def steering_vector(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """Unit-norm ULA response ``exp(j k 2pi d sin(angle) / lambda) / sqrt(N)``."""
    if not np.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    k = np.arange(geom.num_elements)
    phase = 2 * np.pi * geom.element_spacing / geom.carrier_wavelength * math.sin(angle)
    return np.exp(1j * k * phase) / math.sqrt(geom.num_elements)


def grid_directions(num_beams: int) -> np.ndarray:
    """Normalized spatial directions ``(n - (N + 1) / 2) / N`` for ``n = 1..N``."""
    n = np.arange(1, num_beams + 1)
    return (n - (num_beams + 1) / 2) / num_beams


def grid_angles(geom: ArrayGeometry) -> np.ndarray:
    """Physical steering angles of the DFT beams of ``geom``.

    The normalized direction is ``d sin(angle) / lambda``, which keeps adjacent
    beams a full DFT bin apart for any element spacing.
    """
    sines = grid_directions(geom.num_elements) * geom.carrier_wavelength / geom.element_spacing
    if np.any(np.abs(sines) > 1):
        raise ValueError("element spacing too wide: DFT grid leaves the visible region")
    return np.arcsin(sines)


def snap_to_grid(angle: float, geom: ArrayGeometry) -> float:
    """Nearest DFT beam direction, compared in sine space."""
    sines = np.sin(grid_angles(geom))
    return float(np.arcsin(sines[np.argmin(np.abs(sines - math.sin(angle)))]))


def _ula_angle(lateral: float, distance: float) -> float:
    # arcsin keeps the result in [-pi/2, pi/2]; -pi/2 aliases to +pi/2 on a ULA
    angle = math.asin(max(-1.0, min(1.0, lateral / distance)))
    return math.pi / 2 if angle <= -math.pi / 2 else angle


def pathloss_db(distance_m: float) -> float:
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return 61.4 + 34.0 * math.log10(distance_m)


def _gain_magnitude(site: Site, distance_m: float, extra_loss_db: float = 0.0) -> float:
    budget_db = (site.tx_antenna_gain_dbi + site.rx_antenna_gain_dbi
                 - pathloss_db(distance_m) - extra_loss_db)
    return 10 ** (budget_db / 20)


def geometry_update(site: Site, timeslot: int) -> tuple[float, float, float, float]:
    """LoS ``(aod, aoa, distance_m, doppler_hz)`` at a timeslot of the traverse."""
    if not 0 <= timeslot <= site.slots_per_traverse:
        raise ValueError(
            f"timeslot {timeslot} outside traverse horizon [0, {site.slots_per_traverse}]"
        )
    dx = -site.train_x(timeslot)  # mast minus train, positive while approaching
    h = site.track_offset_m
    dist = math.hypot(dx, h)
    aod = _ula_angle(-h, dist)
    aoa = _ula_angle(h, dist)
    doppler = site.train_speed_mps / site.wavelength * dx / dist
    return aod, aoa, dist, doppler


def los_path(site: Site, timeslot: int) -> PathState:
    aod, aoa, dist, doppler = geometry_update(site, timeslot)
    gain = _gain_magnitude(site, dist) * np.exp(-2j * np.pi * dist / site.wavelength)
    return PathState(0, True, complex(gain), aod, aoa, doppler, 0, LOS_DEATH)


def resolve_path(path: PathState, site: Site, timeslot: int,
                 extra_loss_db: float) -> PathState:
    """Re-evaluate angles, Doppler and gain of a path for the train position at ``timeslot``."""
    if path.is_los:
        fresh = los_path(site, timeslot)
        return replace(path, complex_gain=fresh.complex_gain, aod=fresh.aod,
                       aoa=fresh.aoa, doppler_hz=fresh.doppler_hz)
    xr, yr = path.reflector
    x = site.train_x(timeslot)
    h = site.track_offset_m
    d1 = math.hypot(xr, yr - h)
    d2 = math.hypot(xr - x, yr)
    total = d1 + d2
    gain = _gain_magnitude(site, total, extra_loss_db) * np.exp(
        1j * (path.reflection_phase - 2 * np.pi * total / site.wavelength))
    return replace(
        path,
        complex_gain=complex(gain),
        aod=_ula_angle(yr - h, d1),
        aoa=_ula_angle(yr, d2),
        doppler_hz=site.train_speed_mps / site.wavelength * (xr - x) / d2,
    )


def evolve_paths(dynamics: PathDynamicsConfig, prev_paths: Sequence[PathState],
                 window_index: int, rng: np.random.Generator, *, site: Site,
                 next_id: int | None = None) -> tuple[PathState, ...]:
    """Advance the path population to ``window_index``.

    Paths whose ``death_window`` has been reached are dropped, then at most one
    NLoS path is born.  Negative window indices are allowed for warm-up.
    """
    if not any(p.is_los for p in prev_paths):
        raise ValueError("prev_paths must contain the LoS path")
    live = [p for p in prev_paths if p.is_los or p.death_window > window_index]
    # draw unconditionally so the random stream does not depend on the count
    u = rng.random()
    if u < dynamics.birth_probability(len(live)):
        if next_id is None:
            next_id = max(p.path_id for p in prev_paths) + 1
        lifetime = float(dynamics.sample_lifetime(rng))
        span = max(1, math.ceil(lifetime / dynamics.wss_window_s - 1e-9))
        xr = rng.uniform(site.start_x, -site.start_x)
        newborn = PathState(
            path_id=next_id, is_los=False, complex_gain=0j, aod=0.0, aoa=0.0,
            doppler_hz=0.0, birth_window=window_index,
            death_window=window_index + span,
            reflector=(float(xr), -site.building_offset_m),
            reflection_phase=float(rng.uniform(0, 2 * np.pi)),
        )
        slot = max(window_index, 0) * dynamics.window_slots(site.tti_s)
        slot = min(slot, site.slots_per_traverse)
        live.append(resolve_path(newborn, site, slot, dynamics.nlos_extra_loss_db))
    return tuple(live)


def build_channel(paths: Sequence[PathState], tx_geom: ArrayGeometry,
                  rx_geom: ArrayGeometry, time_s: float) -> np.ndarray:
    """Physical channel matrix ``H`` (N_r x N_t) summed over ``paths``."""
    nt, nr = tx_geom.num_elements, rx_geom.num_elements
    h = np.zeros((nr, nt), dtype=complex)
    for p in paths:
        ar = steering_vector(rx_geom, p.aoa)
        at = steering_vector(tx_geom, p.aod)
        h += p.complex_gain * np.exp(2j * np.pi * p.doppler_hz * time_s) * np.outer(ar, at.conj())
    return math.sqrt(nt * nr) * h


@dataclass
class ChannelSchedule:
    """One realization of the path population over a traverse, resolved per WSS window.

    ``windows[w]`` holds the live paths with geometry evaluated at the first
    slot of window ``w``.  The packed arrays give, per window and path, the
    projections of the steering vectors onto the DFT codebooks, so the
    virtual channel at any slot is a sum of rank-one terms.
    """

    site: Site
    dynamics: PathDynamicsConfig
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    windows: list[tuple[PathState, ...]]
    window_slots: int
    on_grid: bool = True
    tx_resp: np.ndarray = field(default=None, repr=False)
    rx_resp: np.ndarray = field(default=None, repr=False)
    coef: np.ndarray = field(default=None, repr=False)
    doppler: np.ndarray = field(default=None, repr=False)
    num_paths: np.ndarray = field(default=None, repr=False)

    @classmethod
    def generate(cls, site: Site, dynamics: PathDynamicsConfig, tx_cb, rx_cb,
                 rng: np.random.Generator, on_grid: bool = True) -> "ChannelSchedule":
        wslots = dynamics.window_slots(site.tti_s)
        n_windows = math.ceil(site.slots_per_traverse / wslots)
        paths: tuple[PathState, ...] = (los_path(site, 0),)
        next_id = 1
        windows = []
        for w in range(-dynamics.warmup_windows, n_windows):
            paths = evolve_paths(dynamics, paths, w, rng, site=site, next_id=next_id)
            if paths[-1].path_id == next_id:
                next_id += 1
            if w < 0:
                continue
            slot = w * wslots
            resolved = tuple(resolve_path(p, site, slot, dynamics.nlos_extra_loss_db)
                             for p in paths)
            if on_grid:
                resolved = tuple(
                    replace(p, aod=snap_to_grid(p.aod, tx_cb.geometry),
                            aoa=snap_to_grid(p.aoa, rx_cb.geometry))
                    for p in resolved)
            windows.append(resolved)
        sched = cls(site, dynamics, tx_cb.geometry, rx_cb.geometry, windows, wslots, on_grid)
        sched._pack(tx_cb, rx_cb)
        return sched

    def _pack(self, tx_cb, rx_cb):
        n_w = len(self.windows)
        lmax = max(len(w) for w in self.windows)
        nt, nr = self.tx_geom.num_elements, self.rx_geom.num_elements
        self.tx_resp = np.zeros((n_w, lmax, nt), dtype=complex)
        self.rx_resp = np.zeros((n_w, lmax, nr), dtype=complex)
        self.coef = np.zeros((n_w, lmax), dtype=complex)
        self.doppler = np.zeros((n_w, lmax))
        self.num_paths = np.zeros(n_w, dtype=np.int64)
        for w, paths in enumerate(self.windows):
            self.num_paths[w] = len(paths)
            for l, p in enumerate(paths):
                # H_V[q, p] = sum_l coef * e^{j2pi nu t} * rx_resp[q] * tx_resp[p]
                self.rx_resp[w, l] = rx_cb.matrix.conj().T @ steering_vector(self.rx_geom, p.aoa)
                self.tx_resp[w, l] = steering_vector(self.tx_geom, p.aod).conj() @ tx_cb.matrix
                self.coef[w, l] = p.complex_gain
                self.doppler[w, l] = p.doppler_hz
        if self.on_grid:
            # exact zeros off the matched beam; float noise would otherwise leak
            for arr in (self.tx_resp, self.rx_resp):
                small = np.abs(arr) < 1e-9
                arr[small] = 0
                big = ~small & (np.abs(np.abs(arr) - 1) < 1e-9)
                arr[big] = arr[big] / np.abs(arr[big])

    @property
    def num_slots(self) -> int:
        return self.site.slots_per_traverse

    def window_of(self, slot: int) -> int:
        return slot // self.window_slots

    def paths_at(self, slot: int) -> tuple[PathState, ...]:
        return self.windows[self.window_of(slot)]

    def path_counts(self) -> np.ndarray:
        """Live-path count for every slot of the traverse."""
        return np.repeat(self.num_paths, self.window_slots)[: self.num_slots]

    def virtual_channel_at(self, slot: int) -> np.ndarray:
        w = self.window_of(slot)
        n = self.num_paths[w]
        t = slot * self.site.tti_s
        c = self.coef[w, :n] * np.exp(2j * np.pi * self.doppler[w, :n] * t)
        return np.einsum("l,lq,lp->qp", c, self.rx_resp[w, :n], self.tx_resp[w, :n])

    def snapshot(self, slot: int) -> ChannelSnapshot:
        paths = self.paths_at(slot)
        h = build_channel(paths, self.tx_geom, self.rx_geom, slot * self.site.tti_s)
        return ChannelSnapshot(slot, paths, h)
