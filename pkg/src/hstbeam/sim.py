"""Traverse-level simulation: scenario config, policy runs, sweeps and CSV output.

A run draws one path schedule from the seed and replays it on every traverse
of the train through the mRRH coverage, so a learning policy can exploit the
recurrence.  Per-slot regret is measured against the perfect-CSI genie.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .bandit import BanditTable, export_tables_csv
from .channel import (
    ArrayGeometry,
    ChannelSchedule,
    PathDynamicsConfig,
    Site,
    _gain_magnitude,
)
from .codebook import Codebook, MeasurementConfig, draw_pilot_noise

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

POLICIES = ("bandit", "sequential", "genie")
SWEEP_AXES = ("M", "n_antennas", "num_traverses")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``errors`` maps field name to message."""

    def __init__(self, errors: dict[str, str]):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


class InvariantError(RuntimeError):
    """A simulation result broke one of its guaranteed properties."""


@dataclass(frozen=True)
class ScenarioConfig:
    # site and link budget
    mrrh_spacing_m: float = 500.0
    track_offset_m: float = 5.0
    building_offset_m: float = 15.0
    carrier_hz: float = 28e9
    tx_antenna_gain_dbi: float = 25.0
    rx_antenna_gain_dbi: float = 12.0
    tx_power_dbm: float = 33.0
    noise_power_dbm: float = -80.0
    train_speed_kmh: float = 360.0
    tti_s: float = 0.25e-3
    slots_per_traverse: int = 20000
    num_traverses: int = 3
    # arrays and policy
    n_t: int = 32
    n_r: int = 32
    M: int = 6
    D: int = 3
    seed: int = 0
    pilot_length: int = 16
    pilot_fraction: float = 0.2
    exploration_c: float = 0.02
    bin_len_slots: int = 100
    update_measured: bool = True
    # 0 selects the LoS link budget at the closest approach
    reward_ref_rate: float = 0.0
    # path dynamics
    wss_window_s: float = 0.025
    birth_prob: tuple[float, ...] = (0.205, 0.202, 0.092, 0.018)
    max_paths: int = 5
    lifetime_mean_s: float = 0.25
    lifetime_std_s: float = 0.12
    lifetime_min_s: float = 0.025
    lifetime_max_s: float = 3.0
    nlos_extra_loss_db: float = 15.0
    warmup_windows: int = 60
    on_grid: bool = True
    fresh_schedule: bool = False

    def __post_init__(self):
        if isinstance(self.birth_prob, (list, np.ndarray)):
            object.__setattr__(self, "birth_prob", tuple(float(p) for p in self.birth_prob))
        errors = self.validate()
        if errors:
            raise ConfigError(errors)

    def validate(self) -> dict[str, str]:
        errs: dict[str, str] = {}
        for name in ("mrrh_spacing_m", "track_offset_m", "building_offset_m", "carrier_hz",
                     "train_speed_kmh", "tti_s"):
            if not getattr(self, name) > 0:
                errs[name] = "must be positive"
        for name in ("slots_per_traverse", "num_traverses", "n_t", "n_r", "pilot_length",
                     "bin_len_slots", "max_paths"):
            if getattr(self, name) < 1:
                errs[name] = "must be >= 1"
        if not 1 <= self.D < self.M:
            errs["D"] = f"need 1 <= D < M, got D={self.D}, M={self.M}"
        if self.M > self.n_t * self.n_r:
            errs["M"] = f"exceeds the {self.n_t * self.n_r} beam pairs"
        if not 0 < self.pilot_fraction < 1:
            errs["pilot_fraction"] = "must lie in (0, 1)"
        if self.exploration_c < 0:
            errs["exploration_c"] = "must be non-negative"
        if self.reward_ref_rate < 0:
            errs["reward_ref_rate"] = "must be >= 0 (0 selects the automatic reference)"
        if "train_speed_kmh" not in errs and "tti_s" not in errs:
            covered = self.slots_per_traverse * self.tti_s * self.speed_mps
            if abs(covered - self.mrrh_spacing_m) > 1e-6 * self.mrrh_spacing_m:
                errs["slots_per_traverse"] = (
                    f"slots * tti * speed = {covered:g} m must equal mrrh_spacing_m "
                    f"= {self.mrrh_spacing_m:g} m")
        if not errs:
            try:
                self.dynamics().window_slots(self.tti_s)
            except ValueError as exc:
                errs["wss_window_s"] = str(exc)
        return errs

    @property
    def speed_mps(self) -> float:
        return self.train_speed_kmh / 3.6

    @property
    def tx_power_w(self) -> float:
        return 10 ** (self.tx_power_dbm / 10) / 1e3

    @property
    def noise_power_w(self) -> float:
        return 10 ** (self.noise_power_dbm / 10) / 1e3

    @property
    def num_arms(self) -> int:
        return self.n_t * self.n_r

    def site(self) -> Site:
        return Site(self.mrrh_spacing_m, self.track_offset_m, self.building_offset_m,
                    self.carrier_hz, self.speed_mps, self.tti_s, self.slots_per_traverse,
                    self.tx_antenna_gain_dbi, self.rx_antenna_gain_dbi)

    def dynamics(self) -> PathDynamicsConfig:
        try:
            return PathDynamicsConfig(
                self.wss_window_s, self.birth_prob, self.max_paths, self.lifetime_mean_s,
                self.lifetime_std_s, self.lifetime_min_s, self.lifetime_max_s,
                self.nlos_extra_loss_db, self.warmup_windows)
        except ValueError as exc:
            raise ConfigError({"dynamics": str(exc)}) from exc

    def measurement(self) -> MeasurementConfig:
        return MeasurementConfig(self.tx_power_w, self.noise_power_w, self.pilot_length,
                                 self.tti_s, self.pilot_fraction)

    def codebooks(self) -> tuple[Codebook, Codebook]:
        lam = self.site().wavelength
        return (Codebook.dft(ArrayGeometry(self.n_t, lam), "transmit"),
                Codebook.dft(ArrayGeometry(self.n_r, lam), "receive"))

    def effective_reward_ref(self) -> float:
        if self.reward_ref_rate > 0:
            return self.reward_ref_rate
        g_max = _gain_magnitude(self.site(), self.track_offset_m) ** 2
        return math.log2(1 + self.tx_power_w * self.num_arms * g_max / self.noise_power_w)

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioConfig":
        known = {f.name: f for f in fields(cls)}
        errs = {k: "unknown key" for k in data if k not in known}
        values = {}
        for k, v in data.items():
            if k not in known:
                continue
            default = known[k].default
            try:
                values[k] = _coerce(v, default)
            except (TypeError, ValueError) as exc:
                errs[k] = str(exc)
        if errs:
            raise ConfigError(errs)
        return cls(**values)

    @classmethod
    def from_toml(cls, path) -> "ScenarioConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError({"config": f"cannot read {path}: {exc.strerror}"}) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError({"config": f"malformed TOML: {exc}"}) from exc
        return cls.from_mapping(data)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (float(value),)
        if not isinstance(value, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
            raise TypeError(f"expected a number or list of numbers, got {value!r}")
        return tuple(float(x) for x in value)
    return value


# --- environment -------------------------------------------------------------

@dataclass
class Environment:
    """Channel schedules and genie traces shared by every policy of a run."""

    config: ScenarioConfig
    schedules: list[ChannelSchedule]
    genie_rate: list[np.ndarray]
    genie_arms: list[np.ndarray]


def schedule_seed(config: ScenarioConfig, traverse: int) -> np.random.SeedSequence:
    if config.fresh_schedule:
        return np.random.SeedSequence([config.seed, 0, traverse])
    return np.random.SeedSequence([config.seed, 0])


def noise_seed(config: ScenarioConfig, traverse: int) -> np.random.SeedSequence:
    # shared by all policies so their comparison uses common random numbers
    return np.random.SeedSequence([config.seed, 1, traverse])


def prepare(config: ScenarioConfig) -> Environment:
    site, dyn = config.site(), config.dynamics()
    tx_cb, rx_cb = config.codebooks()
    kern = kernels.backend
    schedules, rates, arms = [], [], []
    distinct = config.num_traverses if config.fresh_schedule else 1
    for k in range(distinct):
        rng = np.random.default_rng(schedule_seed(config, k))
        sch = ChannelSchedule.generate(site, dyn, tx_cb, rx_cb, rng, on_grid=config.on_grid)
        s = config.slots_per_traverse
        rate = np.empty(s)
        streams = np.empty(s, dtype=np.int64)
        chosen = np.empty((s, config.D), dtype=np.int64)
        kern.genie_trace(sch.rx_resp, sch.tx_resp, sch.coef, sch.doppler, sch.num_paths,
                         sch.window_slots, config.tti_s, config.D, config.tx_power_w,
                         config.noise_power_w, rate, streams, chosen)
        schedules.append(sch)
        rates.append(rate)
        arms.append(chosen)
    return Environment(config, schedules, rates, arms)


# --- runs --------------------------------------------------------------------

@dataclass
class RunResult:
    config: ScenarioConfig
    policy: str
    # (num_traverses, slots_per_traverse)
    policy_rate: np.ndarray = field(repr=False)
    genie_rate: np.ndarray = field(repr=False)
    # (num_traverses, slots_per_traverse, D); -1 marks an unused stream
    chosen_arms: np.ndarray = field(repr=False)
    path_histogram: np.ndarray = field(repr=False)
    tables: list[BanditTable] | None = field(default=None, repr=False)

    @property
    def cumulative_regret(self) -> np.ndarray:
        """Running genie shortfall over the whole run, flattened across traverses."""
        return np.cumsum((self.genie_rate - self.policy_rate).ravel())

    @property
    def mean_se(self) -> np.ndarray:
        return self.policy_rate.mean(axis=1)

    @property
    def genie_mean_se(self) -> np.ndarray:
        return self.genie_rate.mean(axis=1)

    def traverse_regret(self) -> np.ndarray:
        """Regret accumulated within each traverse."""
        return (self.genie_rate - self.policy_rate).sum(axis=1)

    def write_csv(self, path) -> None:
        cum = self.cumulative_regret
        t_n, s_n = self.policy_rate.shape
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["traverse", "slot", "policy", "genie_rate", "policy_rate",
                             "cumulative_regret", "arms"])
            for t in range(t_n):
                for s in range(s_n):
                    arms = ";".join(str(a) for a in self.chosen_arms[t, s] if a >= 0)
                    writer.writerow([t, s, self.policy, f"{self.genie_rate[t, s]:.9f}",
                                     f"{self.policy_rate[t, s]:.9f}",
                                     f"{cum[t * s_n + s]:.9f}", arms])

    def summary_rows(self) -> list[list]:
        rows = []
        cum = self.traverse_regret().cumsum()
        for t in range(self.policy_rate.shape[0]):
            rows.append([self.policy, t, f"{self.mean_se[t]:.9f}", f"{self.genie_mean_se[t]:.9f}",
                         f"{cum[t]:.9f}"])
        return rows


SUMMARY_HEADER = ["policy", "traverse", "mean_se", "genie_mean_se", "cumulative_regret"]


def write_summary(results: Sequence[RunResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for r in results:
            writer.writerows(r.summary_rows())


def write_path_histogram(hist: np.ndarray, path) -> None:
    total = hist.sum()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["num_paths", "slots", "fraction"])
        for n in range(1, len(hist)):
            writer.writerow([n, int(hist[n]), f"{hist[n] / total:.6f}"])


def _path_histogram(env: Environment, num_traverses: int) -> np.ndarray:
    hist = np.zeros(env.config.max_paths + 1, dtype=np.int64)
    for t in range(num_traverses):
        counts = env.schedules[t % len(env.schedules)].path_counts()
        hist += np.bincount(counts, minlength=len(hist))[: len(hist)]
    return hist


def run(config: ScenarioConfig, policy: str, env: Environment | None = None) -> RunResult:
    if policy not in POLICIES:
        raise ConfigError({"policy": f"must be one of {POLICIES}, got {policy!r}"})
    if env is None:
        env = prepare(config)
    kern = kernels.backend
    t_n, s_n, d, m = config.num_traverses, config.slots_per_traverse, config.D, config.M
    rates = np.empty((t_n, s_n))
    genie = np.empty((t_n, s_n))
    arms = np.full((t_n, s_n, d), -1, dtype=np.int64)
    meas = config.measurement()
    overhead = meas.data_fraction(m, config.num_arms)

    n_bins = math.ceil(s_n / config.bin_len_slots)
    counts = np.zeros((n_bins, config.num_arms), dtype=np.int64)
    means = np.zeros((n_bins, config.num_arms))
    clocks = np.zeros(n_bins, dtype=np.int64)
    seq_state = np.zeros(2, dtype=np.int64)
    held = np.zeros(d, dtype=np.int64)
    ref = config.effective_reward_ref()

    for t in range(t_n):
        k = t % len(env.schedules)
        sch = env.schedules[k]
        genie[t] = env.genie_rate[k]
        if policy == "genie":
            rates[t] = env.genie_rate[k]
            arms[t] = env.genie_arms[k]
            continue
        rng = np.random.default_rng(noise_seed(config, t))
        u, g = draw_pilot_noise(rng, config.pilot_length, (s_n, m))
        u = np.ascontiguousarray(u)
        g = np.ascontiguousarray(g, dtype=float)
        out = np.empty(s_n)
        out_arms = np.empty((s_n, d), dtype=np.int64)
        common = (sch.rx_resp, sch.tx_resp, sch.coef, sch.doppler, sch.num_paths,
                  sch.window_slots, config.tti_s)
        if policy == "bandit":
            kern.bandit_traverse(*common, counts, means, clocks, config.bin_len_slots, m, d,
                                 config.exploration_c, ref, config.tx_power_w,
                                 config.noise_power_w, config.pilot_length,
                                 config.update_measured, u, g, out, out_arms)
        else:
            kern.sequential_traverse(*common, seq_state, held, m, d, config.tx_power_w,
                                     config.noise_power_w, config.pilot_length, u, g,
                                     out, out_arms)
        rates[t] = overhead * out
        arms[t] = out_arms

    tables = None
    if policy == "bandit":
        tables = [BanditTable(config.num_arms, counts[b], means[b], int(clocks[b]))
                  for b in range(n_bins)]
    result = RunResult(config, policy, rates, genie, arms, _path_histogram(env, t_n), tables)
    check_result(result)
    return result


def check_result(result: RunResult) -> None:
    cfg = result.config
    expected = (cfg.num_traverses, cfg.slots_per_traverse)
    if result.policy_rate.shape != expected:
        raise InvariantError(f"expected {expected} rate rows, got {result.policy_rate.shape}")
    if not np.all(np.isfinite(result.policy_rate)):
        raise InvariantError("non-finite policy rate")
    shortfall = result.genie_rate - result.policy_rate
    if shortfall.min() < -1e-9 * max(1.0, float(result.genie_rate.max())):
        raise InvariantError(f"policy beat the genie by {-shortfall.min():.3g} bps/Hz")


def run_all(config: ScenarioConfig, policies: Sequence[str] = POLICIES) -> dict[str, RunResult]:
    env = prepare(config)
    return {p: run(config, p, env) for p in policies}


def write_run(results: dict[str, RunResult], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = next(iter(results.values())).config.seed
    written = []
    for policy, res in results.items():
        p = out / f"run_seed{seed}_{policy}.csv"
        res.write_csv(p)
        written.append(p)
        if res.tables is not None:
            tp = out / f"run_seed{seed}_{policy}_tables.csv"
            export_tables_csv(res.tables, tp, res.config.n_t)
            written.append(tp)
    sp = out / f"run_seed{seed}_summary.csv"
    write_summary(list(results.values()), sp)
    hp = out / f"run_seed{seed}_paths.csv"
    write_path_histogram(next(iter(results.values())).path_histogram, hp)
    return written + [sp, hp]


# --- sweeps and calibration --------------------------------------------------

def sweep_config(config: ScenarioConfig, axis: str, value: int) -> ScenarioConfig:
    if axis == "M":
        return config.with_overrides(M=int(value))
    if axis == "n_antennas":
        return config.with_overrides(n_t=int(value), n_r=int(value))
    if axis == "num_traverses":
        return config.with_overrides(num_traverses=int(value))
    raise ConfigError({"axis": f"must be one of {SWEEP_AXES}, got {axis!r}"})


def _sweep_one(args):
    cfg, policy = args
    return run(cfg, policy)


def sweep(config: ScenarioConfig, axis: str, values: Sequence[int], policy: str = "bandit",
          workers: int = 1) -> list[RunResult]:
    """One run per value with the shared base seed, in ``values`` order."""
    cfgs = [sweep_config(config, axis, v) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, [(c, policy) for c in cfgs]))
    return [run(c, policy) for c in cfgs]


def write_sweep(results: Sequence[RunResult], axis: str, values: Sequence[int], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "value", *SUMMARY_HEADER])
        for v, r in zip(values, results):
            for row in r.summary_rows():
                writer.writerow([axis, v, *row])


def calibrate(config: ScenarioConfig, num_traverses: int = 50) -> np.ndarray:
    """Live-path-count fractions (index = count) over independently seeded traverses."""
    cfg = config.with_overrides(fresh_schedule=True)
    site, dyn = cfg.site(), cfg.dynamics()
    tx_cb, rx_cb = cfg.codebooks()
    hist = np.zeros(cfg.max_paths + 1, dtype=np.int64)
    for k in range(num_traverses):
        rng = np.random.default_rng(schedule_seed(cfg, k))
        sch = ChannelSchedule.generate(site, dyn, tx_cb, rx_cb, rng, on_grid=cfg.on_grid)
        hist += np.bincount(sch.path_counts(), minlength=len(hist))[: len(hist)]
    return hist / hist.sum()
