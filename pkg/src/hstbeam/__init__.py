"""Beam searching for mmWave high-speed-train backhaul with a UCB bandit."""

from .bandit import BanditTable, PolicyConfig, run_timeslot, ucb_scores
from .baselines import SequentialScanState, genie_rates, sequential_step
from .channel import (
    ArrayGeometry,
    ChannelSchedule,
    ChannelSnapshot,
    PathDynamicsConfig,
    PathState,
    Site,
    build_channel,
    steering_vector,
)
from .codebook import Codebook, MeasurementConfig, MeasurementRecord, virtual_channel
from .kernels import BACKEND
from .regret import (
    RegretTrace,
    SyntheticBanditSpec,
    cumulative_regret,
    lemma1_bound,
    theorem1_bound,
    verify_bounds,
)
from .sim import ConfigError, InvariantError, RunResult, ScenarioConfig, prepare, run, run_all, sweep

__version__ = "0.1.0"
