import numpy as np
import pytest

from hstbeam.channel import ArrayGeometry, ChannelSchedule, PathDynamicsConfig, Site
from hstbeam.codebook import Codebook, MeasurementConfig
from hstbeam.sim import ScenarioConfig

WAVELENGTH = 299_792_458.0 / 28e9
TX_POWER_W = 10 ** 3.3 / 1e3
NOISE_POWER_W = 1e-11


def small_scenario(**kw) -> ScenarioConfig:
    """A 2000-slot, 50 m section with 8x8 arrays; fast enough for the python backend."""
    base = dict(mrrh_spacing_m=50.0, slots_per_traverse=2000, n_t=8, n_r=8, num_traverses=2)
    base.update(kw)
    return ScenarioConfig(**base)


def codebooks(n_t, n_r=None):
    n_r = n_t if n_r is None else n_r
    return (Codebook.dft(ArrayGeometry(n_t, WAVELENGTH), "transmit"),
            Codebook.dft(ArrayGeometry(n_r, WAVELENGTH), "receive"))


@pytest.fixture
def cb8():
    return codebooks(8)


@pytest.fixture
def meas_cfg():
    return MeasurementConfig(TX_POWER_W, NOISE_POWER_W)


@pytest.fixture
def small_schedule():
    cfg = small_scenario()
    tx, rx = cfg.codebooks()
    sch = ChannelSchedule.generate(cfg.site(), cfg.dynamics(), tx, rx,
                                   np.random.default_rng(3))
    return cfg, tx, rx, sch


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
