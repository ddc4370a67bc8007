import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hstbeam.channel import ArrayGeometry, PathState, build_channel, grid_angles, steering_vector
from hstbeam.codebook import (
    Codebook,
    MeasurementConfig,
    arm_to_pair,
    beam_gain,
    draw_pilot_noise,
    estimated_rate,
    measure_arm,
    pair_to_arm,
    pilot_power,
    stream_rates,
    transmit_rates,
    virtual_channel,
)

from conftest import NOISE_POWER_W, TX_POWER_W, WAVELENGTH, codebooks


def _path(gain, aod, aoa, pid=0):
    return PathState(pid, pid == 0, complex(gain), aod, aoa, 0.0, 0, math.inf)


@pytest.mark.parametrize("n", [8, 16, 32, 64])
def test_dft_codebook_is_unitary(n):
    cb = Codebook.dft(ArrayGeometry(n, WAVELENGTH))
    a = cb.matrix
    assert np.abs(a @ a.conj().T - np.eye(n)).max() < 1e-10
    assert np.abs(a.conj().T @ a - np.eye(n)).max() < 1e-10


def test_codebook_columns_match_explicit_dft():
    n = 8
    cb = Codebook.dft(ArrayGeometry(n, WAVELENGTH))
    k = np.arange(n)[:, None]
    theta = (np.arange(1, n + 1) - (n + 1) / 2) / n
    dft = np.exp(1j * 2 * np.pi * k * theta[None, :]) / math.sqrt(n)
    assert np.allclose(cb.matrix, dft, atol=1e-12)
    assert np.allclose(cb.grid_angles, theta)


@given(st.integers(1, 16), st.integers(1, 16), st.data())
def test_arm_pair_round_trip(n_t, n_r, data):
    arm = data.draw(st.integers(0, n_t * n_r - 1))
    p, q = arm_to_pair(arm, n_t)
    assert 0 <= p < n_t and 0 <= q < n_r
    assert pair_to_arm(p, q, n_t) == arm


def test_arm_indexing_is_row_major():
    assert arm_to_pair(0, 4) == (0, 0)
    assert arm_to_pair(5, 4) == (1, 1)
    assert pair_to_arm(3, 2, 4) == 11


def test_zero_channel_gives_zero_virtual_channel(cb8):
    tx, rx = cb8
    assert np.all(virtual_channel(np.zeros((8, 8), complex), tx, rx) == 0)


def test_virtual_channel_rejects_mismatch(cb8):
    tx, rx = cb8
    with pytest.raises(ValueError):
        virtual_channel(np.zeros((8, 4), complex), tx, rx)


def test_single_on_grid_path_lands_on_one_entry(cb8):
    tx, rx = cb8
    angles = grid_angles(tx.geometry)
    alpha = 0.3 - 0.4j
    h = build_channel([_path(alpha, angles[2], angles[5])], tx.geometry, rx.geometry, 0.0)
    hv = virtual_channel(h, tx, rx)
    big = np.argwhere(np.abs(hv) > 1e-12)
    assert big.tolist() == [[5, 2]]
    assert hv[5, 2] == pytest.approx(alpha, abs=1e-12)


def test_frobenius_norm_scales_and_inverse_recovers_channel(cb8):
    tx, rx = cb8
    rng = np.random.default_rng(0)
    h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    hv = virtual_channel(h, tx, rx)
    # unitary codebooks: only the 1/sqrt(NtNr) normalization changes the norm
    assert np.linalg.norm(hv) == pytest.approx(np.linalg.norm(h) / 8)
    back = rx.matrix @ hv @ tx.matrix.conj().T * math.sqrt(64)
    assert np.abs(back - h).max() < 1e-9


def test_matched_pair_gain_is_array_gain_times_path_gain(cb8):
    tx, rx = cb8
    angles = grid_angles(tx.geometry)
    alpha = 2e-5
    h = build_channel([_path(alpha, angles[1], angles[6])], tx.geometry, rx.geometry, 0.0)
    g = beam_gain(h, pair_to_arm(1, 6, 8), tx, rx)
    assert abs(g) ** 2 == pytest.approx(64 * alpha ** 2, rel=1e-12)
    # orthogonal pair sees nothing
    assert abs(beam_gain(h, pair_to_arm(2, 6, 8), tx, rx)) < 1e-15


def _literal_pilot(gain, n_p, noise, cfg):
    """Sample-by-sample pilot reception with a unit-modulus sequence."""
    s = np.exp(2j * np.pi * np.arange(n_p) ** 2 / (2 * n_p))
    y = math.sqrt(cfg.tx_power_w) * gain * s + noise
    return np.sum(np.abs(y) ** 2) / n_p, s


def test_pilot_power_matches_sample_level_reception():
    cfg = MeasurementConfig(TX_POWER_W, NOISE_POWER_W, pilot_length=16)
    rng = np.random.default_rng(1)
    sigma = math.sqrt(cfg.noise_power_w)
    for _ in range(50):
        gain = complex(*rng.standard_normal(2)) * 3e-5
        noise = sigma * (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / math.sqrt(2)
        literal, s = _literal_pilot(gain, 16, noise, cfg)
        # split the noise into its component along the pilot and the remainder
        along = np.vdot(s, noise) / math.sqrt(16)
        u = along * np.exp(-1j * np.angle(gain)) / sigma
        rest = np.sum(np.abs(noise - along * s / math.sqrt(16)) ** 2) / cfg.noise_power_w
        assert pilot_power(abs(gain), u, rest, cfg) == pytest.approx(literal, rel=1e-10)


def test_pilot_measurement_is_unbiased():
    cfg = MeasurementConfig(TX_POWER_W, NOISE_POWER_W, pilot_length=8)
    rng = np.random.default_rng(2)
    gain = 2e-6
    u, g = draw_pilot_noise(rng, 8, 20000)
    y = np.array([pilot_power(gain, a, b, cfg) for a, b in zip(u, g)])
    expect = cfg.tx_power_w * gain ** 2 + cfg.noise_power_w
    assert abs(y.mean() - expect) < 3 * y.std() / math.sqrt(len(y))


def test_noise_only_pilot_tends_to_noise_floor():
    cfg = MeasurementConfig(TX_POWER_W, NOISE_POWER_W, pilot_length=4096)
    rng = np.random.default_rng(3)
    u, g = draw_pilot_noise(rng, 4096, 200)
    y = np.array([pilot_power(0.0, a, b, cfg) for a, b in zip(u, g)])
    assert y.mean() == pytest.approx(cfg.noise_power_w, rel=5e-3)


def test_noiseless_measurement_limit(cb8):
    tx, rx = cb8
    angles = grid_angles(tx.geometry)
    alpha = 1e-5
    h = build_channel([_path(alpha, angles[3], angles[3])], tx.geometry, rx.geometry, 0.0)
    quiet = MeasurementConfig(TX_POWER_W, 1e-30, pilot_length=16)
    rec = measure_arm(h, pair_to_arm(3, 3, 8), quiet, np.random.default_rng(0), tx_cb=tx, rx_cb=rx)
    assert rec.measured_power_w == pytest.approx(TX_POWER_W * 64 * alpha ** 2, rel=1e-9)
    assert rec.beam_pair == (3, 3)
    off = measure_arm(h, pair_to_arm(4, 3, 8), quiet, np.random.default_rng(0), tx_cb=tx, rx_cb=rx)
    assert off.measured_power_w < 1e-25


def test_measure_arm_rejects_bad_arm(cb8, meas_cfg):
    tx, rx = cb8
    with pytest.raises(ValueError):
        measure_arm(np.zeros((8, 8), complex), 64, meas_cfg, np.random.default_rng(0), tx_cb=tx, rx_cb=rx)


def test_estimated_rate_clamps_below_noise_floor(meas_cfg):
    assert estimated_rate(0.5 * NOISE_POWER_W, meas_cfg) == 0.0
    assert estimated_rate(4 * NOISE_POWER_W, meas_cfg) == pytest.approx(2.0)
    assert estimated_rate(7 * NOISE_POWER_W, meas_cfg, num_streams=2) == pytest.approx(2.0)


def test_transmit_rates(cb8, meas_cfg):
    tx, rx = cb8
    angles = grid_angles(tx.geometry)
    alpha = 1e-6
    h = build_channel([_path(alpha, angles[0], angles[0])], tx.geometry, rx.geometry, 0.0)
    (r,) = transmit_rates(h, [0], meas_cfg, tx_cb=tx, rx_cb=rx)
    assert r == pytest.approx(math.log2(1 + TX_POWER_W * 64 * alpha ** 2 / NOISE_POWER_W))
    assert np.all(transmit_rates(np.zeros((8, 8), complex), [1, 2], meas_cfg, tx_cb=tx, rx_cb=rx) == 0)
    with pytest.raises(ValueError):
        transmit_rates(h, [3, 3], meas_cfg, tx_cb=tx, rx_cb=rx)


def test_stream_rate_non_increasing_in_streams(meas_cfg):
    rates = [stream_rates([1e-8], meas_cfg, d)[0] for d in range(1, 6)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_data_fraction(meas_cfg):
    assert meas_cfg.data_fraction(6, 1024) == pytest.approx(1 - 0.2 * 6 / 1024)
    assert meas_cfg.data_fraction(1024, 1024) == pytest.approx(0.8)


@pytest.mark.parametrize("kw", [dict(tx_power_w=0), dict(pilot_length=0), dict(pilot_fraction=1.0)])
def test_measurement_config_validation(kw):
    base = dict(tx_power_w=1.0, noise_power_w=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        MeasurementConfig(**base)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=5, unique=True),
       st.integers(0, 2 ** 31))
def test_on_grid_paths_give_sparse_virtual_channel(pairs, seed):
    tx, rx = codebooks(8)
    angles = grid_angles(tx.geometry)
    rng = np.random.default_rng(seed)
    gains = rng.uniform(0.1, 1, len(pairs)) * np.exp(2j * np.pi * rng.random(len(pairs)))
    paths = [_path(g, angles[p], angles[q], i) for i, ((p, q), g) in enumerate(zip(pairs, gains))]
    hv = virtual_channel(build_channel(paths, tx.geometry, rx.geometry, 0.0), tx, rx)
    assert np.count_nonzero(np.abs(hv) > 1e-12) == len(pairs)
    for (p, q), g in zip(pairs, gains):
        assert abs(hv[q, p] - g) < 1e-9


def test_steering_vector_unit_norm():
    geom = ArrayGeometry(16, WAVELENGTH)
    for a in np.linspace(-1.5, 1.5, 7):
        assert np.linalg.norm(steering_vector(geom, a)) == pytest.approx(1.0)
