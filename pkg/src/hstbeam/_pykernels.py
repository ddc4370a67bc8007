"""Pure-Python/numpy implementation of the per-slot simulation loops.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or when ``HSTBEAM_BACKEND=python``.
"""

import math

import numpy as np

NAME = "python"


def ucb_order(counts, means, clock, c):
    """Arms sorted by UCB score, descending, ties by lower index."""
    with np.errstate(divide="ignore", invalid="ignore"):
        bonus = c * np.sqrt(math.log(clock) / counts) if clock > 0 else np.zeros(len(counts))
    scores = np.where(counts > 0, means + bonus, np.inf)
    return np.argsort(-scores, kind="stable")


def top_by_value(values, arms, k):
    """Positions of the ``k`` largest ``values``, ties by lower arm id."""
    order = sorted(range(len(arms)), key=lambda m: (-values[m], arms[m]))
    return order[:k]


def _update(counts, means, arm, reward):
    n = counts[arm]
    means[arm] = (reward + means[arm] * n) / (n + 1)
    counts[arm] = n + 1


def _pilot_power(gain_abs, u, g, tx_power, noise_power, pilot_length):
    sigma = math.sqrt(noise_power)
    re = math.sqrt(pilot_length * tx_power) * gain_abs + sigma * u.real
    im = sigma * u.imag
    return (re * re + im * im + noise_power * g) / pilot_length


def _entry_gains(rx_resp, tx_resp, coef, doppler, num_paths, w, t, arms, nt, scale):
    n = num_paths[w]
    c = coef[w, :n] * np.exp(2j * np.pi * doppler[w, :n] * t)
    q = arms // nt
    p = arms % nt
    hv = (c[:, None] * rx_resp[w, :n][:, q] * tx_resp[w, :n][:, p]).sum(axis=0)
    return scale * np.abs(hv)


def bandit_traverse(rx_resp, tx_resp, coef, doppler, num_paths, window_slots, tti_s,
                    counts, means, clocks, bin_len, num_measure, num_streams, c,
                    ref_rate, tx_power, noise_power, pilot_length, update_measured,
                    noise_u, noise_g, out_rate, out_arms):
    nt = tx_resp.shape[2]
    nr = rx_resp.shape[2]
    scale = math.sqrt(nt * nr)
    n_slots = out_rate.shape[0]
    for s in range(n_slots):
        w = s // window_slots
        b = s // bin_len
        clocks[b] += 1
        g_m = ucb_order(counts[b], means[b], clocks[b], c)[:num_measure]
        gains = _entry_gains(rx_resp, tx_resp, coef, doppler, num_paths, w, s * tti_s,
                             g_m, nt, scale)
        y = [_pilot_power(gains[m], noise_u[s, m], noise_g[s, m], tx_power, noise_power,
                          pilot_length) for m in range(num_measure)]
        picks = top_by_value(y, g_m, num_streams)
        total = 0.0
        for k, m in enumerate(picks):
            rate = math.log2(1.0 + tx_power / num_streams * gains[m] ** 2 / noise_power)
            total += rate
            out_arms[s, k] = g_m[m]
            _update(counts[b], means[b], g_m[m], min(1.0, rate / ref_rate))
        if update_measured:
            chosen = set(picks)
            for m in range(num_measure):
                if m in chosen:
                    continue
                snr = max(0.0, y[m] - noise_power) / noise_power
                est = math.log2(1.0 + snr / num_streams)
                _update(counts[b], means[b], g_m[m], min(1.0, est / ref_rate))
        out_rate[s] = total


def sequential_traverse(rx_resp, tx_resp, coef, doppler, num_paths, window_slots, tti_s,
                        state, held, num_measure, num_streams, tx_power, noise_power,
                        pilot_length, noise_u, noise_g, out_rate, out_arms):
    """``state = [cursor, n_held]``; ``held`` holds the previous stream arms."""
    nt = tx_resp.shape[2]
    nr = rx_resp.shape[2]
    n_arms = nt * nr
    scale = math.sqrt(nt * nr)
    n_slots = out_rate.shape[0]
    cursor, n_held = int(state[0]), int(state[1])
    for s in range(n_slots):
        w = s // window_slots
        g_m = [int(a) for a in held[:n_held]]
        while len(g_m) < num_measure:
            a = cursor
            cursor = (cursor + 1) % n_arms
            if a not in g_m:
                g_m.append(a)
        g_m = np.array(g_m, dtype=np.int64)
        gains = _entry_gains(rx_resp, tx_resp, coef, doppler, num_paths, w, s * tti_s,
                             g_m, nt, scale)
        y = [_pilot_power(gains[m], noise_u[s, m], noise_g[s, m], tx_power, noise_power,
                          pilot_length) for m in range(num_measure)]
        picks = top_by_value(y, g_m, num_streams)
        total = 0.0
        for k, m in enumerate(picks):
            total += math.log2(1.0 + tx_power / num_streams * gains[m] ** 2 / noise_power)
            out_arms[s, k] = g_m[m]
            held[k] = g_m[m]
        n_held = len(picks)
        out_rate[s] = total
    state[0] = cursor
    state[1] = n_held


def genie_trace(rx_resp, tx_resp, coef, doppler, num_paths, window_slots, tti_s,
                max_streams, tx_power, noise_power, out_rate, out_streams, out_arms):
    nt = tx_resp.shape[2]
    nr = rx_resp.shape[2]
    n_slots = out_rate.shape[0]
    snr_scale = nt * nr * tx_power / noise_power
    d = max_streams
    for w in range(num_paths.shape[0]):
        s0 = w * window_slots
        s1 = min(s0 + window_slots, n_slots)
        if s0 >= n_slots:
            break
        n = num_paths[w]
        t = np.arange(s0, s1) * tti_s
        c = coef[w, :n][None, :] * np.exp(2j * np.pi * np.outer(t, doppler[w, :n]))
        basis = (rx_resp[w, :n][:, :, None] * tx_resp[w, :n][:, None, :]).reshape(n, -1)
        power = np.abs(c @ basis) ** 2
        order = np.argsort(-power, axis=1, kind="stable")[:, :d]
        top = np.take_along_axis(power, order, axis=1)
        best = np.full(s1 - s0, -1.0)
        best_k = np.zeros(s1 - s0, dtype=np.int64)
        for k in range(1, d + 1):
            total = np.log2(1.0 + snr_scale / k * top[:, :k]).sum(axis=1)
            better = total > best
            best[better] = total[better]
            best_k[better] = k
        out_rate[s0:s1] = best
        out_streams[s0:s1] = best_k
        arms = order.copy()
        arms[np.arange(d)[None, :] >= best_k[:, None]] = -1
        out_arms[s0:s1] = arms


def synthetic_bandit(measure, rewards, num_measure, num_streams, c, out_arms):
    """Stationary bandit: ``measure[t, i]`` ranks measured arms, ``rewards[t, i]`` is paid."""
    horizon, n_arms = rewards.shape
    counts = np.zeros(n_arms, dtype=np.int64)
    means = np.zeros(n_arms)
    for t in range(horizon):
        g_m = ucb_order(counts, means, t + 1, c)[:num_measure]
        y = measure[t, g_m]
        picks = top_by_value(y, g_m, num_streams)
        for k, m in enumerate(picks):
            arm = g_m[m]
            out_arms[t, k] = arm
            _update(counts, means, arm, rewards[t, arm])
