# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-slot simulation loops; same signatures as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, log2, cos, sin, fabs, INFINITY, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "cython"


cdef inline bint _better(double va, long ia, double vb, long ib) noexcept nogil:
    return va > vb or (va == vb and ia < ib)


cdef void _top_k(const double* vals, const long* ids, long n, long k, long* out) noexcept nogil:
    # out receives positions into vals, best first; ties go to the lower id
    cdef long filled = 0, i, j
    for i in range(n):
        if filled < k:
            j = filled
            filled += 1
        elif _better(vals[i], ids[i], vals[out[k - 1]], ids[out[k - 1]]):
            j = k - 1
        else:
            continue
        while j > 0 and _better(vals[i], ids[i], vals[out[j - 1]], ids[out[j - 1]]):
            out[j] = out[j - 1]
            j -= 1
        out[j] = i


cdef inline void _update(long long* counts, double* means, long arm, double reward) noexcept nogil:
    cdef long long n = counts[arm]
    means[arm] = (reward + means[arm] * n) / (n + 1)
    counts[arm] = n + 1


cdef inline void _ucb_scores(const long long* counts, const double* means, long long clock,
                             double c, long n_arms, double* out) noexcept nogil:
    cdef double lt = log(<double>clock) if clock > 0 else 0.0
    cdef long i
    for i in range(n_arms):
        if counts[i] > 0:
            out[i] = means[i] + c * sqrt(lt / counts[i])
        else:
            out[i] = INFINITY


cdef inline double _pilot_power(double gain_abs, double complex u, double g, double tx_power,
                                double noise_power, long pilot_length) noexcept nogil:
    cdef double sigma = sqrt(noise_power)
    cdef double re = sqrt(pilot_length * tx_power) * gain_abs + sigma * u.real
    cdef double im = sigma * u.imag
    return (re * re + im * im + noise_power * g) / pilot_length


cdef inline double _entry_abs(const double complex[:, :, ::1] rx_resp,
                              const double complex[:, :, ::1] tx_resp,
                              const double complex* phased, long n, long w, long q, long p,
                              double scale) noexcept nogil:
    cdef double complex acc = 0
    cdef long l
    for l in range(n):
        acc = acc + phased[l] * rx_resp[w, l, q] * tx_resp[w, l, p]
    return scale * sqrt(acc.real * acc.real + acc.imag * acc.imag)


cdef inline void _phase_coefs(const double complex[:, ::1] coef, const double[:, ::1] doppler,
                              long w, long n, double t, double complex* out) noexcept nogil:
    cdef long l
    cdef double ang
    for l in range(n):
        ang = 2 * M_PI * doppler[w, l] * t
        out[l] = coef[w, l] * (cos(ang) + 1j * sin(ang))


def bandit_traverse(const double complex[:, :, ::1] rx_resp, const double complex[:, :, ::1] tx_resp,
                    const double complex[:, ::1] coef, const double[:, ::1] doppler,
                    const long long[::1] num_paths, long window_slots, double tti_s,
                    long long[:, ::1] counts, double[:, ::1] means, long long[::1] clocks,
                    long bin_len, long num_measure, long num_streams, double c,
                    double ref_rate, double tx_power, double noise_power, long pilot_length,
                    bint update_measured, const double complex[:, ::1] noise_u,
                    const double[:, ::1] noise_g, double[::1] out_rate, long long[:, ::1] out_arms):
    cdef long nt = tx_resp.shape[2], nr = rx_resp.shape[2]
    cdef long n_arms = nt * nr, lmax = coef.shape[1]
    cdef double scale = sqrt(<double>(nt * nr))
    cdef long n_slots = out_rate.shape[0]
    cdef long s, w, b, m, k, arm, n
    cdef double total, rate, snr, est
    cdef double[::1] scores = np.empty(n_arms)
    cdef long[::1] ident = np.arange(n_arms, dtype=np.int_)
    cdef long[::1] g_m = np.empty(num_measure, dtype=np.int_)
    cdef long[::1] picks = np.empty(num_streams, dtype=np.int_)
    cdef double[::1] y = np.empty(num_measure)
    cdef double[::1] gains = np.empty(num_measure)
    cdef double complex[::1] phased = np.empty(lmax, dtype=np.complex128)
    cdef char[::1] chosen = np.zeros(num_measure, dtype=np.int8)
    with nogil:
        for s in range(n_slots):
            w = s // window_slots
            b = s // bin_len
            clocks[b] += 1
            _ucb_scores(&counts[b, 0], &means[b, 0], clocks[b], c, n_arms, &scores[0])
            _top_k(&scores[0], &ident[0], n_arms, num_measure, &g_m[0])
            n = num_paths[w]
            _phase_coefs(coef, doppler, w, n, s * tti_s, &phased[0])
            for m in range(num_measure):
                arm = g_m[m]
                gains[m] = _entry_abs(rx_resp, tx_resp, &phased[0], n, w, arm // nt, arm % nt, scale)
                y[m] = _pilot_power(gains[m], noise_u[s, m], noise_g[s, m], tx_power,
                                    noise_power, pilot_length)
                chosen[m] = 0
            _top_k(&y[0], &g_m[0], num_measure, num_streams, &picks[0])
            total = 0.0
            for k in range(num_streams):
                m = picks[k]
                chosen[m] = 1
                rate = log2(1.0 + tx_power / num_streams * gains[m] * gains[m] / noise_power)
                total += rate
                out_arms[s, k] = g_m[m]
                _update(&counts[b, 0], &means[b, 0], g_m[m], rate / ref_rate if rate < ref_rate else 1.0)
            if update_measured:
                for m in range(num_measure):
                    if chosen[m]:
                        continue
                    snr = y[m] - noise_power
                    snr = (snr if snr > 0 else 0.0) / noise_power
                    est = log2(1.0 + snr / num_streams)
                    _update(&counts[b, 0], &means[b, 0], g_m[m], est / ref_rate if est < ref_rate else 1.0)
            out_rate[s] = total


def sequential_traverse(const double complex[:, :, ::1] rx_resp, const double complex[:, :, ::1] tx_resp,
                        const double complex[:, ::1] coef, const double[:, ::1] doppler,
                        const long long[::1] num_paths, long window_slots, double tti_s,
                        long long[::1] state, long long[::1] held, long num_measure, long num_streams,
                        double tx_power, double noise_power, long pilot_length,
                        const double complex[:, ::1] noise_u, const double[:, ::1] noise_g,
                        double[::1] out_rate, long long[:, ::1] out_arms):
    cdef long nt = tx_resp.shape[2], nr = rx_resp.shape[2]
    cdef long n_arms = nt * nr, lmax = coef.shape[1]
    cdef double scale = sqrt(<double>(nt * nr))
    cdef long n_slots = out_rate.shape[0]
    cdef long cursor = state[0], n_held = state[1]
    cdef long s, w, m, k, a, j, filled, n
    cdef bint dup
    cdef double total
    cdef long[::1] g_m = np.empty(num_measure, dtype=np.int_)
    cdef long[::1] picks = np.empty(num_streams, dtype=np.int_)
    cdef double[::1] y = np.empty(num_measure)
    cdef double[::1] gains = np.empty(num_measure)
    cdef double complex[::1] phased = np.empty(lmax, dtype=np.complex128)
    with nogil:
        for s in range(n_slots):
            w = s // window_slots
            filled = 0
            for k in range(n_held):
                g_m[filled] = held[k]
                filled += 1
            while filled < num_measure:
                a = cursor
                cursor = (cursor + 1) % n_arms
                dup = False
                for j in range(filled):
                    if g_m[j] == a:
                        dup = True
                        break
                if not dup:
                    g_m[filled] = a
                    filled += 1
            n = num_paths[w]
            _phase_coefs(coef, doppler, w, n, s * tti_s, &phased[0])
            for m in range(num_measure):
                a = g_m[m]
                gains[m] = _entry_abs(rx_resp, tx_resp, &phased[0], n, w, a // nt, a % nt, scale)
                y[m] = _pilot_power(gains[m], noise_u[s, m], noise_g[s, m], tx_power,
                                    noise_power, pilot_length)
            _top_k(&y[0], &g_m[0], num_measure, num_streams, &picks[0])
            total = 0.0
            for k in range(num_streams):
                m = picks[k]
                total += log2(1.0 + tx_power / num_streams * gains[m] * gains[m] / noise_power)
                out_arms[s, k] = g_m[m]
                held[k] = g_m[m]
            n_held = num_streams
            out_rate[s] = total
    state[0] = cursor
    state[1] = n_held


def genie_trace(const double complex[:, :, ::1] rx_resp, const double complex[:, :, ::1] tx_resp,
                const double complex[:, ::1] coef, const double[:, ::1] doppler,
                const long long[::1] num_paths, long window_slots, double tti_s,
                long max_streams, double tx_power, double noise_power,
                double[::1] out_rate, long long[::1] out_streams, long long[:, ::1] out_arms):
    cdef long nt = tx_resp.shape[2], nr = rx_resp.shape[2]
    cdef long n_arms = nt * nr, lmax = coef.shape[1]
    cdef long n_slots = out_rate.shape[0]
    cdef double snr_scale = nt * nr * tx_power / noise_power
    cdef long s, w, q, p, l, k, kk, n, best_k
    cdef double best, total
    cdef double complex acc
    cdef double[::1] power = np.empty(n_arms)
    cdef long[::1] ident = np.arange(n_arms, dtype=np.int_)
    cdef long[::1] order = np.empty(max_streams, dtype=np.int_)
    cdef double complex[::1] phased = np.empty(lmax, dtype=np.complex128)
    cdef double complex[:, ::1] rows = np.empty((lmax, nr), dtype=np.complex128)
    with nogil:
        for s in range(n_slots):
            w = s // window_slots
            n = num_paths[w]
            _phase_coefs(coef, doppler, w, n, s * tti_s, &phased[0])
            for l in range(n):
                for q in range(nr):
                    rows[l, q] = phased[l] * rx_resp[w, l, q]
            for q in range(nr):
                for p in range(nt):
                    acc = 0
                    for l in range(n):
                        acc = acc + rows[l, q] * tx_resp[w, l, p]
                    power[q * nt + p] = acc.real * acc.real + acc.imag * acc.imag
            _top_k(&power[0], &ident[0], n_arms, max_streams, &order[0])
            best = -1.0
            best_k = 0
            for k in range(1, max_streams + 1):
                total = 0.0
                for kk in range(k):
                    total += log2(1.0 + snr_scale / k * power[order[kk]])
                if total > best:
                    best = total
                    best_k = k
            out_rate[s] = best
            out_streams[s] = best_k
            for k in range(max_streams):
                out_arms[s, k] = order[k] if k < best_k else -1


def synthetic_bandit(const double[:, ::1] measure, const double[:, ::1] rewards,
                     long num_measure, long num_streams, double c, long long[:, ::1] out_arms):
    cdef long horizon = rewards.shape[0], n_arms = rewards.shape[1]
    cdef long t, m, k, arm
    cdef long long[::1] counts = np.zeros(n_arms, dtype=np.int64)
    cdef double[::1] means = np.zeros(n_arms)
    cdef double[::1] scores = np.empty(n_arms)
    cdef long[::1] ident = np.arange(n_arms, dtype=np.int_)
    cdef long[::1] g_m = np.empty(num_measure, dtype=np.int_)
    cdef long[::1] picks = np.empty(num_streams, dtype=np.int_)
    cdef double[::1] y = np.empty(num_measure)
    with nogil:
        for t in range(horizon):
            _ucb_scores(&counts[0], &means[0], t + 1, c, n_arms, &scores[0])
            _top_k(&scores[0], &ident[0], n_arms, num_measure, &g_m[0])
            for m in range(num_measure):
                y[m] = measure[t, g_m[m]]
            _top_k(&y[0], &g_m[0], num_measure, num_streams, &picks[0])
            for k in range(num_streams):
                arm = g_m[picks[k]]
                out_arms[t, k] = arm
                _update(&counts[0], &means[0], arm, rewards[t, arm])
