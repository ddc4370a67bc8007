"""Time the compiled and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py --slots 2000 --repeat 3 --csv bench.csv
"""

import argparse
import csv
import time

import numpy as np

from hstbeam.channel import ChannelSchedule
from hstbeam.codebook import draw_pilot_noise
from hstbeam.kernels import available_backends, get_backend
from hstbeam.regret import SyntheticBanditSpec, draw_rewards
from hstbeam.sim import ScenarioConfig


def _setup(slots, n_ant, seed):
    spacing = slots * 0.25e-3 * 100.0
    cfg = ScenarioConfig(mrrh_spacing_m=spacing, slots_per_traverse=slots, n_t=n_ant, n_r=n_ant,
                         seed=seed)
    tx, rx = cfg.codebooks()
    sch = ChannelSchedule.generate(cfg.site(), cfg.dynamics(), tx, rx, np.random.default_rng(seed))
    u, g = draw_pilot_noise(np.random.default_rng(seed + 1), cfg.pilot_length, (slots, cfg.M))
    return cfg, sch, np.ascontiguousarray(u), np.ascontiguousarray(g)


def _cases(cfg, sch, u, g):
    s, m, d, a = cfg.slots_per_traverse, cfg.M, cfg.D, cfg.num_arms
    common = (sch.rx_resp, sch.tx_resp, sch.coef, sch.doppler, sch.num_paths,
              sch.window_slots, cfg.tti_s)
    n_bins = -(-s // cfg.bin_len_slots)
    ref = cfg.effective_reward_ref()
    spec = SyntheticBanditSpec((0.9, 0.5, 0.3, 0.1), horizon=s)
    rewards = draw_rewards(spec, np.random.default_rng(0))
    measure = np.broadcast_to(np.asarray(spec.arm_means), rewards.shape).copy()

    def bandit(k):
        k.bandit_traverse(*common, np.zeros((n_bins, a), np.int64), np.zeros((n_bins, a)),
                          np.zeros(n_bins, np.int64), cfg.bin_len_slots, m, d, cfg.exploration_c,
                          ref, cfg.tx_power_w, cfg.noise_power_w, cfg.pilot_length, True, u, g,
                          np.empty(s), np.empty((s, d), np.int64))

    def sequential(k):
        k.sequential_traverse(*common, np.zeros(2, np.int64), np.zeros(d, np.int64), m, d,
                              cfg.tx_power_w, cfg.noise_power_w, cfg.pilot_length, u, g,
                              np.empty(s), np.empty((s, d), np.int64))

    def genie(k):
        k.genie_trace(*common, d, cfg.tx_power_w, cfg.noise_power_w, np.empty(s),
                      np.empty(s, np.int64), np.empty((s, d), np.int64))

    def synthetic(k):
        k.synthetic_bandit(measure, rewards, 2, 1, 1.0, np.empty((s, 1), np.int64))

    return {"bandit_traverse": bandit, "sequential_traverse": sequential,
            "genie_trace": genie, "synthetic_bandit": synthetic}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=2000)
    ap.add_argument("--antennas", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="optional output file")
    args = ap.parse_args(argv)

    cases = _cases(*_setup(args.slots, args.antennas, args.seed))
    backends = available_backends()
    rows = []
    for name, fn in cases.items():
        best = {}
        for b in backends:
            kern = get_backend(b)
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                fn(kern)
                times.append(time.perf_counter() - t0)
            best[b] = min(times)
        speedup = best["python"] / best["cython"] if "cython" in best else float("nan")
        rows.append([name, args.slots, *(f"{best[b]:.4f}" for b in backends), f"{speedup:.1f}"])

    header = ["kernel", "slots", *(f"{b}_s" for b in backends), "speedup"]
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(str(c).rjust(w) for c, w in zip(r, widths)))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


if __name__ == "__main__":
    main()
