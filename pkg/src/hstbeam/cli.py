"""Command-line entry point: ``hstbeam {run,sweep,verify-bounds,calibrate}``.

Exit codes: 0 success, 1 configuration error, 2 invariant breach.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .regret import SyntheticBanditSpec, verify_bounds
from .sim import (
    POLICIES,
    SWEEP_AXES,
    ConfigError,
    InvariantError,
    ScenarioConfig,
    calibrate,
    prepare,
    run,
    sweep,
    write_run,
    write_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_toml(args.config) if args.config else ScenarioConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "traverses", None) is not None:
        overrides["num_traverses"] = args.traverses
    return cfg.with_overrides(**overrides) if overrides else cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    policies = POLICIES if args.policy == "all" else (args.policy,)
    env = prepare(cfg)
    results = {p: run(cfg, p, env) for p in policies}
    for path in write_run(results, args.out_dir):
        print(path)
    for p, r in results.items():
        se = " ".join(f"{x:.3f}" for x in r.mean_se)
        print(f"{p}: mean SE per traverse [{se}] final regret {r.cumulative_regret[-1]:.1f}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [int(v) for v in args.values.split(",")]
    results = sweep(cfg, args.axis, values, args.policy, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_{args.axis}_seed{cfg.seed}_{args.policy}.csv"
    write_sweep(results, args.axis, values, path)
    print(path)
    return EXIT_OK


def _cmd_verify(args) -> int:
    means = tuple(float(x) for x in args.means.split(","))
    try:
        spec = SyntheticBanditSpec(
            means, arm_noise=args.noise, num_measure=args.M, num_streams=args.D,
            exploration_c=args.c, horizon=args.horizon, num_seeds=args.seeds,
            seed=args.seed or 0)
    except ValueError as exc:
        raise ConfigError({"spec": str(exc)}) from exc
    report = verify_bounds(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "verify_bounds.csv"
    report.write_csv(path)
    print(path)
    print(f"violations: {len(report.violations)}")
    for n, what in report.violations:
        print(f"  n={n}: {what}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    frac = calibrate(cfg, args.traverses or 50)
    for n in range(1, len(frac)):
        print(f"L={n}: {100 * frac[n]:.1f}%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hstbeam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy=True):
        p.add_argument("--config", type=Path, help="TOML scenario file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out-dir", default="results")
        p.add_argument("--traverses", type=int)
        if policy:
            p.add_argument("--policy", default="all", choices=(*POLICIES, "all"))

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="one run per value of a parameter")
    common(p, policy=False)
    p.add_argument("--policy", default="bandit", choices=POLICIES)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify-bounds", help="Monte Carlo check of the UCB bounds")
    p.add_argument("--means", default="0.9,0.5,0.3,0.1")
    p.add_argument("--noise", default="bernoulli",
                   choices=("bernoulli", "truncated-gaussian", "deterministic"))
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--D", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("calibrate", help="live-path-count distribution over seeded traverses")
    common(p, policy=False)
    p.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
