"""``lab`` command-line interface.

Subcommands: ``run`` (execute a config file or shipped preset), ``bounds-
compare`` (the four-bounds curve without a config file), ``replay`` (offline
log replay) and ``selftest``.  Exit codes: 0 success, 2 configuration error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from boundslab.lab.config import ConfigError, ExperimentConfig, parse_config
from boundslab.lab.csvio import emit_csv, parse_csv
from boundslab.lab.runner import run_experiment
from boundslab.lab.svgplot import render_plot

PRESET_PACKAGE = "boundslab.lab.presets"


def preset_names() -> list[str]:
    files = resources.files(PRESET_PACKAGE)
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def resolve_config(spec: str) -> Path:
    """A config argument is a file path or the name of a shipped preset."""
    path = Path(spec)
    if path.exists():
        return path
    candidate = resources.files(PRESET_PACKAGE) / f"{spec}.cfg"
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(
        f"no config file {spec!r}; shipped presets: {', '.join(preset_names())}")


def _write_outputs(config: ExperimentConfig, traces, out_dir: Path,
                   plot: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{config.name}.csv"
    emit_csv(traces, csv_path)
    print(f"wrote {csv_path}")
    if plot:
        svg_path = out_dir / f"{config.name}.svg"
        render_plot(traces, svg_path, title=config.name)
        print(f"wrote {svg_path}")


def _cmd_run(args) -> int:
    config = parse_config(resolve_config(args.config))
    if args.seed is not None:
        config.seed = args.seed
    if args.reps is not None:
        config.R = args.reps
    out_dir = Path(args.out or config.out or ".")
    traces = run_experiment(config)
    _write_outputs(config, traces, out_dir, args.plot)
    return 0


def _cmd_bounds_compare(args) -> int:
    config = ExperimentConfig(name="bounds_compare", kind="bounds",
                              delta=args.delta)
    config.params = {"family": "four_bounds", "n": str(args.n),
                     "grid": str(args.grid)}
    traces = run_experiment(config)
    _write_outputs(config, traces, Path(args.out), plot=True)
    return 0


def _cmd_replay(args) -> int:
    from boundslab.environments import (
        parse_log,
        replay_importance_weighted,
        replay_rejection_sampling,
    )
    from boundslab.online_policies import EXP3Policy, FixedPolicy, UCB1Policy
    import numpy as np

    with open(args.log, "r", encoding="ascii") as handle:
        K, records = parse_log(handle)
    rng = np.random.default_rng(args.seed or 0)
    if args.mode == "iw":
        if args.policy == "ucb1":
            policy = UCB1Policy(K, parametrization="improved", reward_range=K)
        elif args.policy == "exp3":
            policy = EXP3Policy(K)
        elif args.policy.startswith("fixed:"):
            policy = FixedPolicy(K, arm=int(args.policy.split(":", 1)[1]))
        else:
            raise ConfigError(f"unknown replay policy {args.policy!r}")
        trans = replay_importance_weighted(policy, records, K, rng)
        print(f"records={len(records)} K={K} "
              f"estimated_value={trans.detail['estimated_value']:.6g}")
    else:
        if args.policy == "ucb1":
            policy = UCB1Policy(K, parametrization="improved")
        elif args.policy == "exp3":
            policy = EXP3Policy(K)
        elif args.policy.startswith("fixed:"):
            policy = FixedPolicy(K, arm=int(args.policy.split(":", 1)[1]))
        else:
            raise ConfigError(f"unknown replay policy {args.policy!r}")
        trans = replay_rejection_sampling(policy, records, K, rng)
        horizon = trans.detail["effective_horizon"]
        mean = float(trans.payoffs.mean()) if horizon else float("nan")
        print(f"records={len(records)} K={K} effective_horizon={horizon} "
              f"mean_reward={mean:.6g}")
    return 0


def _cmd_selftest(args) -> int:
    import tempfile

    import numpy as np

    from boundslab.divergences import binary_kl, kl_inverse
    from boundslab.lab.config import parse_config_lines

    checks = []

    value = kl_inverse(0.3, 0.05, "upper")
    checks.append(("kl inverse round trip",
                   abs(binary_kl(0.3, value) - 0.05) < 1e-9))

    from boundslab.online_policies import hedge_distribution
    p = hedge_distribution([1.0, 2.0, 3.0], 0.5)
    checks.append(("hedge simplex", abs(sum(p) - 1.0) < 1e-9))

    tiny = parse_config_lines([
        "[experiment]", "name = selftest", "T = 50", "R = 2", "seed = 7",
        "[environment]", "kind = bernoulli", "means = 0.25, 0.75",
        "[policy exp3]", "kind = exp3",
    ])
    first = run_experiment(tiny)
    second = run_experiment(tiny)
    same = all(
        np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
        for a, b in zip(first, second)
    )
    checks.append(("runner determinism", same))

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = os.path.join(tmp, "trace.csv")
        emit_csv(first, csv_path)
        parsed = parse_csv(csv_path)
        round_trip = all(
            a.name == b.name and np.allclose(a.mean, b.mean, rtol=1e-11)
            for a, b in zip(first, parsed)
        )
        checks.append(("csv round trip", round_trip))

        svg_a = os.path.join(tmp, "a.svg")
        svg_b = os.path.join(tmp, "b.svg")
        render_plot(first, svg_a)
        render_plot(first, svg_b)
        with open(svg_a, "rb") as fa, open(svg_b, "rb") as fb:
            checks.append(("svg byte determinism", fa.read() == fb.read()))

    ok = True
    for name, passed in checks:
        print(f"{'ok' if passed else 'FAIL'} - {name}")
        ok = ok and passed
    if not ok:
        raise RuntimeError("selftest failures")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Seeded experiment harness for bounds and bandit games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config file or shipped preset")
    p_run.add_argument("config", help="config path or preset name "
                       f"({', '.join(preset_names()) or 'none shipped'})")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--reps", type=int, default=None)
    p_run.add_argument("--plot", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_bounds = sub.add_parser("bounds-compare",
                              help="emit the four mean-bound curves")
    p_bounds.add_argument("--n", type=int, default=1000)
    p_bounds.add_argument("--delta", type=float, default=0.01)
    p_bounds.add_argument("--grid", type=int, default=1001)
    p_bounds.add_argument("--out", default=".")
    p_bounds.set_defaults(fn=_cmd_bounds_compare)

    p_replay = sub.add_parser("replay", help="replay an offline bandit log")
    p_replay.add_argument("--log", required=True)
    p_replay.add_argument("--policy", required=True,
                          help="ucb1 | exp3 | fixed:<arm>")
    p_replay.add_argument("--mode", choices=("iw", "rs"), required=True)
    p_replay.add_argument("--seed", type=int, default=0)
    p_replay.set_defaults(fn=_cmd_replay)

    p_self = sub.add_parser("selftest", help="run the built-in invariants")
    p_self.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
