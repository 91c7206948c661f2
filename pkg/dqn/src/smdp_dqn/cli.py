"""Command line: train a network on an env file, aggregate rewards CSVs,
and plot metrics curves."""

from __future__ import annotations

import argparse
import sys

import torch

from . import __version__
from .config import NetConfig
from .envfile import EnvFileError, read_env_model
from .metrics import aggregate_runs, read_rewards_csv, write_metrics_csv, write_rewards_csv
from .train import dqn_train


def cmd_train(args) -> int:
    env = read_env_model(args.env)
    cfg = NetConfig(
        nhl=args.nhl,
        nn=args.nn,
        batch_size=args.bs,
        episodes=args.episodes,
        replay_capacity=args.replay_capacity,
        min_replay=args.min_replay,
        target_update_period=args.target_update_period,
    )
    result = dqn_train(env, cfg, seed=args.seed, epsilon=args.epsilon)
    meta = {
        "tool_version": __version__,
        "source": "smdp-dqn",
        "seed": args.seed,
        "nhl": args.nhl,
        "nn": args.nn,
        "bs": args.bs,
        "episodes": args.episodes,
    }
    write_rewards_csv(args.rewards_csv, result.rewards, meta)
    print(f"wrote {args.rewards_csv} ({cfg.episodes} episodes, "
          f"{result.stats.fits} fits, {result.stats.target_syncs} target syncs)")
    if args.weights_out:
        torch.save(result.networks.model.state_dict(), args.weights_out)
        print(f"wrote {args.weights_out}")
    return 0


def cmd_curves(args) -> int:
    runs = [read_rewards_csv(path)[0] for path in args.rewards_csv]
    agg = aggregate_runs(runs, args.batch_size)
    write_metrics_csv(args.output, agg, {
        "tool_version": __version__,
        "source": "smdp-dqn",
        "batch_size": args.batch_size,
        "replications": len(runs),
    })
    print(f"wrote {args.output}")
    return 0


def cmd_plot(args) -> int:
    from .plot import plot_metrics

    plot_metrics(args.metrics_csv, args.output, statistic=args.statistic,
                 labels=args.label or None, title=args.title)
    print(f"wrote {args.output}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="smdp-dqn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"smdp-dqn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on an env file, emit rewards CSV")
    p.add_argument("env")
    p.add_argument("--nhl", type=int, default=3)
    p.add_argument("--nn", type=int, default=128)
    p.add_argument("--bs", type=int, default=500)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--replay-capacity", type=int, default=5000)
    p.add_argument("--min-replay", type=int, default=4000)
    p.add_argument("--target-update-period", type=int, default=100)
    p.add_argument("--rewards-csv", required=True)
    p.add_argument("--weights-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("curves", help="aggregate rewards CSVs into a metrics CSV")
    p.add_argument("rewards_csv", nargs="+")
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("plot", help="plot metrics CSVs as reward curves")
    p.add_argument("metrics_csv", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--statistic", choices=["avg", "min", "max"], default="avg")
    p.add_argument("--label", action="append")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except EnvFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
