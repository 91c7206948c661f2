"""Command-line entry point.

Subcommands cover the full pipeline: export a preset env file, validate it,
solve it exactly, evaluate or simulate a policy, run Q-learning, aggregate
reward curves, and run the inter-jump diagnostics. Exit codes: 0 success,
1 usage, 2 validation failure, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .bellman import (
    Policy,
    brute_force_value,
    load_table,
    policy_evaluate,
    save_table,
    solve_bellman,
)
from .coins import CoinsParams, build_coins_env
from .core import ExtendedState, validate_env
from .envfile import EnvFormatError, env_hash, read_env, write_env
from .metrics import (
    aggregate_series,
    batch_metrics,
    read_rewards_csv,
    write_errors_csv,
    write_metrics_csv,
    write_rewards_csv,
)
from .qlearn import LearningSchedule, QInit, StartRule, TrainConfig, train
from .simulate import geometric_consistency, interjump_pmf, run_episodes, write_traces

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3

ORACLE_TOL = 1e-12


class _UsageError(Exception):
    pass


class _CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _meta(env=None) -> dict:
    meta = {"tool_version": __version__}
    if env is not None:
        meta["env_hash"] = env_hash(env)
    return meta


def _load_env(path):
    try:
        return read_env(path)
    except FileNotFoundError:
        raise _CommandError(EXIT_IO, f"{path}: no such file")
    except EnvFormatError as e:
        raise _CommandError(EXIT_IO, str(e))


def _load_policy(path, env) -> Policy:
    try:
        table = load_table(path)
    except FileNotFoundError:
        raise _CommandError(EXIT_IO, f"{path}: no such file")
    except ValueError as e:
        raise _CommandError(EXIT_IO, str(e))
    if not isinstance(table, Policy):
        raise _CommandError(EXIT_IO, f"{path}: not a policy file")
    if table.horizon != env.horizon or table.n_states != env.n_states:
        raise _CommandError(EXIT_VALIDATION, f"{path}: policy shape does not match the env")
    return table


def _require_valid(env, path):
    report = validate_env(env)
    if not report.ok:
        raise _CommandError(EXIT_VALIDATION, f"{path}: invalid environment:\n{report}")


def cmd_export_env(args) -> int:
    if args.preset != "coins":
        raise _CommandError(EXIT_USAGE, f"unknown preset {args.preset!r}")
    if not args.p:
        raise _CommandError(EXIT_USAGE, "need at least one --p")
    try:
        params = CoinsParams(
            p=tuple(args.p),
            t_cheat=args.t_cheat,
            r_cheat=args.r_cheat,
            horizon=args.horizon,
        )
    except ValueError as e:
        raise _CommandError(EXIT_VALIDATION, str(e))
    env = build_coins_env(params)
    write_env(env, args.output, meta=_meta(env))
    print(f"wrote {args.output} (env hash {env_hash(env)})")
    return EXIT_OK


def cmd_validate(args) -> int:
    env = _load_env(args.env)
    report = validate_env(env)
    if report.ok:
        print("ok")
        return EXIT_OK
    print(report, file=sys.stderr)
    return EXIT_VALIDATION


def cmd_solve(args) -> int:
    env = _load_env(args.env)
    _require_valid(env, args.env)
    values, qtable, policy = solve_bellman(env)
    meta = _meta(env)
    paths = {
        "values": f"{args.out_prefix}.values.json",
        "qtable": f"{args.out_prefix}.qtable.json",
        "policy": f"{args.out_prefix}.policy.json",
    }
    save_table(values, paths["values"], env.states, env.actions, meta)
    save_table(qtable, paths["qtable"], env.states, env.actions, meta)
    save_table(policy, paths["policy"], env.states, env.actions, meta)
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    env = _load_env(args.env)
    _require_valid(env, args.env)
    policy = _load_policy(args.policy, env)
    try:
        values = policy_evaluate(env, policy)
    except ValueError as e:
        raise _CommandError(EXIT_VALIDATION, str(e))
    if args.brute_force_check:
        for x in range(env.n_states):
            try:
                direct = brute_force_value(env, policy, ExtendedState(x, 0))
            except ValueError as e:
                raise _CommandError(EXIT_VALIDATION, f"brute-force check refused: {e}")
            table_v = values.value(0, x, 0)
            if abs(direct - table_v) > ORACLE_TOL:
                raise _CommandError(
                    EXIT_VALIDATION,
                    f"brute-force cross-check failed at start state {x}: "
                    f"{direct!r} vs {table_v!r}",
                )
        print(f"brute-force cross-check passed for {env.n_states} start states")
    save_table(values, args.output, env.states, env.actions, _meta(env))
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    env = _load_env(args.env)
    _require_valid(env, args.env)
    policy = _load_policy(args.policy, env)
    if not (0 <= args.start_x < env.n_states):
        raise _CommandError(EXIT_USAGE, f"start state {args.start_x} out of range")
    traces = run_episodes(env, policy, args.start_x, args.episodes, args.seed)
    write_traces(traces, args.output, env, policy, args.seed)
    print(f"wrote {args.output} ({args.episodes} episodes)")
    return EXIT_OK


def _schedule_from_args(args) -> LearningSchedule:
    if args.schedule == "paper-step":
        return LearningSchedule.paper_step()
    try:
        return LearningSchedule.constant(args.alpha)
    except ValueError as e:
        raise _CommandError(EXIT_USAGE, str(e))


def cmd_train(args) -> int:
    env = _load_env(args.env)
    _require_valid(env, args.env)
    if args.start_x == "uniform":
        start = StartRule.uniform()
    else:
        try:
            start = StartRule.fixed(int(args.start_x))
        except ValueError:
            raise _CommandError(EXIT_USAGE, f"bad --start-x {args.start_x!r}")
    q_init = QInit.constant(0.0) if args.q_init == "zero" else QInit.uniform(0.0, 1.0)
    try:
        config = TrainConfig(
            episodes=args.episodes,
            schedule=_schedule_from_args(args),
            epsilon=args.epsilon,
            q_init=q_init,
            start_state=start,
            seed=args.seed,
        )
    except ValueError as e:
        raise _CommandError(EXIT_USAGE, str(e))
    reference = None
    if args.reference:
        ref = load_table(args.reference)
        if not hasattr(ref, "q"):
            raise _CommandError(EXIT_IO, f"{args.reference}: not an action-value table")
        reference = ref
    try:
        result = train(env, config, reference=reference)
    except ValueError as e:
        raise _CommandError(EXIT_VALIDATION, str(e))
    meta = _meta(env)
    meta.update(
        seed=args.seed,
        episodes=args.episodes,
        epsilon=args.epsilon,
        schedule=args.schedule,
        start_state=str(args.start_x),
    )
    if args.schedule == "constant":
        meta["alpha"] = args.alpha
    write_rewards_csv(args.rewards_csv, result.rewards, meta)
    print(f"wrote {args.rewards_csv}")
    if args.error_csv:
        if result.errors is None:
            raise _CommandError(EXIT_USAGE, "--error-csv needs --reference")
        write_errors_csv(args.error_csv, result.errors, meta)
        print(f"wrote {args.error_csv}")
    if args.qtable_out:
        save_table(result.q, args.qtable_out, env.states, env.actions, _meta(env))
        print(f"wrote {args.qtable_out}")
    return EXIT_OK


def cmd_curves(args) -> int:
    series = []
    metas = []
    for path in args.rewards_csv:
        try:
            rewards, meta = read_rewards_csv(path)
        except FileNotFoundError:
            raise _CommandError(EXIT_IO, f"{path}: no such file")
        except ValueError as e:
            raise _CommandError(EXIT_IO, str(e))
        series.append(batch_metrics(rewards, args.batch_size))
        metas.append(meta or {})
    agg = aggregate_series(series)
    meta = {
        "tool_version": __version__,
        "batch_size": agg.batch_size,
        "replications": agg.replications,
    }
    hashes = {m.get("env_hash") for m in metas if m.get("env_hash")}
    if len(hashes) == 1:
        meta["env_hash"] = hashes.pop()
    write_metrics_csv(args.output, agg, meta)
    print(f"wrote {args.output} ({agg.replications} replications, {len(agg)} batches)")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    env = _load_env(args.env)
    _require_valid(env, args.env)
    policy = _load_policy(args.policy, env)
    k_max = args.k_max if args.k_max is not None else env.horizon
    try:
        pmf = interjump_pmf(env, policy, args.start_x, k_max)
        check = geometric_consistency(pmf)
    except ValueError as e:
        raise _CommandError(EXIT_VALIDATION, str(e))
    print(f"inter-jump pmf from state {args.start_x} (first {min(10, k_max)} entries):")
    for k in range(min(10, k_max)):
        print(f"  P(T={k + 1}) = {pmf.probs[k]!r}")
    if pmf.tail > 0.0:
        print(f"  P(T>{k_max}) = {pmf.tail!r}")
    print(f"verdict: {check}")
    if args.output:
        payload = {
            "tool_version": __version__,
            "env_hash": env_hash(env),
            "start_x": args.start_x,
            "pmf": pmf.probs.tolist(),
            "tail": pmf.tail,
            "consistent": check.consistent,
            "degenerate": check.degenerate,
            "first_violation": check.first_violation,
            "p_hat": check.p_hat,
        }
        with open(args.output, "w") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
        print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="smdp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"smdp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-env", help="write a preset environment file")
    p.add_argument("preset", choices=["coins"])
    p.add_argument("--p", type=float, action="append", default=[],
                   help="heads probability of one coin (repeatable)")
    p.add_argument("--t-cheat", type=int, default=3)
    p.add_argument("--r-cheat", type=float, default=-10.0)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_env)

    p = sub.add_parser("validate", help="check an environment file")
    p.add_argument("env")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="exact values, action values and policy")
    p.add_argument("env")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="policy value by backward recursion")
    p.add_argument("env")
    p.add_argument("--policy", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--brute-force-check", action="store_true",
                   help="cross-check v_0(x, 0) by path enumeration (small horizons)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="sample episodes under a policy")
    p.add_argument("env")
    p.add_argument("--policy", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start-x", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="finite-horizon tabular Q-learning")
    p.add_argument("env")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--schedule", choices=["constant", "paper-step"], default="constant")
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q-init", choices=["uniform", "zero"], default="uniform")
    p.add_argument("--start-x", default="uniform",
                   help='start state id, or "uniform" (default)')
    p.add_argument("--rewards-csv", required=True)
    p.add_argument("--error-csv")
    p.add_argument("--reference", help="action-value table for sup-norm tracking")
    p.add_argument("--qtable-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("curves", help="aggregate rewards CSVs into batch curves")
    p.add_argument("rewards_csv", nargs="+")
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("diagnose", help="inter-jump pmf and geometric check")
    p.add_argument("env")
    p.add_argument("--policy", required=True)
    p.add_argument("--start-x", type=int, default=0)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except _CommandError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON at line {e.lineno} column {e.colno}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
