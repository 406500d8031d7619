"""Command line front end.

Subcommands:

  expert             write a demonstration file for a config's environment
  train              one reward-learning run, record CSV into the run dir
  compare            all seeds x algorithms from a config, plus a summary
  verify-invariance  randomized shaping-invariance and alignment suites
  verify-bounds      randomized sweeps against the closed-form error bounds

Output goes under --out, else the config's run.out_dir, else $MEAIRL_OUT,
else ./runs. Exit codes: 0 ok, 1 runtime or verification failure, 2
malformed configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .adversarial import ExpertBuffer
from .bounds import run_bound_sweep, write_sweep_csv
from .config import (ConfigError, ExperimentConfig, build_env, load_config,
                     save_config)
from .mdp import DemoFormatError, TabularEnv
from .soft_dp import (finite_horizon_policy_value, soft_optimal_policy,
                      soft_value_iteration)
from .suites import run_alignment_suite, run_invariance_suite
from .training import generate_expert, run_meairl

SUMMARY_CSV_HEADER = "algorithm,seed,final_return,best_return,steps_to_target"


def resolve_out_dir(cli_out: str, config_out: str, label: str) -> str:
    root = cli_out or config_out or os.environ.get("MEAIRL_OUT", "runs")
    path = os.path.join(root, label) if label else root
    os.makedirs(path, exist_ok=True)
    return path


def expert_return_target(env, config: ExperimentConfig) -> float:
    """The bar a learner is compared against.

    Tabular: the exact truncated-horizon start-weighted value of the
    demonstration policy. Learners are evaluated by sampling episodes of
    `episode_horizon` steps, so the bar uses the same protocol; the
    infinite-horizon value would overstate it by the truncation tail.
    Continuous: the configured expert threshold (there is no closed form).
    """
    if isinstance(env, TabularEnv):
        soft_policy = soft_optimal_policy(soft_value_iteration(env.mdp))
        v = finite_horizon_policy_value(env.mdp, soft_policy, env.episode_horizon)
        return float(env.mdp.init_dist @ v)
    if math.isnan(config.run.expert_threshold):
        raise ConfigError("run.expert_threshold must be set for continuous envs")
    return config.run.expert_threshold


def attainment_threshold(target: float) -> float:
    # "within 10% of the expert", oriented correctly for negative returns
    return target - 0.1 * abs(target)


def steps_to_threshold(record, threshold: float):
    for row in record.rows:
        if row.return_mean >= threshold:
            return row.step
    return None


def render_steps(steps) -> str:
    return "X" if steps is None else str(steps)


@dataclass
class AggregateRow:
    algorithm: str
    seed: int
    final_return: float
    best_return: float
    steps_to_target: object  # int or None


@dataclass
class AggregateSummary:
    """Across-seed view of records sharing one evaluation grid."""

    steps: np.ndarray
    return_mean: np.ndarray  # per step, across records
    return_std: np.ndarray
    steps_to_expert: object  # first step whose mean reaches the bar, or None


def aggregate(records, expert_return: float) -> AggregateSummary:
    """records: TrainingRecord objects or CSV paths, one per seed."""
    from .training import TrainingRecord
    loaded = [r if hasattr(r, "rows") else TrainingRecord.from_csv(r)
              for r in records]
    if not loaded:
        raise ValueError("aggregate needs at least one record")
    grids = [np.array([row.step for row in rec.rows]) for rec in loaded]
    for grid in grids[1:]:
        if not np.array_equal(grid, grids[0]):
            raise ValueError("records do not share an evaluation grid")
    returns = np.array([[row.return_mean for row in rec.rows] for rec in loaded])
    mean = returns.mean(axis=0)
    std = returns.std(axis=0)
    attained = np.nonzero(mean >= expert_return)[0]
    steps_to = int(grids[0][attained[0]]) if attained.size else None
    return AggregateSummary(grids[0], mean, std, steps_to)


def per_seed_rows(results: dict, threshold: float) -> list:
    """results maps (algorithm, seed) to a TrainingRecord."""
    rows = []
    for (alg, seed), record in sorted(results.items()):
        returns = [r.return_mean for r in record.rows]
        rows.append(AggregateRow(alg, seed,
                                 final_return=returns[-1] if returns else float("nan"),
                                 best_return=max(returns) if returns else float("nan"),
                                 steps_to_target=steps_to_threshold(record, threshold)))
    return rows


def summary_csv_text(rows) -> str:
    lines = [SUMMARY_CSV_HEADER]
    for r in rows:
        lines.append(",".join([r.algorithm, str(r.seed), repr(r.final_return),
                               repr(r.best_return), render_steps(r.steps_to_target)]))
    return "\n".join(lines) + "\n"


def median_steps(rows, algorithm: str) -> float:
    steps = [math.inf if r.steps_to_target is None else r.steps_to_target
             for r in rows if r.algorithm == algorithm]
    return float(np.median(steps)) if steps else math.inf


def _demo_path(args, config: ExperimentConfig, out_dir: str) -> str:
    if getattr(args, "demos", None):
        return args.demos
    if config.run.demo_path:
        return config.run.demo_path
    return os.path.join(out_dir, "expert_demos.txt")


def _expert_threshold(config: ExperimentConfig):
    value = config.run.expert_threshold
    return None if math.isnan(value) else value


def cmd_expert(args) -> int:
    config = load_config(args.config)
    env = build_env(config.env)
    out_dir = resolve_out_dir(args.out, config.run.out_dir,
                              config.run.label)
    path = _demo_path(args, config, out_dir)
    generate_expert(env, config.run.expert_seed, config.run.expert_episodes, path,
                    return_threshold=_expert_threshold(config),
                    max_steps=config.run.expert_max_steps, config=config.train)
    save_config(os.path.join(out_dir, "resolved.cfg"), config)
    print(f"wrote {config.run.expert_episodes} episodes to {path}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    if args.algorithm:
        config = dataclasses.replace(
            config, train=dataclasses.replace(config.train, algorithm=args.algorithm))
    if args.seed is not None:
        config = dataclasses.replace(
            config, train=dataclasses.replace(config.train, seed=args.seed))
    env = build_env(config.env)
    out_dir = resolve_out_dir(args.out, config.run.out_dir,
                              config.run.label)
    demos = _demo_path(args, config, out_dir)
    if not os.path.exists(demos):
        generate_expert(env, config.run.expert_seed, config.run.expert_episodes,
                        demos, return_threshold=_expert_threshold(config),
                        max_steps=config.run.expert_max_steps, config=config.train)
    expert = ExpertBuffer.from_file(demos)
    record = run_meairl(env, expert, config.train)
    csv_path = os.path.join(
        out_dir, f"train_{config.train.algorithm}_seed{config.train.seed}.csv")
    record.to_csv(csv_path)
    save_config(os.path.join(out_dir, "resolved.cfg"), config)
    final = record.rows[-1].return_mean if record.rows else float("nan")
    print(f"wrote {csv_path} (final return {final:.4f})")
    return 0


def cmd_compare(args) -> int:
    config = load_config(args.config)
    env = build_env(config.env)
    out_dir = resolve_out_dir(args.out, config.run.out_dir,
                              config.run.label)
    demos = _demo_path(args, config, out_dir)
    if not os.path.exists(demos):
        generate_expert(env, config.run.expert_seed, config.run.expert_episodes,
                        demos, return_threshold=_expert_threshold(config),
                        max_steps=config.run.expert_max_steps, config=config.train)
    expert = ExpertBuffer.from_file(demos)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    results = {}
    for alg in algorithms:
        for seed in config.run.seeds:
            train_cfg = dataclasses.replace(config.train, algorithm=alg, seed=seed)
            record = run_meairl(env, expert, train_cfg)
            record.to_csv(os.path.join(out_dir, f"{alg}_seed{seed}.csv"))
            results[(alg, seed)] = record
            final = record.rows[-1].return_mean if record.rows else float("nan")
            print(f"{alg} seed {seed}: final return {final:.4f}")
    target = expert_return_target(env, config)
    threshold = attainment_threshold(target)
    rows = per_seed_rows(results, threshold)
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(summary_csv_text(rows))
    agg_lines = ["algorithm,final_return_mean,final_return_std,steps_to_target"]
    for alg in algorithms:
        summary = aggregate([results[(alg, seed)] for seed in config.run.seeds],
                            threshold)
        agg_lines.append(",".join([alg, repr(float(summary.return_mean[-1])),
                                   repr(float(summary.return_std[-1])),
                                   render_steps(summary.steps_to_expert)]))
    with open(os.path.join(out_dir, "aggregate.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(agg_lines) + "\n")
    save_config(os.path.join(out_dir, "resolved.cfg"), config)
    print(f"expert target {target:.4f}, attainment threshold {threshold:.4f}")
    print(SUMMARY_CSV_HEADER)
    for r in rows:
        print(f"{r.algorithm},{r.seed},{r.final_return:.4f},{r.best_return:.4f},"
              f"{render_steps(r.steps_to_target)}")
    for alg in algorithms:
        med = median_steps(rows, alg)
        print(f"median steps to target [{alg}]: "
              f"{render_steps(None if math.isinf(med) else int(med))}")
    return 0


def cmd_verify_invariance(args) -> int:
    inv = run_invariance_suite(n_cases=args.cases, tol=args.tol, seed=args.seed)
    align = run_alignment_suite(n_cases=args.alignment_cases, tol=args.tol,
                                seed=args.seed)
    print(inv.summary_line())
    print(align.summary_line())
    if args.out:
        out_dir = resolve_out_dir(args.out, "", "")
        with open(os.path.join(out_dir, "invariance_report.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(inv.summary_line() + "\n" + align.summary_line() + "\n")
    return 0 if (inv.passed and align.passed) else 1


def cmd_verify_bounds(args) -> int:
    out_dir = resolve_out_dir(args.out, "", "")
    status = 0
    for kind, name in (("reward", "bounds_reward.csv"),
                       ("performance", "bounds_performance.csv")):
        rows = run_bound_sweep(kind, args.instances, seed=args.seed)
        write_sweep_csv(os.path.join(out_dir, name), rows)
        n_fail = sum(1 for r in rows if not r.passed)
        worst = max(r.ratio for r in rows)
        verdict = "PASS" if n_fail == 0 else "FAIL"
        print(f"{kind} bound sweep: {verdict} over {len(rows)} instances "
              f"(worst observed/bound ratio {worst:.3e}, {n_fail} violations)")
        if n_fail:
            status = 1
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="meairl",
        description="model-enhanced adversarial reward learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expert", help="generate a demonstration file")
    p.add_argument("--config", required=True)
    p.add_argument("--demos", default="", help="demo file path override")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_expert)

    p = sub.add_parser("train", help="run one reward-learning training")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithm", default="",
                   choices=["", "meairl", "airl_sample_baseline", "bc_none"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--demos", default="")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="run every configured seed and algorithm")
    p.add_argument("--config", required=True)
    p.add_argument("--algorithms", default="meairl,airl_sample_baseline")
    p.add_argument("--demos", default="")
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify-invariance",
                       help="randomized shaping-invariance and alignment suites")
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("--alignment-cases", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_verify_invariance)

    p = sub.add_parser("verify-bounds",
                       help="randomized sweeps against the closed-form bounds")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_verify_bounds)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if str(getattr(args, "config", "")) in str(exc) else 1
    except DemoFormatError as exc:
        print(f"demo file error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001  surface anything else as exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
