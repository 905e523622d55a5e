"""Command line entry points.

Subcommands: train-expert, record-demos, imitate, sweep, extract.
``imitate`` and ``sweep`` accept a ``--config`` file of ``key = value``
lines; every config key is also a flag (flag > file > default).
"""

import argparse
import dataclasses
import sys

from . import demos, harness
from .envs import make_env


def _add_config_flags(parser):
    for field in dataclasses.fields(harness.ExperimentConfig):
        flags = ["--" + field.name.replace("_", "-")]
        if field.name == "env_id":
            flags.append("--env")
        parser.add_argument(*flags, dest=field.name, default=None, metavar=field.name.upper())


def _collect_overrides(args):
    return {f.name: getattr(args, f.name) for f in dataclasses.fields(harness.ExperimentConfig)}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ifolab",
                                     description="Imitation-from-observation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-expert", help="PPO on the task reward; writes a checkpoint")
    p.add_argument("--env", required=True, choices=["pendulum", "reacher"])
    p.add_argument("--timesteps", type=int, default=200_000)
    p.add_argument("--horizon", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint directory")

    p = sub.add_parser("record-demos", help="record deterministic expert demonstrations")
    p.add_argument("--expert", required=True, help="expert checkpoint directory")
    p.add_argument("--n", type=int, default=10, help="number of trajectories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--out", required=True, help="output .ifod path")

    p = sub.add_parser("imitate", help="run one imitation experiment")
    p.add_argument("--config", default=None, help="key = value config file")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="cross-product of runs over seeds/demo-counts/algos")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", default=None, help="comma-separated, e.g. 0,1,2")
    p.add_argument("--demo-counts", dest="sweep_demo_counts", default=None)
    p.add_argument("--algos", dest="sweep_algos", default=None)
    _add_config_flags(p)

    p = sub.add_parser("extract", help="print a (timesteps, value) series from a run")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")

    args = parser.parse_args(argv)

    if args.command == "train-expert":
        env = make_env(args.env)
        ckpt = demos.train_expert(env, args.timesteps, args.seed, horizon=args.horizon)
        demos.save_expert_checkpoint(ckpt, args.out)
        print(f"expert saved to {args.out}; final eval return "
              f"{ckpt.manifest['final_eval_return']:.2f}")
        return 0

    if args.command == "record-demos":
        ckpt = demos.load_expert_checkpoint(args.expert)
        returns = demos.record_demo_file(ckpt, args.out, args.n, args.seed,
                                         image_size=args.image_size)
        print(f"wrote {args.n} trajectories to {args.out}; "
              f"mean return {returns.mean():.2f}")
        return 0

    if args.command == "imitate":
        cfg = harness.make_config(args.config, **_collect_overrides(args))
        result = harness.run_experiment(cfg)
        print(f"run complete: {result.metrics_path}; "
              f"final eval return {result.final_eval_return:.2f}")
        return 0

    if args.command == "sweep":
        cfg = harness.make_config(args.config, **_collect_overrides(args))
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
        counts = ([int(s) for s in args.sweep_demo_counts.split(",")]
                  if args.sweep_demo_counts else None)
        algos = args.sweep_algos.split(",") if args.sweep_algos else None
        runs_path, summary_path = harness.sweep(cfg, seeds=seeds, demo_counts=counts, algos=algos)
        print(f"sweep complete: {runs_path}\nsummary: {summary_path}")
        return 0

    if args.command == "extract":
        ts, vals = harness.curve_extract(args.run_dir, args.metric)
        lines = ["total_timesteps," + args.metric]
        lines += [f"{t},{v!r}" for t, v in zip(ts, vals)]
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return 0

    return 1


if __name__ == "__main__":
    raise SystemExit(main())
