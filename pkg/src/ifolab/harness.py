"""Experiment orchestration: configured runs, sweeps, metric extraction.

A run executes adversarial iterations until the timestep budget is
reached and writes one metrics CSV per run plus final checkpoints:

    <out_dir>/<algo>/<seed>/metrics.csv
    <out_dir>/<algo>/<seed>/checkpoints/

The CSV starts with '#'-prefixed lines echoing every config field, then a
header row and one data row per iteration; the evaluation column is
filled on iterations where evaluation ran (every ``eval_interval``
iterations and always on the last).  Runs are deterministic: identical
configs produce byte-identical CSVs on the same platform.  Wall-clock
timings are deliberately kept out of metrics.csv (they would break that
guarantee) and go to a timing.csv sidecar instead.

Config files are plain ``key = value`` text; every key can also be given
as a same-named CLI flag, with precedence flag > file > default.
"""

import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ail, observer as observer_mod, ppo
from .demos import load_demos
from .diffnet import save_network
from .envs import make_env
from .rngs import child_seed

S_POLICY, S_VALUE, S_DISC, S_OBSERVER, S_EVAL = 11, 12, 13, 14, 31

METRIC_COLUMNS = ("iteration", "total_timesteps", "mean_eval_return", "discriminator_loss",
                  "mean_synthesized_reward", "observer_train_mse", "observer_demo_L2")


@dataclass
class ExperimentConfig:
    env_id: str = "pendulum"
    algo: str = "vgaifo-so"
    seed: int = 0
    total_timesteps: int = 500_000
    horizon: int = 2000
    demo_path: str = ""
    demo_count: int = 10
    image_size: int = 32
    observer_epochs: int = 1
    observer_lr: float = 1e-3
    observer_minibatch: int = 64
    observer_replay: int = 0
    disc_epochs: int = 1
    disc_lr: float = 3e-4
    disc_minibatch: int = 64
    ppo_epochs: int = 10
    ppo_minibatch: int = 64
    ppo_clip: float = 0.2
    ppo_lr: float = 3e-4
    gamma: float = 0.9  # short episodic tasks; see train_expert
    gae_lambda: float = 0.95
    eval_interval: int = 1
    eval_episodes: int = 10
    force_render: int = 0
    out_dir: str = "runs"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key, raw):
    kind = _FIELDS[key].type
    if kind in (int, "int"):
        return int(raw)
    if kind in (float, "float"):
        return float(raw)
    return str(raw)


def load_config_file(path):
    """Parse a ``key = value`` config file; unknown keys are rejected."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, raw.strip())
    return out


def make_config(file_path=None, **overrides):
    """Build a config with precedence: override > file > default."""
    values = {}
    if file_path:
        values.update(load_config_file(file_path))
    for key, val in overrides.items():
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        if val is not None:
            values[key] = _coerce(key, val)
    return ExperimentConfig(**values)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if np.isnan(value) else repr(value)
    return str(value)


@dataclass
class RunResult:
    run_dir: Path
    metrics_path: Path
    rows: list
    final_eval_return: float


def run_experiment(cfg):
    """Execute one imitation run; see the module docstring for outputs."""
    if cfg.algo not in ail.ALGOS:
        raise ValueError(f"unknown algo {cfg.algo!r}; choose from {ail.ALGOS}")
    if not cfg.demo_path:
        raise ValueError("config needs a demo_path")
    env = make_env(cfg.env_id, image_size=cfg.image_size)
    if cfg.horizon % env.spec.max_episode_steps != 0:
        raise ValueError(f"horizon {cfg.horizon} must be a multiple of "
                         f"episode length {env.spec.max_episode_steps}")

    # gaifo needs privileged states; vgaifo-so reads states only for the
    # demo-error metric; vgaifo must not see them at all.
    if cfg.algo == "gaifo":
        demos = load_demos(cfg.demo_path, mode="analysis")
    elif cfg.algo == "vgaifo-so":
        try:
            demos = load_demos(cfg.demo_path, mode="analysis")
        except ValueError as exc:
            if "analysis section requested but absent" not in str(exc):
                raise
            demos = load_demos(cfg.demo_path, mode="video")
    else:
        demos = load_demos(cfg.demo_path, mode="video")
    if demos.env_id != cfg.env_id:
        raise ValueError(f"demo file is for env {demos.env_id!r}, config says {cfg.env_id!r}")
    if demos.image_size != cfg.image_size:
        raise ValueError(f"demo file has image_size {demos.image_size}, config says {cfg.image_size}")
    demos = demos.truncated(cfg.demo_count)

    sdim, adim = env.spec.state_dim, env.spec.action_dim
    policy = ppo.build_policy(sdim, adim, child_seed(cfg.seed, S_POLICY))
    value = ppo.build_value(sdim, child_seed(cfg.seed, S_VALUE))
    disc = ail.build_discriminator(cfg.algo, sdim, cfg.image_size, child_seed(cfg.seed, S_DISC))
    obs_params = None
    replay = None
    if cfg.algo == "vgaifo-so":
        obs_params = observer_mod.build_observer(sdim, cfg.image_size, child_seed(cfg.seed, S_OBSERVER))
        if cfg.observer_replay > 0:
            replay = []
    itcfg = ail.IterationConfig(
        horizon=cfg.horizon, observer_epochs=cfg.observer_epochs, observer_lr=cfg.observer_lr,
        observer_minibatch=cfg.observer_minibatch, disc_epochs=cfg.disc_epochs,
        disc_lr=cfg.disc_lr, disc_minibatch=cfg.disc_minibatch, ppo_epochs=cfg.ppo_epochs,
        ppo_minibatch=cfg.ppo_minibatch, ppo_clip=cfg.ppo_clip, ppo_lr=cfg.ppo_lr,
        gamma=cfg.gamma, gae_lambda=cfg.gae_lambda)
    render = True if cfg.force_render else None

    run_dir = Path(cfg.out_dir) / cfg.algo / str(cfg.seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = run_dir / "metrics.csv"
    timing_path = run_dir / "timing.csv"

    iterations = -(-cfg.total_timesteps // cfg.horizon)
    # the expert-side pair representation is static except under vgaifo-so
    static_expert_pairs = None
    if cfg.algo in ("gaifo", "vgaifo"):
        static_expert_pairs = ail.make_expert_pairs(demos, cfg.algo)
    rows = []
    timings = []
    total_steps = 0
    final_eval = float("nan")
    with open(metrics_path, "w") as f:
        f.write("# ifolab run configuration\n")
        for field in dataclasses.fields(cfg):
            f.write(f"# {field.name} = {getattr(cfg, field.name)}\n")
        f.write(",".join(METRIC_COLUMNS) + "\n")
        for i in range(iterations):
            t0 = time.perf_counter()
            if replay is not None and len(replay) >= cfg.observer_replay:
                # keep room for the fresh dataset: train on the last
                # observer_replay iterations in total
                del replay[:len(replay) - (cfg.observer_replay - 1)]
            stats = ail.run_algorithm_iteration(
                cfg.algo, policy, value, disc, obs_params, env, demos, itcfg,
                cfg.seed, i, render=render, observer_replay=replay,
                expert_pairs=static_expert_pairs)
            total_steps += stats.steps
            eval_return = None
            if (i + 1) % cfg.eval_interval == 0 or i + 1 == iterations:
                eval_return = ppo.evaluate_policy(policy, env, episodes=cfg.eval_episodes,
                                                  seed=child_seed(cfg.seed, S_EVAL))
                final_eval = eval_return
            row = {
                "iteration": i + 1,
                "total_timesteps": total_steps,
                "mean_eval_return": eval_return,
                "discriminator_loss": stats.disc_loss,
                "mean_synthesized_reward": stats.mean_reward,
                "observer_train_mse": stats.observer_mse,
                "observer_demo_L2": stats.observer_demo_l2,
            }
            rows.append(row)
            f.write(",".join(_fmt(row[c]) for c in METRIC_COLUMNS) + "\n")
            timings.append(time.perf_counter() - t0)

    with open(timing_path, "w") as f:
        f.write("iteration,wall_clock_seconds\n")
        for i, dt in enumerate(timings):
            f.write(f"{i + 1},{dt:.6f}\n")

    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    save_network(policy.mean_net, ckpt_dir / "policy.ifnw")
    save_network(value.value_net, ckpt_dir / "value.ifnw")
    save_network(disc.net, ckpt_dir / "discriminator.ifnw")
    if obs_params is not None:
        save_network(obs_params.net, ckpt_dir / "observer.ifnw")
    with open(ckpt_dir / "policy_log_std.csv", "w") as f:
        f.write(",".join(repr(float(v)) for v in policy.log_std) + "\n")
    return RunResult(run_dir, metrics_path, rows, final_eval)


def sweep(base_cfg, seeds=None, demo_counts=None, algos=None):
    """Cross-product of runs over the given axes, plus an aggregate CSV.

    Aggregation groups by (algo, demo_count) and reports mean and
    standard error of the final evaluation return across seeds.  Failed
    runs are recorded and excluded from aggregation.
    """
    seeds = [base_cfg.seed] if seeds is None else list(seeds)
    demo_counts = [base_cfg.demo_count] if demo_counts is None else list(demo_counts)
    algos = [base_cfg.algo] if algos is None else list(algos)
    out_root = Path(base_cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    records = []
    for algo in algos:
        for count in demo_counts:
            out_dir = out_root if len(demo_counts) == 1 else out_root / f"demos-{count}"
            for seed in seeds:
                cfg = dataclasses.replace(base_cfg, algo=algo, demo_count=count,
                                          seed=seed, out_dir=str(out_dir))
                try:
                    result = run_experiment(cfg)
                    records.append((algo, count, seed, "ok", result.final_eval_return,
                                    str(result.run_dir)))
                except Exception as exc:  # partial failure: record and continue
                    records.append((algo, count, seed, f"failed: {exc}", None, ""))

    runs_path = out_root / "sweep_runs.csv"
    with open(runs_path, "w") as f:
        f.write("algo,demo_count,seed,status,final_eval_return,run_dir\n")
        for algo, count, seed, status, ret, rdir in records:
            status = status.replace("\n", " ").replace(",", ";")
            f.write(f"{algo},{count},{seed},{status},{_fmt(ret)},{rdir}\n")

    summary_path = out_root / "sweep_summary.csv"
    with open(summary_path, "w") as f:
        f.write("algo,demo_count,n_runs,n_failed,mean_final_return,stderr_final_return\n")
        for algo in algos:
            for count in demo_counts:
                cell = [r for r in records if r[0] == algo and r[1] == count]
                ok = [r[4] for r in cell if r[3] == "ok"]
                mean = float(np.mean(ok)) if ok else None
                stderr = float(np.std(ok, ddof=1) / np.sqrt(len(ok))) if len(ok) > 1 else None
                f.write(f"{algo},{count},{len(cell)},{len(cell) - len(ok)},"
                        f"{_fmt(mean)},{_fmt(stderr)}\n")
    return runs_path, summary_path


def curve_extract(run_dir, metric):
    """(timesteps, values) series for one metric of one run; no smoothing."""
    if metric not in METRIC_COLUMNS or metric in ("iteration", "total_timesteps"):
        raise ValueError(f"unknown metric {metric!r}; choose from "
                         f"{[c for c in METRIC_COLUMNS if c not in ('iteration', 'total_timesteps')]}")
    metrics_path = Path(run_dir) / "metrics.csv"
    if not metrics_path.exists():
        raise FileNotFoundError(f"no metrics.csv under {run_dir}")
    lines = [ln for ln in metrics_path.read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    t_col = header.index("total_timesteps")
    m_col = header.index(metric)
    ts, vals = [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        if cells[m_col] != "":
            ts.append(int(cells[t_col]))
            vals.append(float(cells[m_col]))
    if not ts:
        raise ValueError(f"metric {metric!r} absent from this run")
    return np.array(ts), np.array(vals)
