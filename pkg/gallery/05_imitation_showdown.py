"""
Three ways to imitate from observation
======================================

The same adversarial loop with three discriminator diets:

* gaifo      -- true state pairs on both sides (privileged expert access)
* vgaifo     -- raw stacked-image pairs on both sides
* vgaifo-so  -- observer-predicted state pairs on both sides

The policy never sees the task reward; it is logged for evaluation only.
This comparison (60k steps each) typically shows gaifo converging first,
vgaifo-so close behind, and vgaifo trailing -- the sample-efficiency gap
the state observer exists to close.

Takes roughly ten minutes end to end (expert training included).
"""

from pathlib import Path

from ifolab import demos, envs, harness

workdir = Path("/tmp/gallery_showdown")
workdir.mkdir(exist_ok=True)
demo_path = workdir / "demos.ifod"

env = envs.make_env("pendulum")
print("training expert (150k steps)...")
ckpt = demos.train_expert(env, 150_000, seed=0)
expert_return = ckpt.manifest["final_eval_return"]
demos.record_demo_file(ckpt, demo_path, n_traj=10, seed=ckpt.manifest["eval_seed"])
print(f"expert return {expert_return:.1f}; 10 demo trajectories recorded\n")

finals = {}
for algo in ("gaifo", "vgaifo-so", "vgaifo"):
    cfg = harness.make_config(
        env_id="pendulum", algo=algo, seed=0, total_timesteps=60_000,
        demo_path=str(demo_path), demo_count=10, eval_interval=5,
        out_dir=str(workdir / "runs"))
    result = harness.run_experiment(cfg)
    ts, vals = harness.curve_extract(result.run_dir, "mean_eval_return")
    curve = "  ".join(f"{t // 1000}k:{v:.0f}" for t, v in zip(ts, vals))
    print(f"{algo:<10} {curve}")
    finals[algo] = vals[-1]

print("\nfinal returns:", {k: round(v, 1) for k, v in finals.items()})
print(f"(expert {expert_return:.1f})")

so_dir = workdir / "runs" / "vgaifo-so" / "0"
ts, l2 = harness.curve_extract(so_dir, "observer_demo_L2")
print("\nobserver demo-state error (vgaifo-so), first to last iterations:")
print("  ".join(f"{v:.2f}" for v in l2[::4]))
