"""
Experts and video-only demonstration files
==========================================

An expert policy is trained with PPO on the pendulum's task reward, then
rolled out deterministically to record demonstrations.  The demo file
stores binary frames (readable by any learner) plus a ground-truth state
section that only analysis code may open.  Actions are never stored:
imitation-from-observation learners must work from pixels alone.

Takes a couple of minutes: trains a 150k-step expert from scratch.
"""

import numpy as np

from ifolab import demos, envs, ppo

env = envs.make_env("pendulum")

print("training expert (150k steps)...")
ckpt = demos.train_expert(env, 150_000, seed=0)
print("expert eval return:", round(ckpt.manifest["final_eval_return"], 2))

random_ret = ppo.evaluate_policy(ppo.build_policy(3, 1, seed=99), env, episodes=10, seed=5)
print("random policy return for scale:", round(random_ret, 2))

demos.save_expert_checkpoint(ckpt, "/tmp/gallery_expert")
frames, states, returns = demos.record_demos(ckpt, env, n_traj=5, seed=ckpt.manifest["eval_seed"])
demos.write_demo_file("/tmp/gallery_demos.ifod", "pendulum", 32, 3, frames, states)
print("recorded 5 trajectories, per-trajectory returns:", np.round(returns, 1))

# learners open the file in video mode: stacked observations, no states
video = demos.load_demos("/tmp/gallery_demos.ifod", mode="video")
print("\nvideo view:", video.observations.shape, "states:", video.states)

# analysis mode additionally exposes ground truth, for evaluation metrics
analysis = demos.load_demos("/tmp/gallery_demos.ifod", mode="analysis")
print("analysis view states:", analysis.states.shape)

# the stored states are faithful: rebuild rewards from them by inverting
# the known dynamics (the torque falls out of consecutive velocities)
theta = np.arctan2(analysis.states[0, :, 1], analysis.states[0, :, 0])
theta_dot = analysis.states[0, :, 2]
u = (np.diff(theta_dot) / env.spec.dt - 15.0 * np.sin(theta[:-1])) / 3.0
rebuilt = -np.sum(theta ** 2) - 0.1 * np.sum(theta_dot ** 2) - 0.001 * np.sum(u ** 2)
print(f"\ntrajectory 0: recorded return {returns[0]:.3f}, rebuilt from states {rebuilt:.3f}")
