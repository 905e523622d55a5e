"""
The self-supervised state observer
==================================

A conv net learns to regress the agent's proprioceptive state from its
last three rendered frames, trained only on the agent's own experience
(frames and true states arrive paired for free during rollouts).  Here it
learns the pendulum state from random-policy data and is compared against
a linear least-squares fit on raw pixels.

Runs in about two minutes.
"""

import numpy as np

from ifolab import envs, observer
from ifolab.rngs import child_rng, child_seed

env = envs.make_env("pendulum")

# gather paired (stacked frames, state) data from uniform-random torques
n_episodes = 15
obs = np.empty((n_episodes * 200, 3, 32, 32))
states = np.empty((n_episodes * 200, 3))
rng = child_rng(0)
stacker = envs.FrameStacker()
t = 0
for ep in range(n_episodes):
    state = env.reset(child_seed(0, ep))
    stack = stacker.reset(env.render(state))
    for _ in range(200):
        obs[t] = stack
        states[t] = state.proprio
        state, _, done = env.step(state, rng.uniform(-2, 2, 1))
        if not done:
            stack = stacker.push(env.render(state))
        t += 1

train = observer.ObserverDataset(obs[:2400], states[:2400])
held_out = observer.ObserverDataset(obs[2400:], states[2400:])

params = observer.build_observer(state_dim=3, image_size=32, seed=1)
print("observer parameters:", params.net.param_count)
print("initial train MSE:", round(observer.dataset_mse(params, train), 4))

for epochs_done in (10, 20, 40):
    observer.train_observer(params, train, epochs=10, seed=2)
    print(f"after {epochs_done:>2} epochs: train MSE {observer.dataset_mse(params, train):.4f}")

# linear least squares on flattened pixels, the natural baseline
x = train.observations.reshape(len(train), -1)
x = np.concatenate([x, np.ones((len(train), 1))], axis=1)
coef, *_ = np.linalg.lstsq(x, train.targets, rcond=None)
print("linear pixel-space baseline train MSE:",
      round(float(np.mean((x @ coef - train.targets) ** 2)), 4))

preds = observer.predict(params, held_out.observations)
err = preds - held_out.targets
print("\nheld-out RMSE per state dim (cos, sin, theta_dot):",
      np.round(np.sqrt(np.mean(err ** 2, axis=0)), 3))
print("held-out mean L2 error:", round(float(np.mean(np.sqrt(np.sum(err ** 2, axis=1)))), 3))
