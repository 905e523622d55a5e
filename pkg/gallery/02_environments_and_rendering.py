"""
Environments: proprioceptive states and binary pixel observations
=================================================================

Two desk-scale tasks expose a low-dimensional proprioceptive state and a
deterministic binary rendering.  The pendulum exposes (cos theta,
sin theta, theta_dot); the point reacher exposes (x, y, xdot, ydot).
Episodes always run exactly 200 steps, and the task reward returned by
``step`` is for evaluation only.
"""

import numpy as np

from ifolab import envs


def ascii_frame(frame):
    return "\n".join("".join("#" if v else "." for v in row) for row in frame)


# --- pendulum -------------------------------------------------------------
env = envs.make_env("pendulum", image_size=32)
state = env.reset(seed=4)
print("pendulum reset near upright:", np.round(state.proprio, 3))

# let it fall under gravity with zero torque, stacking the last 3 frames
stacker = envs.FrameStacker()
stack = stacker.reset(env.render(state))
ret = 0.0
for t in range(200):
    state, reward, done = env.step(state, [0.0])
    ret += reward
    if not done:
        stack = stacker.push(env.render(state))
print(f"passive episode return (should be strongly negative): {ret:.1f}")
print("newest frame after falling:")
print(ascii_frame(stack[2]))

# determinism: same seed and actions reproduce states and frames bitwise
a = env.reset(seed=11)
b = env.reset(seed=11)
for _ in range(20):
    a, _, _ = env.step(a, [1.3])
    b, _, _ = env.step(b, [1.3])
print("\nbitwise deterministic:", np.array_equal(a.internal, b.internal),
      np.array_equal(env.render(a), env.render(b)))

# --- reacher ----------------------------------------------------------------
env = envs.make_env("reacher")
state = env.reset(seed=1)
print("\nreacher reset:", np.round(state.proprio, 3), "(target fixed at 0.5, 0.5)")
for _ in range(60):
    direction = np.array([0.5, 0.5]) - state.proprio[:2]
    state, reward, done = env.step(state, 4.0 * direction)  # clipped to +-1
print("after steering toward target:", np.round(state.proprio, 3), f"reward {reward:.4f}")
print(ascii_frame(env.render(state)))
