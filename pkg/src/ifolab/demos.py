"""Expert production and demonstration files.

Experts are trained with PPO on the environment's task reward, then
rolled out deterministically (mean actions) to record demonstrations.

Demo file format ("IFOD", little-endian):

    magic b"IFOD" | version u32 | env_id_len u32 | env_id utf-8 |
    image_size u32 | state_dim u32 | n_traj u32 | traj_len u32 |
    per trajectory:
        frames  traj_len * G * G bytes, u8 pixels in {0, 255}
        states  traj_len * state_dim little-endian f64   (analysis section)

Actions are never stored.  The analysis section holds ground-truth expert
states for evaluation code only: loading in ``video`` mode seeks straight
past those bytes without deserializing them, which is what keeps learners
honest about never touching privileged expert state.  A file written with
``include_analysis=False`` simply ends after the frames; the reader tells
the two layouts apart by total length.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ppo
from .diffnet import Network, load_network, save_network
from .envs import make_env, stack_frames
from .rngs import child_seed

DEMO_MAGIC = b"IFOD"
DEMO_VERSION = 1

# stream ids for seed derivation
S_POLICY, S_VALUE, S_ROLLOUT, S_EVAL = 11, 12, 21, 31


# ---------------------------------------------------------------------------
# Demo files
# ---------------------------------------------------------------------------

def write_demo_file(path, env_id, image_size, state_dim, frames, states=None, include_analysis=True):
    """Serialize demonstration trajectories.

    ``frames`` is (n, T, G, G) with binary values (floats in {0,1} or u8
    in {0,255}); ``states`` is (n, T, state_dim) ground truth, required
    unless ``include_analysis`` is False.
    """
    frames = np.asarray(frames)
    n, t, g, g2 = frames.shape
    if g != g2 or g != image_size:
        raise ValueError(f"frames shaped {frames.shape} do not match image_size {image_size}")
    if frames.dtype != np.uint8:
        frames = (np.asarray(frames, dtype=np.float64) * 255.0).astype(np.uint8)
    if include_analysis:
        states = np.asarray(states, dtype=np.float64)
        if states.shape != (n, t, state_dim):
            raise ValueError(f"states shaped {states.shape}, expected {(n, t, state_dim)}")
    env_bytes = env_id.encode("utf-8")
    chunks = [DEMO_MAGIC,
              struct.pack("<II", DEMO_VERSION, len(env_bytes)), env_bytes,
              struct.pack("<IIII", image_size, state_dim, n, t)]
    for k in range(n):
        chunks.append(frames[k].tobytes())
        if include_analysis:
            chunks.append(np.ascontiguousarray(states[k], dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


@dataclass
class DemoView:
    """Loaded demonstrations: stacked observations, states only in analysis mode."""
    env_id: str
    image_size: int
    state_dim: int
    n_traj: int
    traj_len: int
    observations: np.ndarray       # (n, T, 3, G, G) float64
    states: np.ndarray | None      # (n, T, state_dim) or None in video mode
    mode: str

    def truncated(self, n_traj):
        """View restricted to the first ``n_traj`` trajectories."""
        if not 1 <= n_traj <= self.n_traj:
            raise ValueError(f"demo file has {self.n_traj} trajectories, requested {n_traj}")
        states = None if self.states is None else self.states[:n_traj]
        return DemoView(self.env_id, self.image_size, self.state_dim, n_traj,
                        self.traj_len, self.observations[:n_traj], states, self.mode)


def load_demos(path, mode="video"):
    """Read a demo file.

    ``video`` mode exposes stacked observations only; the analysis bytes
    are skipped, not parsed.  ``analysis`` mode additionally exposes the
    ground-truth state array and fails cleanly if the file has none.
    """
    if mode not in ("video", "analysis"):
        raise ValueError(f"mode must be 'video' or 'analysis', got {mode!r}")
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(nbytes, what):
        nonlocal off
        if off + nbytes > len(data):
            raise ValueError(f"truncated demo file: needed {nbytes} bytes for {what} at byte offset {off}")
        out = data[off:off + nbytes]
        off += nbytes
        return out

    if take(4, "magic") != DEMO_MAGIC:
        raise ValueError(f"{path}: bad magic, not a demo file")
    version, env_len = struct.unpack("<II", take(8, "header"))
    if version != DEMO_VERSION:
        raise ValueError(f"{path}: unsupported demo file version {version}")
    env_id = take(env_len, "env id").decode("utf-8")
    g, state_dim, n, t = struct.unpack("<IIII", take(16, "header"))
    frame_bytes = t * g * g
    state_bytes = t * state_dim * 8
    body = len(data) - off
    if body == n * (frame_bytes + state_bytes):
        has_analysis = True
    elif body == n * frame_bytes:
        has_analysis = False
    else:
        raise ValueError(f"{path}: body is {body} bytes from offset {off}; expected "
                         f"{n * (frame_bytes + state_bytes)} (with analysis) or {n * frame_bytes} (without)")
    if mode == "analysis" and not has_analysis:
        raise ValueError(f"{path}: analysis section requested but absent")

    observations = np.empty((n, t, 3, g, g))
    states = np.empty((n, t, state_dim)) if mode == "analysis" else None
    for k in range(n):
        raw = np.frombuffer(take(frame_bytes, f"trajectory {k} frames"), dtype=np.uint8)
        frames = raw.reshape(t, g, g).astype(np.float64) / 255.0
        history = []
        for i in range(t):
            history.append(frames[i])
            observations[k, i] = stack_frames(history)
        if has_analysis:
            if mode == "analysis":
                sraw = take(state_bytes, f"trajectory {k} states")
                states[k] = np.frombuffer(sraw, dtype="<f8").reshape(t, state_dim)
            else:
                off += state_bytes  # video mode: never deserialize analysis bytes
    return DemoView(env_id, g, state_dim, n, t, observations, states, mode)


# ---------------------------------------------------------------------------
# Expert training and recording
# ---------------------------------------------------------------------------

@dataclass
class ExpertCheckpoint:
    policy: ppo.PolicyParams
    value: ppo.ValueParams
    manifest: dict


def train_expert(env, total_timesteps, seed, horizon=2000, *, ppo_epochs=10,
                 ppo_minibatch=64, ppo_clip=0.2, ppo_lr=3e-4, gamma=0.9,
                 gae_lambda=0.95, eval_episodes=10):
    """PPO on the task reward (the one place the task reward trains anything).

    gamma defaults to 0.9: with 200-step episodes and dense rewards the
    short credit horizon learns far faster on these tasks.
    """
    sdim, adim = env.spec.state_dim, env.spec.action_dim
    policy = ppo.build_policy(sdim, adim, child_seed(seed, S_POLICY))
    value = ppo.build_value(sdim, child_seed(seed, S_VALUE))
    iterations = -(-total_timesteps // horizon)
    for i in range(iterations):
        batch = ppo.collect_rollout(policy, value, env, horizon, child_seed(seed, S_ROLLOUT, i), render=False)
        gae = ppo.compute_gae(batch.env_rewards, batch.values, batch.dones, gamma=gamma, lam=gae_lambda)
        ppo.ppo_update(policy, value, ppo.PpoBatch(batch.states, batch.actions, batch.log_probs),
                       gae, epochs=ppo_epochs, minibatch=ppo_minibatch, clip=ppo_clip,
                       lr=ppo_lr, seed=child_seed(seed, 24, i))
    eval_seed = child_seed(seed, S_EVAL)
    final_return = ppo.evaluate_policy(policy, env, episodes=eval_episodes, seed=eval_seed)
    manifest = {
        "env_id": env.spec.env_id,
        "total_timesteps": int(iterations * horizon),
        "seed": int(seed),
        "eval_seed": int(eval_seed),
        "eval_episodes": int(eval_episodes),
        "final_eval_return": float(final_return),
        "log_std": [float(v) for v in policy.log_std],
    }
    return ExpertCheckpoint(policy, value, manifest)


def save_expert_checkpoint(ckpt, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_network(ckpt.policy.mean_net, directory / "policy.ifnw")
    save_network(ckpt.value.value_net, directory / "value.ifnw")
    with open(directory / "manifest.json", "w") as f:
        json.dump(ckpt.manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return directory


def load_expert_checkpoint(directory):
    directory = Path(directory)
    with open(directory / "manifest.json") as f:
        manifest = json.load(f)
    mean_net = load_network(directory / "policy.ifnw")
    value_net = load_network(directory / "value.ifnw")
    policy = ppo.PolicyParams(mean_net, np.array(manifest["log_std"], dtype=np.float64),
                              np.zeros(len(manifest["log_std"])),
                              opt=None)
    value = ppo.ValueParams(value_net, opt=None)
    return ExpertCheckpoint(policy, value, manifest)


def record_demos(ckpt, env, n_traj, seed):
    """Deterministic (mean-action) expert rollouts with rendered frames.

    Episode seeds are derived exactly like ``evaluate_policy``'s, so
    recording with the manifest's eval seed reproduces the eval episodes.
    Returns (frames, states, returns) with one row per trajectory.
    """
    if ckpt.manifest["env_id"] != env.spec.env_id:
        raise ValueError(f"checkpoint was trained on {ckpt.manifest['env_id']!r}, "
                         f"cannot record on {env.spec.env_id!r}")
    t_len = env.spec.max_episode_steps
    g = env.spec.image_size
    frames = np.empty((n_traj, t_len, g, g))
    states = np.empty((n_traj, t_len, env.spec.state_dim))
    returns = np.empty(n_traj)
    for k in range(n_traj):
        state = env.reset(child_seed(seed, k))
        total = 0.0
        for i in range(t_len):
            frames[k, i] = env.render(state)
            states[k, i] = state.proprio
            action = ckpt.policy.mean_net.predict(state.proprio[None])[0]
            state, r, _ = env.step(state, action)
            total += r
        returns[k] = total
    return frames, states, returns


def record_demo_file(ckpt, out_path, n_traj, seed, image_size=32):
    env = make_env(ckpt.manifest["env_id"], image_size=image_size)
    frames, states, returns = record_demos(ckpt, env, n_traj, seed)
    write_demo_file(out_path, env.spec.env_id, image_size, env.spec.state_dim, frames, states)
    return returns
