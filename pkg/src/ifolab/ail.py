"""Adversarial machinery shared by the three imitation algorithms.

All three learners share one structure: a discriminator over transition
pairs is trained to output 1 on imitator pairs and 0 on expert pairs,
and the imitator's reward for a transition is -log D applied to that
transition's pair (high reward when the discriminator thinks the pair is
expert-like).  They differ only in what a "pair" is made of:

* ``gaifo``     -- true proprioceptive states on both sides (the expert
                   side needs privileged access to demo states).
* ``vgaifo``    -- stacked image observations on both sides; the pair is
                   fed to a conv discriminator as 3+3=6 channels.
* ``vgaifo-so`` -- observer-predicted states on both sides; the observer
                   is trained on the fresh rollout first, then frozen for
                   the rest of the iteration.

Pairs are always (x_t, x_{t+1}) within one episode and never straddle an
episode boundary.
"""

from dataclasses import dataclass

import numpy as np

from . import observer as observer_mod
from .diffnet import (AdamState, Network, adam_step, bce_with_logits, conv2d,
                      dense, flatten, network_checksum, relu, sigmoid, tanh)
from .ppo import PpoBatch, collect_rollout, compute_gae, ppo_update
from .rngs import child_rng, child_seed

ALGOS = ("gaifo", "vgaifo", "vgaifo-so")
_ALGO_MODES = {"gaifo": "state", "vgaifo": "image", "vgaifo-so": "observer"}

REWARD_CLAMP_EPS = 1e-6
MAX_REWARD = -float(np.log(REWARD_CLAMP_EPS))

SCORE_CHUNK = 128


@dataclass
class TransitionPairs:
    """A batch of (x_t, x_{t+1}) pairs, the discriminator's input unit."""
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        if self.first.shape != self.second.shape:
            raise ValueError("pair halves must have identical shapes")
        # vector pairs are cheap to vet; image pairs are binary by construction
        if self.first.ndim == 2:
            if not (np.all(np.isfinite(self.first)) and np.all(np.isfinite(self.second))):
                raise ValueError("non-finite values in transition pairs")

    def __len__(self):
        return self.first.shape[0]


@dataclass
class DiscriminatorParams:
    mode: str  # state | image | observer
    net: Network
    opt: AdamState


def build_discriminator(algo, state_dim, image_size, seed, lr=3e-4):
    mode = _ALGO_MODES[algo]
    if mode == "image":
        g = image_size
        for _ in range(3):
            g = (g + 2 - 3) // 2 + 1
        layers = [
            conv2d(6, 8, kernel=3, stride=2, padding=1), relu(),
            conv2d(8, 16, kernel=3, stride=2, padding=1), relu(),
            conv2d(16, 32, kernel=3, stride=2, padding=1), relu(),
            flatten(),
            dense(32 * g * g, 64), relu(),
            dense(64, 1),
        ]
    else:
        layers = [dense(2 * state_dim, 64), tanh(), dense(64, 64), tanh(), dense(64, 1)]
    net = Network(layers, seed=seed)
    return DiscriminatorParams(mode, net, AdamState.for_arrays(net.param_arrays(), lr=lr))


def make_pairs(values, episode_length):
    """Consecutive pairs within fixed-length episodes.

    ``values`` holds N = k * episode_length items; each episode of length
    L contributes L-1 pairs, so pairs never cross an episode boundary.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if episode_length < 2 or n % episode_length != 0:
        raise ValueError(f"{n} items do not divide into episodes of length {episode_length}")
    t = np.arange(n)
    firsts = t[(t % episode_length) != episode_length - 1]
    return TransitionPairs(values[firsts], values[firsts + 1])


def make_imitator_pairs(batch, algo, observer=None):
    """Pairs for the imitator side of the discriminator, per algorithm."""
    if algo == "gaifo":
        return make_pairs(batch.states, batch.episode_length)
    if batch.observations is None:
        raise ValueError(f"{algo} needs image observations; rollout was collected without rendering")
    if algo == "vgaifo":
        return make_pairs(batch.observations, batch.episode_length)
    if algo == "vgaifo-so":
        if observer is None:
            raise ValueError("vgaifo-so needs a trained observer to build pairs")
        return make_pairs(observer_mod.predict(observer, batch.observations), batch.episode_length)
    raise ValueError(f"unknown algorithm {algo!r}")


def make_expert_pairs(demos, algo, observer=None):
    """Pairs for the expert side, built from a loaded demo view."""
    n, t = demos.n_traj, demos.traj_len
    if algo == "gaifo":
        if demos.states is None:
            raise ValueError("gaifo needs privileged expert states; open the demo file in analysis mode")
        flat = demos.states.reshape(n * t, -1)
        return make_pairs(flat, t)
    obs = demos.observations.reshape(n * t, *demos.observations.shape[2:])
    if algo == "vgaifo":
        return make_pairs(obs, t)
    if algo == "vgaifo-so":
        if observer is None:
            raise ValueError("vgaifo-so needs a trained observer to build pairs")
        return make_pairs(observer_mod.predict(observer, obs), t)
    raise ValueError(f"unknown algorithm {algo!r}")


def _disc_input(pairs, idx=None):
    first = pairs.first if idx is None else pairs.first[idx]
    second = pairs.second if idx is None else pairs.second[idx]
    return np.concatenate([first, second], axis=1)


def discriminator_logits(disc, pairs):
    out = np.empty(len(pairs))
    for start in range(0, len(pairs), SCORE_CHUNK):
        idx = np.arange(start, min(start + SCORE_CHUNK, len(pairs)))
        out[idx] = disc.net.predict(_disc_input(pairs, idx))[:, 0]
    return out


def discriminator_loss(disc, imitator_pairs, expert_pairs):
    """Full-set value of the objective: E_i[-log D] + E_e[-log(1-D)]."""
    li = bce_with_logits(discriminator_logits(disc, imitator_pairs), 1.0)[0]
    le = bce_with_logits(discriminator_logits(disc, expert_pairs), 0.0)[0]
    return float(li.mean() + le.mean())


def discriminator_update(disc, imitator_pairs, expert_pairs, epochs=1, minibatch=64, lr=3e-4, seed=0):
    """Train D toward 1 on imitator pairs and 0 on expert pairs.

    Each epoch walks the larger side once in a shuffled pass while the
    smaller side is resampled with replacement, so every minibatch is
    balanced even when only a handful of demo trajectories exist.
    Returns the mean minibatch loss of the final epoch.
    """
    if len(imitator_pairs) == 0 or len(expert_pairs) == 0:
        raise ValueError("both pair sets must be nonempty")
    disc.opt.lr = lr
    rng = child_rng(seed, 0)
    n_i, n_e = len(imitator_pairs), len(expert_pairs)
    final_losses = []
    for _ in range(epochs):
        losses = []
        if n_i >= n_e:
            big_perm = rng.permutation(n_i)
        else:
            big_perm = rng.permutation(n_e)
        big_n = big_perm.shape[0]
        for start in range(0, big_n, minibatch):
            chunk = big_perm[start:start + minibatch]
            b = chunk.shape[0]
            if n_i >= n_e:
                idx_i, idx_e = chunk, rng.integers(0, n_e, size=b)
            else:
                idx_i, idx_e = rng.integers(0, n_i, size=b), chunk
            x = np.concatenate([_disc_input(imitator_pairs, idx_i),
                                _disc_input(expert_pairs, idx_e)])
            logits, cache = disc.net.forward(x)
            logits = logits[:, 0]
            labels = np.concatenate([np.ones(b), np.zeros(b)])
            per_sample, grad = bce_with_logits(logits, labels)
            loss = float(per_sample[:b].mean() + per_sample[b:].mean())
            if not np.isfinite(loss):
                raise RuntimeError("non-finite discriminator loss; training halted")
            grad = grad / b  # each side contributes the mean of its half
            disc.net.backward(cache, grad[:, None])
            adam_step(disc.net, disc.opt)
            losses.append(loss)
        final_losses = losses
    return float(np.mean(final_losses))


def synthesize_reward(disc, pairs, eps=REWARD_CLAMP_EPS):
    """r = -log(clamp(D, eps, 1-eps)) for each pair.

    High when the discriminator believes the pair is expert-like (D
    small).  Bounds are asserted inline: every reward must lie in
    [0, -log eps].
    """
    d = sigmoid(discriminator_logits(disc, pairs))
    rewards = -np.log(np.clip(d, eps, 1.0 - eps))
    if rewards.min() < 0.0 or rewards.max() > -np.log(eps):
        raise AssertionError("synthesized reward escaped its clamp bounds")
    return rewards


@dataclass
class IterationConfig:
    horizon: int = 2000
    observer_epochs: int = 1
    observer_lr: float = 1e-3
    observer_minibatch: int = 64
    disc_epochs: int = 1
    disc_lr: float = 3e-4
    disc_minibatch: int = 64
    ppo_epochs: int = 10
    ppo_minibatch: int = 64
    ppo_clip: float = 0.2
    ppo_lr: float = 3e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95


@dataclass
class IterationStats:
    steps: int
    disc_loss: float
    mean_reward: float
    mean_env_return: float
    observer_mse: float = float("nan")
    observer_demo_l2: float = float("nan")


def run_algorithm_iteration(algo, policy, value, disc, observer, env, demos, cfg,
                            seed, iteration, render=None, observer_replay=None,
                            expert_pairs=None):
    """One full adversarial iteration.

    Order: collect a rollout; (vgaifo-so only) train the observer on the
    fresh rollout and freeze it; update the discriminator; score the
    rollout's pairs into rewards; run the PPO update.  The last step of
    each episode has no successor pair, so it is dropped from the PPO
    batch; every kept step's reward comes from its own (x_t, x_{t+1}).

    ``observer_replay``, when given, is a caller-owned FIFO list of
    previous iterations' datasets to train on alongside the fresh data.
    ``expert_pairs`` may carry precomputed demo pairs for the algorithms
    whose expert representation is static (gaifo, vgaifo); vgaifo-so
    always re-scores the demos through the current observer.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    if render is None:
        render = algo != "gaifo"
    batch = collect_rollout(policy, value, env, cfg.horizon, child_seed(seed, 21, iteration), render=render)

    obs_mse = float("nan")
    demo_l2 = float("nan")
    frozen_checksum = None
    if algo == "vgaifo-so":
        fresh = observer_mod.ObserverDataset(batch.observations, batch.states)
        if observer_replay is not None:
            observer_replay.append(fresh)
            train_set = observer_mod.concat_datasets(observer_replay)
        else:
            train_set = fresh
        obs_mse = observer_mod.train_observer(
            observer, train_set, cfg.observer_epochs, minibatch=cfg.observer_minibatch,
            lr=cfg.observer_lr, seed=child_seed(seed, 22, iteration))
        frozen_checksum = network_checksum(observer.net)
        if demos.states is not None:
            demo_l2 = observer_mod.demo_prediction_error(observer, demos)

    imit_pairs = make_imitator_pairs(batch, algo, observer)
    if algo == "vgaifo-so" or expert_pairs is None:
        expert_pairs = make_expert_pairs(demos, algo, observer)
    disc_loss = discriminator_update(
        disc, imit_pairs, expert_pairs, epochs=cfg.disc_epochs,
        minibatch=cfg.disc_minibatch, lr=cfg.disc_lr, seed=child_seed(seed, 23, iteration))

    rewards = synthesize_reward(disc, imit_pairs)

    ep_len = batch.episode_length
    t = np.arange(cfg.horizon)
    keep = (t % ep_len) != ep_len - 1
    batch.rewards[keep] = rewards
    ppo_batch = PpoBatch(batch.states[keep], batch.actions[keep], batch.log_probs[keep])
    dones = (t[keep] % ep_len) == ep_len - 2
    values = batch.values[keep]
    gae = compute_gae(rewards, values, dones, gamma=cfg.gamma, lam=cfg.gae_lambda)
    ppo_update(policy, value, ppo_batch, gae, epochs=cfg.ppo_epochs,
               minibatch=cfg.ppo_minibatch, clip=cfg.ppo_clip, lr=cfg.ppo_lr,
               seed=child_seed(seed, 24, iteration))

    if frozen_checksum is not None and network_checksum(observer.net) != frozen_checksum:
        raise RuntimeError("observer parameters changed while frozen")

    n_ep = cfg.horizon // ep_len
    mean_env_return = float(batch.env_rewards.sum() / n_ep)
    return IterationStats(cfg.horizon, disc_loss, float(rewards.mean()),
                          mean_env_return, obs_mse, demo_l2)
