"""On-policy generator training: Gaussian policy, value net, GAE, clipped PPO.

The policy always consumes the imitator's own proprioceptive state; image
observations are collected alongside for the observer/discriminator but
never feed the policy.  Actions are sampled from a diagonal Gaussian with
a learned per-dim log-std; the log-prob is computed on the unclipped
sample while the environment executes the clipped action.

During imitation the ``rewards`` slot of a rollout stays NaN until the
discriminator fills it; the environment's task rewards are recorded in a
separate ``env_rewards`` array used only for reporting.  No KL guard is
applied during updates; a non-finite loss raises instead.
"""

from dataclasses import dataclass

import numpy as np

from . import diffnet
from .diffnet import AdamState, Network, adam_update, dense, tanh
from .envs import FrameStacker
from .rngs import child_rng, child_seed

LOG_STD_INIT = -0.5
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass
class PolicyParams:
    """Gaussian policy: an MLP mean plus a learned per-dim log-std."""
    mean_net: Network
    log_std: np.ndarray
    log_std_grad: np.ndarray
    opt: AdamState


@dataclass
class ValueParams:
    value_net: Network
    opt: AdamState


def build_policy(state_dim, action_dim, seed, lr=3e-4):
    net = Network([dense(state_dim, 64), tanh(), dense(64, 64), tanh(), dense(64, action_dim)], seed=seed)
    log_std = np.full(action_dim, LOG_STD_INIT)
    opt = AdamState.for_arrays(net.param_arrays() + [log_std], lr=lr)
    return PolicyParams(net, log_std, np.zeros(action_dim), opt)


def build_value(state_dim, seed, lr=3e-4):
    net = Network([dense(state_dim, 64), tanh(), dense(64, 64), tanh(), dense(64, 1)], seed=seed)
    return ValueParams(net, AdamState.for_arrays(net.param_arrays(), lr=lr))


def policy_mean(policy, states):
    states = np.asarray(states, dtype=np.float64)
    if states.ndim == 1:
        return policy.mean_net.predict(states[None])[0]
    return policy.mean_net.predict(states)


@dataclass
class RolloutBatch:
    """One on-policy collection of ``horizon`` steps (whole episodes only)."""
    states: np.ndarray          # (H, state_dim)
    observations: np.ndarray    # (H, 3, G, G) or None when rendering is off
    actions: np.ndarray         # (H, action_dim), unclipped samples
    log_probs: np.ndarray       # (H,)
    env_rewards: np.ndarray     # (H,) task reward, reporting only
    values: np.ndarray          # (H,)
    dones: np.ndarray           # (H,) bool, True on last step of an episode
    rewards: np.ndarray         # (H,) training reward, NaN until assigned
    episode_length: int


def collect_rollout(policy, value, env, horizon, seed, render=True):
    """Execute the stochastic policy for ``horizon`` steps.

    ``horizon`` must be a whole number of episodes so that consecutive
    observation pairs never straddle an episode boundary.
    """
    ep_len = env.spec.max_episode_steps
    if horizon % ep_len != 0:
        raise ValueError(f"horizon {horizon} must be a multiple of the episode length {ep_len}")
    n_episodes = horizon // ep_len
    sdim, adim = env.spec.state_dim, env.spec.action_dim
    g = env.spec.image_size

    states = np.empty((horizon, sdim))
    observations = np.empty((horizon, 3, g, g)) if render else None
    actions = np.empty((horizon, adim))
    log_probs = np.empty(horizon)
    env_rewards = np.empty(horizon)
    dones = np.zeros(horizon, dtype=bool)

    rng = child_rng(seed, 0)
    log_std = policy.log_std
    std = np.exp(log_std)
    stacker = FrameStacker()
    t = 0
    for ep in range(n_episodes):
        state = env.reset(child_seed(seed, 1, ep))
        if render:
            observations[t] = stacker.reset(env.render(state))
        for _ in range(ep_len):
            states[t] = state.proprio
            mean = policy.mean_net.predict(state.proprio[None])[0]
            action = mean + std * rng.standard_normal(adim)
            log_probs[t] = diffnet.gaussian_logprob(mean, log_std, action)
            actions[t] = action
            state, env_rewards[t], done = env.step(state, action)
            dones[t] = done
            t += 1
            if render and not done:
                observations[t] = stacker.push(env.render(state))
    values = value.value_net.predict(states)[:, 0]
    return RolloutBatch(states, observations, actions, log_probs, env_rewards,
                        values, dones, np.full(horizon, np.nan), ep_len)


@dataclass
class GaeOutput:
    advantages: np.ndarray
    value_targets: np.ndarray


def compute_gae(rewards, values, dones, gamma=0.99, lam=0.95, normalize=True):
    """Generalized advantage estimation over fixed-length segments.

    ``dones[t]`` marks the last step of its segment; the bootstrap value
    past a segment end is 0.  With ``normalize`` the advantages are
    shifted/scaled to zero mean and unit std (value targets untouched).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    n = rewards.shape[0]
    if not (values.shape[0] == n and dones.shape[0] == n):
        raise ValueError("rewards, values and dones must be aligned")
    if n == 0 or not dones[-1]:
        raise ValueError("batch must end on a segment boundary")
    if not np.all(np.isfinite(rewards)):
        raise ValueError("rewards contain non-finite entries (not assigned yet?)")
    adv = np.empty(n)
    last = 0.0
    for t in range(n - 1, -1, -1):
        if dones[t]:
            delta = rewards[t] - values[t]
            last = delta
        else:
            delta = rewards[t] + gamma * values[t + 1] - values[t]
            last = delta + gamma * lam * last
        adv[t] = last
    targets = adv + values
    if normalize:
        std = adv.std()
        if std < 1e-12:
            adv = np.zeros_like(adv)  # degenerate batch: nothing to rank
        else:
            adv = (adv - adv.mean()) / std
    return GaeOutput(adv, targets)


def clipped_surrogate(ratio, adv, clip):
    """Elementwise clipped surrogate and the active-gradient mask."""
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    surr = np.minimum(unclipped, clipped)
    return surr, unclipped <= clipped


@dataclass
class PpoBatch:
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray


def ppo_update(policy, value, batch, gae, *, epochs=10, minibatch=64, clip=0.2, lr=3e-4, seed=0):
    """Clipped-surrogate policy update plus MSE value regression.

    The two networks use separate optimizers: the surrogate never touches
    the value net and the value loss never touches the policy.  Returns
    mean loss statistics over all minibatches.
    """
    n = batch.states.shape[0]
    policy.opt.lr = lr
    value.opt.lr = lr
    rng = child_rng(seed, 0)
    pol_losses = []
    val_losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, minibatch):
            idx = perm[start:start + minibatch]
            s = batch.states[idx]
            a = batch.actions[idx]
            lp_old = batch.log_probs[idx]
            adv = gae.advantages[idx]
            vt = gae.value_targets[idx]
            b = idx.shape[0]

            mean, cache = policy.mean_net.forward(s)
            lp = diffnet.gaussian_logprob(mean, policy.log_std, a)
            ratio = np.exp(lp - lp_old)
            surr, mask = clipped_surrogate(ratio, adv, clip)
            pol_loss = -float(surr.mean())
            if not np.isfinite(pol_loss):
                raise RuntimeError("non-finite policy loss; training halted")
            dlp = -(adv * ratio * mask) / b
            dmean, dlogstd = diffnet.gaussian_logprob_grads(mean, policy.log_std, a)
            policy.mean_net.backward(cache, dlp[:, None] * dmean)
            policy.log_std_grad += (dlp[:, None] * dlogstd).sum(axis=0)
            adam_update(policy.mean_net.param_arrays() + [policy.log_std],
                        policy.mean_net.grad_arrays() + [policy.log_std_grad],
                        policy.opt)
            policy.mean_net.zero_grads()
            policy.log_std_grad[...] = 0.0
            np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=policy.log_std)

            v, vcache = value.value_net.forward(s)
            val_loss, vgrad = diffnet.mse_loss(v, vt[:, None])
            if not np.isfinite(val_loss):
                raise RuntimeError("non-finite value loss; training halted")
            value.value_net.backward(vcache, vgrad)
            adam_update(value.value_net.param_arrays(), value.value_net.grad_arrays(), value.opt)
            value.value_net.zero_grads()

            pol_losses.append(pol_loss)
            val_losses.append(val_loss)
    return {"policy_loss": float(np.mean(pol_losses)), "value_loss": float(np.mean(val_losses))}


def evaluate_policy(policy, env, episodes=10, seed=0):
    """Mean task return of the deterministic (mean-action) policy.

    Purely observational: touches no training buffers and uses its own
    episode seeds, so evaluation cadence cannot perturb training.
    """
    total = 0.0
    for ep in range(episodes):
        state = env.reset(child_seed(seed, ep))
        ep_return = 0.0
        done = False
        while not done:
            action = policy.mean_net.predict(state.proprio[None])[0]
            state, r, done = env.step(state, action)
            ep_return += r
        total += ep_return
    return total / episodes
