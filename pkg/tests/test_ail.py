"""Adversarial-machinery tests: pairing, discriminator objective, rewards."""

import numpy as np
import pytest

from ifolab import ail, demos, envs, observer, ppo
from ifolab.rngs import child_rng, child_seed

LN2 = float(np.log(2.0))


def zeroed_disc(algo="gaifo", state_dim=1):
    disc = ail.build_discriminator(algo, state_dim, 32, seed=0)
    for a in disc.net.param_arrays():
        a[...] = 0.0
    return disc


def toy_pairs(center, n, dim=1, seed=0, spread=0.05):
    rng = child_rng(seed)
    base = center + spread * rng.standard_normal((n, dim))
    return ail.TransitionPairs(base, base + spread * rng.standard_normal((n, dim)))


# ---------------------------------------------------------------------------
# pairing
# ---------------------------------------------------------------------------

def test_single_episode_fencepost():
    pairs = ail.make_pairs(np.arange(200.0)[:, None], 200)
    assert len(pairs) == 199
    assert np.all(pairs.second - pairs.first == 1.0)


def test_pairs_never_cross_episode_boundary():
    values = np.arange(400.0)[:, None]
    pairs = ail.make_pairs(values, 200)
    assert len(pairs) == 398
    assert np.all(pairs.second - pairs.first == 1.0)
    assert not np.any(pairs.first[:, 0] % 200 == 199)


def test_make_pairs_validates_episode_length():
    with pytest.raises(ValueError, match="episodes of length"):
        ail.make_pairs(np.zeros((250, 2)), 200)


def test_observer_mode_requires_observer(pendulum):
    pol = ppo.build_policy(3, 1, seed=0)
    val = ppo.build_value(3, seed=1)
    batch = ppo.collect_rollout(pol, val, pendulum, 200, seed=0, render=True)
    with pytest.raises(ValueError, match="observer"):
        ail.make_imitator_pairs(batch, "vgaifo-so", observer=None)


def test_image_pairs_have_six_channels(pendulum):
    pol = ppo.build_policy(3, 1, seed=0)
    val = ppo.build_value(3, seed=1)
    batch = ppo.collect_rollout(pol, val, pendulum, 200, seed=0, render=True)
    pairs = ail.make_imitator_pairs(batch, "vgaifo")
    x = ail._disc_input(pairs, np.arange(4))
    assert x.shape == (4, 6, 32, 32)


def test_observer_pairs_match_state_pairs_within_fit_error(pendulum):
    # with an observer trained to low error on this very data, predicted
    # pairs approximate true-state pairs within the observed fit error
    pol = ppo.build_policy(3, 1, seed=2)
    val = ppo.build_value(3, seed=3)
    batch = ppo.collect_rollout(pol, val, pendulum, 600, seed=4, render=True)
    params = observer.build_observer(3, 32, seed=5)
    ds = observer.ObserverDataset(batch.observations, batch.states)
    observer.train_observer(params, ds, epochs=30, seed=6)
    preds = observer.predict(params, batch.observations)
    per_sample = np.sqrt(np.sum((preds - batch.states) ** 2, axis=1))
    state_pairs = ail.make_imitator_pairs(batch, "gaifo")
    so_pairs = ail.make_imitator_pairs(batch, "vgaifo-so", observer=params)
    diff = np.sqrt(np.sum((so_pairs.first - state_pairs.first) ** 2, axis=1))
    assert diff.mean() <= 2.0 * per_sample.mean()
    assert per_sample.mean() < 0.8  # small against the +-8 velocity scale


# ---------------------------------------------------------------------------
# discriminator objective
# ---------------------------------------------------------------------------

def test_zero_discriminator_loss_is_two_ln_two():
    disc = zeroed_disc()
    imit = toy_pairs(-1.0, 50, seed=1)
    exp = toy_pairs(+1.0, 50, seed=2)
    assert ail.discriminator_loss(disc, imit, exp) == pytest.approx(2 * LN2, abs=1e-12)


def test_identical_distributions_cannot_be_separated():
    pairs = toy_pairs(0.0, 300, seed=3, spread=1.0)
    disc = ail.build_discriminator("gaifo", 1, 32, seed=1)
    ail.discriminator_update(disc, pairs, pairs, epochs=5, seed=4)
    assert ail.discriminator_loss(disc, pairs, pairs) >= 2 * LN2 - 0.1


def test_separable_pairs_learned_with_correct_direction():
    imit = toy_pairs(-1.0, 400, seed=5)
    exp = toy_pairs(+1.0, 400, seed=6)
    disc = ail.build_discriminator("gaifo", 1, 32, seed=2)
    ail.discriminator_update(disc, imit, exp, epochs=5, seed=7)
    d_imit = ail.sigmoid(ail.discriminator_logits(disc, imit))
    d_exp = ail.sigmoid(ail.discriminator_logits(disc, exp))
    assert d_imit.mean() > d_exp.mean()
    accuracy = 0.5 * ((d_imit > 0.5).mean() + (d_exp <= 0.5).mean())
    assert accuracy >= 0.95


def test_discriminator_update_rejects_empty_side():
    disc = ail.build_discriminator("gaifo", 1, 32, seed=0)
    empty = ail.TransitionPairs(np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(ValueError, match="nonempty"):
        ail.discriminator_update(disc, empty, toy_pairs(1.0, 10), epochs=1)


def test_discriminator_update_deterministic():
    imit = toy_pairs(-1.0, 100, seed=8)
    exp = toy_pairs(+1.0, 60, seed=9)
    losses = []
    sums = []
    for _ in range(2):
        disc = ail.build_discriminator("gaifo", 1, 32, seed=3)
        losses.append(ail.discriminator_update(disc, imit, exp, epochs=2, seed=10))
        sums.append(sum(float(np.sum(a)) for a in disc.net.param_arrays()))
    assert losses[0] == losses[1]
    assert sums[0] == sums[1]


# ---------------------------------------------------------------------------
# reward synthesis
# ---------------------------------------------------------------------------

def test_reward_at_logit_zero_is_ln_two():
    disc = zeroed_disc()
    r = ail.synthesize_reward(disc, toy_pairs(0.0, 4, seed=0))
    assert np.allclose(r, LN2)


def test_reward_bounds_and_clamp():
    disc = ail.build_discriminator("gaifo", 1, 32, seed=4)
    # drive the logit strongly in both directions via the bias of the head
    disc.net.params[-1][1][...] = 40.0
    r_conf = ail.synthesize_reward(disc, toy_pairs(0.0, 8, seed=1))
    assert np.all(r_conf >= 0.0) and np.all(r_conf < 1e-5)  # confident imitator
    disc.net.params[-1][1][...] = -40.0
    r_exp = ail.synthesize_reward(disc, toy_pairs(0.0, 8, seed=1))
    assert np.allclose(r_exp, -np.log(1e-6))  # clamped at the ceiling
    assert np.all(r_exp <= ail.MAX_REWARD)


def test_reward_bounds_over_random_discriminators():
    rng = child_rng(12)
    for seed in range(5):
        disc = ail.build_discriminator("gaifo", 3, 32, seed=seed)
        pairs = ail.TransitionPairs(rng.standard_normal((64, 3)), rng.standard_normal((64, 3)))
        r = ail.synthesize_reward(disc, pairs)
        assert np.all(r >= 0.0) and np.all(r <= ail.MAX_REWARD)


# ---------------------------------------------------------------------------
# full iteration
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_demo_view(demo_file):
    return demos.load_demos(demo_file, mode="analysis").truncated(2)


def iteration_setup(algo, seed=0):
    env = envs.make_env("pendulum")
    pol = ppo.build_policy(3, 1, seed=child_seed(seed, 11))
    val = ppo.build_value(3, seed=child_seed(seed, 12))
    disc = ail.build_discriminator(algo, 3, 32, seed=child_seed(seed, 13))
    obs = observer.build_observer(3, 32, seed=child_seed(seed, 14)) if algo == "vgaifo-so" else None
    return env, pol, val, disc, obs


def test_gaifo_runs_without_observer_or_rendering(tiny_demo_view):
    env, pol, val, disc, _ = iteration_setup("gaifo")
    cfg = ail.IterationConfig(horizon=400)
    stats = ail.run_algorithm_iteration("gaifo", pol, val, disc, None, env,
                                        tiny_demo_view, cfg, seed=1, iteration=0)
    assert stats.steps == 400
    assert np.isnan(stats.observer_mse)


def test_vgaifo_so_with_zero_observer_epochs_completes(tiny_demo_view):
    env, pol, val, disc, obs = iteration_setup("vgaifo-so")
    cfg = ail.IterationConfig(horizon=400, observer_epochs=0)
    stats = ail.run_algorithm_iteration("vgaifo-so", pol, val, disc, obs, env,
                                        tiny_demo_view, cfg, seed=1, iteration=0)
    assert stats.steps == 400
    assert stats.observer_mse > 0.0


def test_iteration_reward_bounds_and_accounting(tiny_demo_view):
    env, pol, val, disc, obs = iteration_setup("vgaifo-so", seed=3)
    cfg = ail.IterationConfig(horizon=600)
    stats = ail.run_algorithm_iteration("vgaifo-so", pol, val, disc, obs, env,
                                        tiny_demo_view, cfg, seed=2, iteration=0)
    assert stats.steps == 600
    assert 0.0 <= stats.mean_reward <= ail.MAX_REWARD
    assert stats.observer_demo_l2 > 0.0


def test_so_discriminator_never_sees_pixels():
    disc = ail.build_discriminator("vgaifo-so", 3, 32, seed=0)
    assert disc.net.layers[0].kind == "dense"
    assert disc.net.layers[0].dims[0] == 2 * 3  # twice the state dim, no pixels


def test_unknown_algo_rejected(tiny_demo_view):
    env, pol, val, disc, _ = iteration_setup("gaifo")
    with pytest.raises(ValueError, match="unknown algorithm"):
        ail.run_algorithm_iteration("bco", pol, val, disc, None, env, tiny_demo_view,
                                    ail.IterationConfig(horizon=200), seed=0, iteration=0)
