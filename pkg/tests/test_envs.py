"""Environment tests: dynamics, determinism, rendering, frame stacking."""

import math

import numpy as np
import pytest

from ifolab import envs


# ---------------------------------------------------------------------------
# reset distributions
# ---------------------------------------------------------------------------

def test_pendulum_reset_membership_over_seeds():
    env = envs.make_env("pendulum")
    for seed in range(1000):
        s = env.reset(seed)
        theta, theta_dot = s.internal
        assert -0.5 <= theta <= 0.5
        assert -0.1 <= theta_dot <= 0.1
        assert s.step_index == 0


def test_reacher_reset_membership_over_seeds():
    env = envs.make_env("reacher")
    for seed in range(1000):
        s = env.reset(seed)
        x, y, vx, vy = s.proprio
        assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0
        assert vx == 0.0 and vy == 0.0


def test_reset_same_seed_bitwise_equal():
    for env_id in ("pendulum", "reacher"):
        env = envs.make_env(env_id)
        a, b = env.reset(123456), env.reset(123456)
        assert np.array_equal(a.proprio, b.proprio)
        assert np.array_equal(a.internal, b.internal)


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def test_pendulum_upright_is_fixed_point():
    env = envs.make_env("pendulum")
    s = envs.EnvState(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0]), 0)
    nxt, reward, done = env.step(s, [0.0])
    assert np.array_equal(nxt.internal, [0.0, 0.0])
    assert reward == 0.0  # -(theta^2 + 0.1 thdot^2 + 0.001 u^2) is maximal there
    assert not done


def test_pendulum_integrator_hand_check():
    # from theta=0.1 at rest with zero torque, one semi-implicit Euler step:
    # theta_dot' = dt * (3g/(2l)) * sin(0.1), theta' = theta + dt * theta_dot'
    env = envs.make_env("pendulum")
    s = envs.EnvState(np.array([math.cos(0.1), math.sin(0.1), 0.0]), np.array([0.1, 0.0]), 0)
    nxt, _, _ = env.step(s, [0.0])
    expected_td = 0.05 * (3.0 * 10.0 / 2.0) * math.sin(0.1)
    assert abs(nxt.internal[1] - expected_td) < 1e-15
    assert abs(nxt.internal[0] - (0.1 + 0.05 * expected_td)) < 1e-15


def test_pendulum_speed_and_torque_clipping():
    env = envs.make_env("pendulum")
    s = envs.EnvState(np.array([-1.0, 0.0, 7.9]), np.array([math.pi, 7.9]), 0)
    for _ in range(50):
        s, _, _ = env.step(s, [100.0])  # clipped to +2 internally
        assert abs(s.internal[1]) <= 8.0
        assert abs(s.proprio[2]) <= 8.0


def test_episode_length_exact():
    for env_id in ("pendulum", "reacher"):
        env = envs.make_env(env_id)
        s = env.reset(0)
        for t in range(env.spec.max_episode_steps):
            s, _, done = env.step(s, np.zeros(env.spec.action_dim))
            assert done == (t == env.spec.max_episode_steps - 1)


def test_step_rejects_non_finite_action():
    env = envs.make_env("pendulum")
    with pytest.raises(ValueError, match="non-finite"):
        env.step(env.reset(0), [np.nan])


def test_determinism_full_sequence_bitwise():
    for env_id in ("pendulum", "reacher"):
        env = envs.make_env(env_id)
        rng = np.random.default_rng(7)
        actions = rng.uniform(-2, 2, size=(50, env.spec.action_dim))
        runs = []
        for _ in range(2):
            s = env.reset(99)
            trace = []
            for a in actions:
                s, r, _ = env.step(s, a)
                trace.append((s.proprio.copy(), r, env.render(s).copy()))
            runs.append(trace)
        for (p1, r1, f1), (p2, r2, f2) in zip(*runs):
            assert np.array_equal(p1, p2) and r1 == r2 and np.array_equal(f1, f2)


def test_exposed_state_bounds():
    env = envs.make_env("pendulum")
    rng = np.random.default_rng(3)
    s = env.reset(11)
    for _ in range(400):
        s, _, done = env.step(s, rng.uniform(-2, 2, 1))
        cos_t, sin_t, td = s.proprio
        assert abs(cos_t) <= 1.0 and abs(sin_t) <= 1.0 and abs(td) <= 8.0
        if done:
            s = env.reset(12)


def test_reacher_stays_in_unit_box():
    env = envs.make_env("reacher")
    s = env.reset(5)
    rng = np.random.default_rng(5)
    for _ in range(500):
        s, _, done = env.step(s, rng.uniform(-1, 1, 2))
        x, y, vx, vy = s.proprio
        assert 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0
        assert abs(vx) <= 2.0 and abs(vy) <= 2.0
        if done:
            s = env.reset(6)


def test_wrap_angle_range():
    for theta in np.linspace(-20, 20, 401):
        w = envs.wrap_angle(theta)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w) - math.sin(theta)) < 1e-12
    assert envs.wrap_angle(math.pi) == math.pi
    assert envs.wrap_angle(-math.pi) == math.pi


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def test_pendulum_upright_renders_vertical_line():
    env = envs.make_env("pendulum")
    s = envs.EnvState(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0]), 0)
    frame = env.render(s)
    g = env.spec.image_size
    c = g // 2
    set_pixels = np.argwhere(frame == 1.0)
    assert np.all(set_pixels[:, 1] == c)          # single column
    assert set_pixels[:, 0].min() == c - round(0.4 * g)
    assert set_pixels[:, 0].max() == c            # above center, inclusive
    assert set(np.unique(frame)) <= {0.0, 1.0}


def test_render_is_pure():
    env = envs.make_env("pendulum")
    s = env.reset(77)
    assert np.array_equal(env.render(s), env.render(s))


def test_rod_pixel_fraction_roughly_angle_independent():
    # Bresenham pixel counts dip to ~L/sqrt(2) exactly on diagonals, so the
    # grid samples representative angles between the axis/diagonal extremes.
    env = envs.make_env("pendulum")
    g = env.spec.image_size
    expected = 0.4 * g / (g * g)
    for theta in (np.arange(16) + 0.5) * (2 * math.pi / 16):
        s = envs.EnvState(np.array([math.cos(theta), math.sin(theta), 0.0]),
                          np.array([theta, 0.0]), 0)
        frac = env.render(s).sum() / (g * g)
        assert 0.8 * expected <= frac <= 1.2 * expected, f"theta={theta}: {frac / expected}"


def test_reacher_render_square_and_target():
    env = envs.make_env("reacher")
    g = env.spec.image_size
    vec = np.array([0.1, 0.9, 0.0, 0.0])
    frame = env.render(envs.EnvState(vec.copy(), vec.copy(), 0))
    # 2x2 agent square plus the 1-pixel target dot
    assert frame.sum() == 5.0
    tr = tc = round(0.5 * (g - 1))
    assert frame[tr, tc] == 1.0
    ar, ac = round(0.9 * (g - 2)), round(0.1 * (g - 2))
    assert np.all(frame[ar:ar + 2, ac:ac + 2] == 1.0)


def test_make_env_rejects_unknown_id():
    with pytest.raises(ValueError, match="unknown env"):
        envs.make_env("cartpole")


# ---------------------------------------------------------------------------
# frame stacking
# ---------------------------------------------------------------------------

def test_stack_single_frame_repeats():
    f = np.random.default_rng(0).random((8, 8))
    s = envs.stack_frames([f])
    assert s.shape == (3, 8, 8)
    for ch in range(3):
        assert np.array_equal(s[ch], f)


def test_stack_orders_oldest_to_newest():
    a, b, c = (np.full((4, 4), v) for v in (1.0, 2.0, 3.0))
    s = envs.stack_frames([a, b, c])
    assert np.array_equal(s[0], a) and np.array_equal(s[1], b) and np.array_equal(s[2], c)
    s2 = envs.stack_frames([a, b])
    assert np.array_equal(s2[0], a) and np.array_equal(s2[1], a) and np.array_equal(s2[2], b)


def test_stacker_window_holds_last_three():
    frames = [np.full((2, 2), float(v)) for v in range(4)]
    st = envs.FrameStacker()
    st.reset(frames[0])
    for f in frames[1:]:
        out = st.push(f)
    assert np.array_equal(out[0], frames[1])
    assert np.array_equal(out[1], frames[2])
    assert np.array_equal(out[2], frames[3])


def test_stack_empty_history_errors():
    with pytest.raises(ValueError, match="empty"):
        envs.stack_frames([])
