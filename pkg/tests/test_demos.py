"""Demonstration pipeline tests: file format, firewall, expert checkpoints."""

import json
import math

import numpy as np
import pytest

from ifolab import demos, envs, ppo
from ifolab.envs import wrap_angle


def recompute_pendulum_return(states, dt=0.05):
    """Independent oracle: rebuild rewards from stored states alone.

    Torques are recovered by inverting the known dynamics
    theta_dot' = theta_dot + dt*(15 sin(theta) + 3 u); the final step's
    torque has no successor state, so its (tiny) 0.001 u^2 term is omitted.
    """
    theta = np.arctan2(states[:, 1], states[:, 0])
    theta_dot = states[:, 2]
    u = (np.diff(theta_dot) / dt - 15.0 * np.sin(theta[:-1])) / 3.0
    total = -np.sum(theta ** 2) - 0.1 * np.sum(theta_dot ** 2)
    total -= 0.001 * np.sum(u ** 2)
    return total


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def test_single_trajectory_accounting(expert_checkpoint, tmp_path):
    path = tmp_path / "one.ifod"
    demos.record_demo_file(expert_checkpoint, path, 1, seed=3)
    view = demos.load_demos(path, mode="analysis")
    assert view.n_traj == 1 and view.traj_len == 200
    assert view.observations.shape == (1, 200, 3, 32, 32)
    assert view.states.shape == (1, 200, 3)


def test_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    frames = (rng.random((2, 5, 16, 16)) < 0.2).astype(np.float64)
    states = rng.standard_normal((2, 5, 3))
    a = tmp_path / "a.ifod"
    b = tmp_path / "b.ifod"
    demos.write_demo_file(a, "pendulum", 16, 3, frames, states)
    view = demos.load_demos(a, mode="analysis")
    assert np.array_equal(view.states, states)
    assert np.array_equal(view.observations[:, :, 2], frames)  # newest channel
    demos.write_demo_file(b, "pendulum", 16, 3, view.observations[:, :, 2], view.states)
    assert a.read_bytes() == b.read_bytes()


def test_pixel_quantization_exact(expert_checkpoint, tmp_path, pendulum):
    frames, states, _ = demos.record_demos(expert_checkpoint, pendulum, 1, seed=9)
    path = tmp_path / "q.ifod"
    demos.write_demo_file(path, "pendulum", 32, 3, frames, states)
    view = demos.load_demos(path, mode="video")
    assert np.array_equal(view.observations[0, :, 2], frames[0])
    assert set(np.unique(view.observations)) <= {0.0, 1.0}


def test_load_time_stacking_matches_rollout_rule(tmp_path):
    rng = np.random.default_rng(1)
    frames = (rng.random((1, 6, 8, 8)) < 0.3).astype(np.float64)
    demos.write_demo_file(tmp_path / "s.ifod", "pendulum", 8, 3, frames,
                          np.zeros((1, 6, 3)))
    view = demos.load_demos(tmp_path / "s.ifod", mode="video")
    stacker = envs.FrameStacker()
    expected = [stacker.reset(frames[0, 0])]
    for t in range(1, 6):
        expected.append(stacker.push(frames[0, t]))
    for t in range(6):
        assert np.array_equal(view.observations[0, t], expected[t])


def test_video_mode_exposes_no_states(demo_file):
    view = demos.load_demos(demo_file, mode="video")
    assert view.states is None
    assert view.mode == "video"


def test_analysis_absent_error(tmp_path):
    frames = np.zeros((1, 4, 8, 8))
    demos.write_demo_file(tmp_path / "v.ifod", "pendulum", 8, 3, frames,
                          include_analysis=False)
    view = demos.load_demos(tmp_path / "v.ifod", mode="video")
    assert view.states is None
    with pytest.raises(ValueError, match="analysis section requested but absent"):
        demos.load_demos(tmp_path / "v.ifod", mode="analysis")


def test_corrupt_files_error_with_offset(tmp_path):
    frames = np.zeros((1, 4, 8, 8))
    path = tmp_path / "c.ifod"
    demos.write_demo_file(path, "pendulum", 8, 3, frames, np.zeros((1, 4, 3)))
    data = path.read_bytes()
    bad = tmp_path / "bad.ifod"
    bad.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(ValueError, match="bad magic"):
        demos.load_demos(bad)
    trunc = tmp_path / "trunc.ifod"
    trunc.write_bytes(data[:len(data) - 7])
    with pytest.raises(ValueError, match="offset"):
        demos.load_demos(trunc)


def test_poisoned_analysis_is_invisible_in_video_mode(demo_file, tmp_path):
    data = demo_file.read_bytes()
    before = demos.load_demos(demo_file, mode="video")
    # overwrite every analysis byte of the first trajectory with a pattern
    header = 4 + 8 + len("pendulum") + 16
    frames_len = 200 * 32 * 32
    states_len = 200 * 3 * 8
    poisoned = bytearray(data)
    poisoned[header + frames_len:header + frames_len + states_len] = b"\xab" * states_len
    pp = tmp_path / "poison.ifod"
    pp.write_bytes(bytes(poisoned))
    after = demos.load_demos(pp, mode="video")
    assert np.array_equal(before.observations, after.observations)
    bad_states = demos.load_demos(pp, mode="analysis").states
    assert not np.array_equal(
        bad_states, demos.load_demos(demo_file, mode="analysis").states)


# ---------------------------------------------------------------------------
# experts
# ---------------------------------------------------------------------------

def test_expert_training_deterministic_checkpoint_bytes(tmp_path, pendulum):
    dirs = []
    for name in ("a", "b"):
        ckpt = demos.train_expert(pendulum, 4000, seed=5, gamma=0.9)
        d = tmp_path / name
        demos.save_expert_checkpoint(ckpt, d)
        dirs.append(d)
    for fname in ("policy.ifnw", "value.ifnw", "manifest.json"):
        assert (dirs[0] / fname).read_bytes() == (dirs[1] / fname).read_bytes()


def test_manifest_return_reproducible(expert_checkpoint, pendulum):
    m = expert_checkpoint.manifest
    r = ppo.evaluate_policy(expert_checkpoint.policy, pendulum,
                            episodes=m["eval_episodes"], seed=m["eval_seed"])
    assert r == m["final_eval_return"]


def test_checkpoint_load_roundtrip(expert_checkpoint, tmp_path, pendulum):
    d = tmp_path / "ck"
    demos.save_expert_checkpoint(expert_checkpoint, d)
    loaded = demos.load_expert_checkpoint(d)
    s = pendulum.reset(0).proprio
    assert np.array_equal(loaded.policy.mean_net.predict(s[None]),
                          expert_checkpoint.policy.mean_net.predict(s[None]))
    assert loaded.manifest["final_eval_return"] == expert_checkpoint.manifest["final_eval_return"]


def test_expert_beats_random_baseline_three_fold(expert_checkpoint, random_policy_baseline):
    # returns are negative: "3x better" means a third of the baseline cost
    assert expert_checkpoint.manifest["final_eval_return"] >= random_policy_baseline / 3.0


def test_recorded_returns_match_manifest_via_state_oracle(expert_checkpoint, pendulum):
    m = expert_checkpoint.manifest
    _, states, returns = demos.record_demos(expert_checkpoint, pendulum,
                                            m["eval_episodes"], seed=m["eval_seed"])
    recomputed = np.mean([recompute_pendulum_return(states[k]) for k in range(len(states))])
    assert abs(np.mean(returns) - m["final_eval_return"]) < 1e-9
    assert abs(recomputed - m["final_eval_return"]) <= 0.01 * abs(m["final_eval_return"])


def test_record_requires_matching_env(expert_checkpoint):
    with pytest.raises(ValueError, match="trained on"):
        demos.record_demos(expert_checkpoint, envs.make_env("reacher"), 1, seed=0)
