"""Session-wide fixtures: one trained expert, demo files, random baseline.

Everything here is deterministic (fixed seeds), so fixture artifacts are
identical across sessions on the same platform.
"""

import numpy as np
import pytest

from ifolab import demos, envs, ppo
from ifolab.rngs import child_seed

EXPERT_SEED = 0
EXPERT_TIMESTEPS = 200_000
EXPERT_GAMMA = 0.9


@pytest.fixture(scope="session")
def pendulum():
    return envs.make_env("pendulum")


@pytest.fixture(scope="session")
def expert_checkpoint(tmp_path_factory, pendulum):
    ckpt = demos.train_expert(pendulum, EXPERT_TIMESTEPS, EXPERT_SEED, gamma=EXPERT_GAMMA)
    directory = tmp_path_factory.mktemp("expert") / "ckpt"
    demos.save_expert_checkpoint(ckpt, directory)
    ckpt.manifest["checkpoint_dir"] = str(directory)
    return ckpt


@pytest.fixture(scope="session")
def demo_file(tmp_path_factory, expert_checkpoint):
    """10 expert trajectories recorded with the manifest's eval seed."""
    path = tmp_path_factory.mktemp("demos") / "expert10.ifod"
    demos.record_demo_file(expert_checkpoint, path, 10,
                           seed=expert_checkpoint.manifest["eval_seed"])
    return path


@pytest.fixture(scope="session")
def random_policy_baseline(pendulum):
    """Mean eval return of untrained policies, the floor for normalization."""
    returns = [
        ppo.evaluate_policy(ppo.build_policy(3, 1, seed=child_seed(s, 11)),
                            pendulum, episodes=10, seed=child_seed(s, 31))
        for s in range(10)
    ]
    return float(np.mean(returns))
