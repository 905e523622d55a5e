"""ifolab: a desk-scale imitation-from-observation laboratory.

Adversarial imitation from video-only demonstrations with a
self-supervised state observer, plus its privileged-state and raw-image
baselines, on small deterministic environments rendered to binary pixels.
"""

from . import ail, demos, diffnet, envs, harness, observer, ppo
from .ail import (ALGOS, build_discriminator, discriminator_update, make_pairs,
                  run_algorithm_iteration, synthesize_reward)
from .demos import load_demos, record_demos, train_expert, write_demo_file
from .diffnet import (AdamState, LayerSpec, Network, adam_step, bce_with_logits,
                      conv2d, dense, flatten, gaussian_logprob, load_network,
                      mse_loss, relu, save_network, tanh)
from .envs import FrameStacker, Pendulum, PointReacher, make_env, stack_frames
from .harness import ExperimentConfig, curve_extract, make_config, run_experiment, sweep
from .observer import ObserverDataset, build_observer, demo_prediction_error, train_observer
from .ppo import (build_policy, build_value, collect_rollout, compute_gae,
                  evaluate_policy, ppo_update)

__version__ = "0.1.0"
