"""Self-supervised state observer: stacked frames -> proprioceptive state.

The observer is a small conv net regressing the agent's own
proprioceptive state from its last three rendered frames.  Training data
comes exclusively from the imitator's rollouts, where frames and true
states arrive paired for free; the trained (frozen) observer is then used
to predict states for both imitator and expert observations.

The final layer is linear because velocity components are unbounded.
"""

from dataclasses import dataclass

import numpy as np

from .diffnet import AdamState, Network, adam_step, conv2d, dense, flatten, mse_loss, relu
from .rngs import child_rng

PREDICT_CHUNK = 128


@dataclass
class ObserverParams:
    net: Network
    opt: AdamState
    state_dim: int
    image_size: int


@dataclass
class ObserverDataset:
    """Aligned (stacked observation, target state) pairs from rollouts."""
    observations: np.ndarray  # (N, 3, G, G)
    targets: np.ndarray       # (N, state_dim)

    def __post_init__(self):
        if self.observations.shape[0] != self.targets.shape[0]:
            raise ValueError("observations and targets must be aligned")

    def __len__(self):
        return self.observations.shape[0]


def concat_datasets(datasets):
    return ObserverDataset(
        np.concatenate([d.observations for d in datasets]),
        np.concatenate([d.targets for d in datasets]),
    )


def build_observer(state_dim, image_size, seed, lr=1e-3):
    g = image_size
    for _ in range(3):
        g = (g + 2 - 3) // 2 + 1  # conv k3 s2 p1
    layers = [
        conv2d(3, 8, kernel=3, stride=2, padding=1), relu(),
        conv2d(8, 16, kernel=3, stride=2, padding=1), relu(),
        conv2d(16, 32, kernel=3, stride=2, padding=1), relu(),
        flatten(),
        dense(32 * g * g, 128), relu(),
        dense(128, state_dim),
    ]
    net = Network(layers, seed=seed)
    return ObserverParams(net, AdamState.for_arrays(net.param_arrays(), lr=lr), state_dim, image_size)


def predict(params, obs):
    """Frozen forward pass: (3,G,G) -> (state_dim,) or batched (N,3,G,G).

    Never mutates parameters; large batches are evaluated in chunks.
    """
    obs = np.asarray(obs, dtype=np.float64)
    g = params.image_size
    if obs.shape == (3, g, g):
        return params.net.predict(obs[None])[0]
    if obs.ndim != 4 or obs.shape[1:] != (3, g, g):
        raise ValueError(f"expected observations shaped (3, {g}, {g}) or (n, 3, {g}, {g}), got {obs.shape}")
    out = np.empty((obs.shape[0], params.state_dim))
    for start in range(0, obs.shape[0], PREDICT_CHUNK):
        out[start:start + PREDICT_CHUNK] = params.net.predict(obs[start:start + PREDICT_CHUNK])
    return out


def dataset_mse(params, dataset):
    preds = predict(params, dataset.observations)
    return mse_loss(preds, dataset.targets)[0]


def train_observer(params, dataset, epochs, minibatch=64, lr=1e-3, seed=0):
    """Run ``epochs`` shuffled passes of Adam regression on the dataset.

    Returns the mean minibatch MSE of the final epoch; with ``epochs=0``
    the parameters are untouched and the current dataset MSE is returned.
    """
    if len(dataset) == 0:
        raise ValueError("observer dataset is empty")
    if epochs == 0:
        return dataset_mse(params, dataset)
    params.opt.lr = lr
    rng = child_rng(seed, 0)
    n = len(dataset)
    final_epoch_losses = []
    for epoch in range(epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, minibatch):
            idx = perm[start:start + minibatch]
            pred, cache = params.net.forward(dataset.observations[idx])
            loss, grad = mse_loss(pred, dataset.targets[idx])
            if not np.isfinite(loss):
                raise RuntimeError("non-finite observer loss; training halted")
            params.net.backward(cache, grad)
            adam_step(params.net, params.opt)
            losses.append(loss)
        final_epoch_losses = losses
    return float(np.mean(final_epoch_losses))


def demo_prediction_error(params, demos):
    """Mean L2 norm of the state prediction error over a demo sequence.

    Requires a demo view opened in analysis mode (ground-truth states
    present).  For reporting only -- this value must never reach a
    training gradient.
    """
    if demos.states is None:
        raise ValueError("demo view lacks the analysis state section; open in analysis mode")
    n, t = demos.states.shape[:2]
    obs = demos.observations.reshape(n * t, *demos.observations.shape[2:])
    preds = predict(params, obs)
    err = preds - demos.states.reshape(n * t, -1)
    return float(np.mean(np.sqrt(np.sum(err * err, axis=1))))
