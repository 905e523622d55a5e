"""Minimal reverse-mode differentiable network core.

Every learned function in this package (policies, value functions,
discriminators, state observers) is built from the same small layer set
defined here: dense, conv2d, relu, tanh, flatten.  Everything is plain
float64 numpy.  Convolutions are computed tap-by-tap with batched matrix
products -- images in this repo are at most 48x48, so correctness and
determinism win over raw speed.

Gradient semantics: ``Network.backward`` accumulates into ``Network.grads``
and keeps accumulating across calls until an optimizer step (or
``zero_grads``) clears them, so multi-batch accumulation works by calling
``backward`` repeatedly before ``adam_step``.

Checkpoint format ("IFNW", little-endian):

    magic b"IFNW" | version u32 | layer_count u32 |
    per layer: kind u8 | kind-specific dims as u32 | raw f64 parameters

Round-trips are bitwise exact.
"""

import struct
import hashlib
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

_KIND_CODES = {"dense": 0, "conv2d": 1, "relu": 2, "tanh": 3, "flatten": 4}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
# number of u32 dims serialized per kind
_KIND_NDIMS = {"dense": 2, "conv2d": 5, "relu": 0, "tanh": 0, "flatten": 0}

CHECKPOINT_MAGIC = b"IFNW"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# Layer specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network.

    ``dims`` is kind-specific: dense -> (in_dim, out_dim); conv2d ->
    (in_channels, out_channels, kernel, stride, padding); activation and
    flatten layers carry no dims.
    """

    kind: str
    dims: tuple = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if len(self.dims) != _KIND_NDIMS[self.kind]:
            raise ValueError(f"{self.kind} expects {_KIND_NDIMS[self.kind]} dims, got {self.dims}")
        if self.kind == "dense":
            if min(self.dims) < 1:
                raise ValueError(f"dense dims must be positive, got {self.dims}")
        elif self.kind == "conv2d":
            cin, cout, k, stride, pad = self.dims
            if min(cin, cout, k, stride) < 1 or pad < 0:
                raise ValueError(f"bad conv2d dims {self.dims}")
            if k % 2 == 0:
                raise ValueError(f"conv kernel must be odd, got {k}")


def dense(in_dim, out_dim):
    return LayerSpec("dense", (int(in_dim), int(out_dim)))


def conv2d(in_channels, out_channels, kernel=3, stride=1, padding=0):
    return LayerSpec("conv2d", (int(in_channels), int(out_channels), int(kernel), int(stride), int(padding)))


def relu():
    return LayerSpec("relu")


def tanh():
    return LayerSpec("tanh")


def flatten():
    return LayerSpec("flatten")


def _init_layer_params(spec, rng):
    # Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
    if spec.kind == "dense":
        fi, fo = spec.dims
        limit = np.sqrt(6.0 / (fi + fo))
        return [rng.uniform(-limit, limit, size=(fi, fo)), np.zeros(fo)]
    if spec.kind == "conv2d":
        cin, cout, k, _, _ = spec.dims
        limit = np.sqrt(6.0 / (cin * k * k + cout * k * k))
        return [rng.uniform(-limit, limit, size=(cout, cin, k, k)), np.zeros(cout)]
    return []


# ---------------------------------------------------------------------------
# Per-kind forward/backward
# ---------------------------------------------------------------------------

def _dense_forward(x, spec, ps, keep):
    fi, fo = spec.dims
    if x.ndim != 2 or x.shape[1] != fi:
        raise ValueError(f"expected input of shape (batch, {fi}), got {x.shape}")
    w, b = ps
    return x @ w + b, (x if keep else None)


def _dense_backward(g, cache, spec, ps, gs):
    x = cache
    w, _ = ps
    gw, gb = gs
    gw += x.T @ g
    gb += g.sum(axis=0)
    return g @ w.T


def _conv_out_hw(h, w, k, stride, pad):
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    return ho, wo


def _conv2d_forward(x, spec, ps, keep):
    # Taps are gathered into one column matrix so each conv costs a single
    # large matrix product instead of many tiny ones.
    cin, cout, k, stride, pad = spec.dims
    if x.ndim != 4 or x.shape[1] != cin:
        raise ValueError(f"expected input of shape (batch, {cin}, h, w), got {x.shape}")
    w, b = ps
    bsz, _, h, wdt = x.shape
    ho, wo = _conv_out_hw(h, wdt, k, stride, pad)
    if ho < 1 or wo < 1:
        raise ValueError(f"input {h}x{wdt} smaller than kernel {k} with padding {pad}")
    if pad:
        xp = np.zeros((bsz, cin, h + 2 * pad, wdt + 2 * pad))
        xp[:, :, pad:pad + h, pad:pad + wdt] = x
    else:
        xp = x
    m = ho * wo
    ckk = cin * k * k
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, shape=(bsz, ho, wo, k, k, cin),
        strides=(s0, stride * s2, stride * s3, s2, s3, s1), writeable=False)
    cols = np.ascontiguousarray(windows).reshape(bsz, m, ckk)
    w2 = w.transpose(0, 2, 3, 1).reshape(cout, ckk)  # (dy, dx, cin)-major columns
    out = cols.reshape(bsz * m, ckk) @ w2.T
    out += b
    out = np.ascontiguousarray(out.reshape(bsz, ho, wo, cout).transpose(0, 3, 1, 2))
    return out, ((cols, xp.shape, x.shape) if keep else None)


def _conv2d_backward(g, cache, spec, ps, gs):
    cin, cout, k, stride, pad = spec.dims
    cols, xp_shape, x_shape = cache
    bsz, _, h, wdt = x_shape
    ho, wo = _conv_out_hw(h, wdt, k, stride, pad)
    if g.shape != (bsz, cout, ho, wo):
        raise ValueError(f"output grad shape {g.shape} does not match ({bsz}, {cout}, {ho}, {wo})")
    w, _ = ps
    gw, gb = gs
    m = ho * wo
    ckk = cin * k * k
    gb += g.sum(axis=(0, 2, 3))
    gm = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(bsz * m, cout)
    gw2 = gm.T @ cols.reshape(bsz * m, ckk)
    gw += gw2.reshape(cout, k, k, cin).transpose(0, 3, 1, 2)
    w2 = w.transpose(0, 2, 3, 1).reshape(cout, ckk)
    dcols = (gm @ w2).reshape(bsz, m, ckk)
    dxp = np.zeros(xp_shape)
    for dy in range(k):
        for dx in range(k):
            t = (dy * k + dx) * cin
            dxs = dcols[:, :, t:t + cin].reshape(bsz, ho, wo, cin).transpose(0, 3, 1, 2)
            dxp[:, :, dy:dy + stride * ho:stride, dx:dx + stride * wo:stride] += dxs
    if pad:
        return dxp[:, :, pad:pad + h, pad:pad + wdt]
    return dxp


def _relu_forward(x, spec, ps, keep):
    return np.maximum(x, 0.0), ((x > 0.0) if keep else None)


def _relu_backward(g, cache, spec, ps, gs):
    return g * cache


def _tanh_forward(x, spec, ps, keep):
    y = np.tanh(x)
    return y, (y if keep else None)


def _tanh_backward(g, cache, spec, ps, gs):
    return g * (1.0 - cache * cache)


def _flatten_forward(x, spec, ps, keep):
    if x.ndim < 2:
        raise ValueError(f"flatten needs a batched input, got shape {x.shape}")
    return x.reshape(x.shape[0], -1), (x.shape if keep else None)


def _flatten_backward(g, cache, spec, ps, gs):
    return g.reshape(cache)


_FORWARD = {
    "dense": _dense_forward,
    "conv2d": _conv2d_forward,
    "relu": _relu_forward,
    "tanh": _tanh_forward,
    "flatten": _flatten_forward,
}

_BACKWARD = {
    "dense": _dense_backward,
    "conv2d": _conv2d_backward,
    "relu": _relu_backward,
    "tanh": _tanh_backward,
    "flatten": _flatten_backward,
}


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

@dataclass
class ForwardCache:
    net: "Network"
    items: list


class Network:
    """An ordered list of layers with parameter and gradient storage.

    Parameters are float64 numpy arrays, initialized from a seeded
    generator so construction is reproducible.  ``forward`` expects a
    batched input (2-d for dense stacks, 4-d ``(batch, channel, h, w)``
    for conv stacks) and returns the output plus a cache consumed by
    ``backward``.
    """

    def __init__(self, layers, seed=0):
        layers = list(layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        self.layers = layers
        rng = np.random.default_rng(seed)
        self.params = [_init_layer_params(s, rng) for s in layers]
        self.grads = [[np.zeros_like(a) for a in ps] for ps in self.params]

    def param_arrays(self):
        return [a for ps in self.params for a in ps]

    def grad_arrays(self):
        return [a for gs in self.grads for a in gs]

    @property
    def param_count(self):
        return sum(a.size for a in self.param_arrays())

    def zero_grads(self):
        for g in self.grad_arrays():
            g[...] = 0.0

    def _run(self, x, keep):
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite network input")
        items = []
        for i, (spec, ps) in enumerate(zip(self.layers, self.params)):
            try:
                x, c = _FORWARD[spec.kind](x, spec, ps, keep)
            except ValueError as exc:
                raise ValueError(f"layer {i} ({spec.kind}): {exc}") from None
            items.append(c)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite network output")
        return x, items

    def forward(self, x):
        """Run the network, returning (output, cache-for-backward)."""
        y, items = self._run(x, keep=True)
        return y, ForwardCache(self, items)

    def predict(self, x):
        """Forward pass without building a backward cache."""
        y, _ = self._run(x, keep=False)
        return y

    def backward(self, cache, output_grad):
        """Accumulate parameter grads; returns the input gradient."""
        if not isinstance(cache, ForwardCache) or cache.net is not self:
            raise ValueError("cache was not produced by a forward call on this network")
        g = np.asarray(output_grad, dtype=np.float64)
        for i in range(len(self.layers) - 1, -1, -1):
            spec = self.layers[i]
            try:
                g = _BACKWARD[spec.kind](g, cache.items[i], spec, self.params[i], self.grads[i])
            except ValueError as exc:
                raise ValueError(f"layer {i} ({spec.kind}): {exc}") from None
        return g


def network_checksum(net):
    """SHA-256 over the raw parameter bytes; cheap bitwise-change detector."""
    h = hashlib.sha256()
    for a in net.param_arrays():
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam moments for a fixed list of parameter arrays."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_arrays(cls, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                   m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays])


def adam_update(params, grads, state):
    """Apply one in-place Adam step to ``params`` given ``grads``.

    Grads are NOT zeroed here; ``adam_step`` does that for whole networks.
    Raises on non-finite gradients so training halts with a diagnostic
    instead of silently corrupting parameters.
    """
    if len(params) != len(state.m):
        raise ValueError("optimizer state does not match parameter list")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise RuntimeError("non-finite gradient in optimizer step")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def adam_step(net, state):
    """Adam step over all of a Network's parameters; zeroes grads after."""
    adam_update(net.param_arrays(), net.grad_arrays(), state)
    net.zero_grads()


# ---------------------------------------------------------------------------
# Losses and log-densities
# ---------------------------------------------------------------------------

def mse_loss(pred, target):
    """Mean of squared componentwise differences and its grad wrt pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def bce_with_logits(logit, label):
    """Numerically stable binary cross entropy on logits.

    loss = softplus(logit) - label * logit, grad = sigmoid(logit) - label.
    Works elementwise on arrays; labels must be 0 or 1.
    """
    logit = np.asarray(logit, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if not np.all((label == 0.0) | (label == 1.0)):
        raise ValueError("labels must be 0 or 1")
    if not np.all(np.isfinite(logit)):
        raise ValueError("non-finite logit")
    loss = softplus(logit) - label * logit
    grad = sigmoid(logit) - label
    return loss, grad


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gaussian_logprob(mean, log_std, action):
    """Diagonal-Gaussian log density, summed over action dims.

    ``mean`` and ``action`` may be (d,) or (batch, d); ``log_std`` is (d,).
    Returns a float or a (batch,) array accordingly.
    """
    mean = np.asarray(mean, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    if mean.shape != action.shape:
        raise ValueError(f"shape mismatch: mean {mean.shape} vs action {action.shape}")
    z = (action - mean) * np.exp(-log_std)
    lp = -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * LOG_2PI * mean.shape[-1]
    if lp.ndim == 0:
        return float(lp)
    return lp


def gaussian_logprob_grads(mean, log_std, action):
    """d logp / d mean and per-dim d logp / d log_std (same batch shape as mean)."""
    mean = np.asarray(mean, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    inv_std = np.exp(-np.asarray(log_std, dtype=np.float64))
    z = (action - mean) * inv_std
    return z * inv_std, z * z - 1.0


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------

def _min_relu_margin(net, x):
    """Smallest |pre-activation| feeding a relu (inf if none)."""
    margin = np.inf
    for spec, ps in zip(net.layers, net.params):
        if spec.kind == "relu":
            margin = min(margin, float(np.min(np.abs(x))))
        x, _ = _FORWARD[spec.kind](x, spec, ps, False)
    return margin


def finite_difference_check(net, input_shape, seed, h=1e-5, batch=2):
    """Worst relative error between analytic and central-difference grads.

    Uses the scalar objective sum(forward(x) * R) with a fixed random
    projection R, checking every parameter coordinate and every input
    coordinate.  The relative error denominator is floored at 1e-4 so
    dead coordinates (both grads ~0) compare absolutely instead of
    dividing by finite-difference noise.

    Central differences are only meaningful at differentiable points, so
    inputs that leave any relu pre-activation within 1e-3 of its kink are
    redrawn (a +-h perturbation there would straddle the kink and measure
    an average of two slopes rather than the derivative).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, *input_shape))
    for _ in range(20):
        if _min_relu_margin(net, x) > 1e-3:
            break
        x = rng.standard_normal((batch, *input_shape))
    y, cache = net.forward(x)
    r = rng.standard_normal(y.shape)
    net.zero_grads()
    gin = net.backward(cache, r)
    analytic = [a.copy() for a in net.grad_arrays()] + [gin]
    targets = list(net.param_arrays()) + [x]
    worst = 0.0
    for arr, ana in zip(targets, analytic):
        flat = arr.reshape(-1)
        aflat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(np.sum(net.predict(x) * r))
            flat[i] = orig - h
            lm = float(np.sum(net.predict(x) * r))
            flat[i] = orig
            num = (lp - lm) / (2.0 * h)
            err = abs(num - aflat[i]) / max(abs(num), abs(aflat[i]), 1e-4)
            worst = max(worst, err)
    net.zero_grads()
    return worst


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------

def save_network(net, path):
    """Write a network to the binary checkpoint format (bitwise stable)."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(net.layers))]
    for spec, ps in zip(net.layers, net.params):
        chunks.append(struct.pack("<B", _KIND_CODES[spec.kind]))
        if spec.dims:
            chunks.append(struct.pack(f"<{len(spec.dims)}I", *spec.dims))
        for a in ps:
            chunks.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def _param_shapes(spec):
    if spec.kind == "dense":
        fi, fo = spec.dims
        return [(fi, fo), (fo,)]
    if spec.kind == "conv2d":
        cin, cout, k, _, _ = spec.dims
        return [(cout, cin, k, k), (cout,)]
    return []


def load_network(path):
    """Read a network checkpoint; inverse of save_network, bitwise exact."""
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(data):
            raise ValueError(f"truncated checkpoint: needed {n} bytes for {what} at byte offset {off}")
        out = data[off:off + n]
        off += n
        return out

    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic, not a network checkpoint")
    version, n_layers = struct.unpack("<II", take(8, "header"))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    specs = []
    payloads = []
    for i in range(n_layers):
        (code,) = struct.unpack("<B", take(1, f"layer {i} kind"))
        if code not in _CODE_KINDS:
            raise ValueError(f"{path}: unknown layer kind code {code} in layer {i}")
        kind = _CODE_KINDS[code]
        nd = _KIND_NDIMS[kind]
        dims = struct.unpack(f"<{nd}I", take(4 * nd, f"layer {i} dims")) if nd else ()
        spec = LayerSpec(kind, tuple(int(d) for d in dims))
        arrays = []
        for shape in _param_shapes(spec):
            n = int(np.prod(shape))
            raw = take(8 * n, f"layer {i} parameters")
            arrays.append(np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64))
        specs.append(spec)
        payloads.append(arrays)
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes after byte offset {off}")
    net = Network(specs, seed=0)
    for ps, arrays in zip(net.params, payloads):
        for j, a in enumerate(arrays):
            ps[j][...] = a
    return net
