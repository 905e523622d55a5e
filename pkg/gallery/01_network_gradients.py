"""
Building blocks: layers, losses, and gradient verification
===========================================================

Every learned function in ifolab (policy, value, discriminator, state
observer) is built from the same five layer kinds.  This script builds a
few networks, verifies their analytic gradients against central finite
differences, and round-trips a checkpoint file.
"""

import numpy as np

from ifolab import diffnet as dn

# one network per layer family, small enough to gradient-check in seconds
candidates = {
    "dense": ([dn.dense(4, 6)], (4,)),
    "conv stride 1": ([dn.conv2d(2, 3, kernel=3)], (2, 6, 6)),
    "conv stride 2 + pad": ([dn.conv2d(2, 3, kernel=3, stride=2, padding=1)], (2, 8, 8)),
    "mlp + relu": ([dn.dense(4, 8), dn.relu(), dn.dense(8, 2)], (4,)),
    "mlp + tanh": ([dn.dense(4, 8), dn.tanh(), dn.dense(8, 2)], (4,)),
    "conv head": ([dn.conv2d(2, 4, 3, 2, 1), dn.relu(), dn.flatten(), dn.dense(64, 3)], (2, 8, 8)),
}

print(f"{'network':<22}{'params':>8}{'max rel grad error':>22}")
for name, (specs, shape) in candidates.items():
    net = dn.Network(specs, seed=1)
    err = dn.finite_difference_check(net, shape, seed=0)
    print(f"{name:<22}{net.param_count:>8}{err:>22.3e}")

# losses carry their own gradients
loss, grad = dn.mse_loss(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
print(f"\nmse([1,1],[0,0]) = {loss}  grad = {grad}")
loss, grad = dn.bce_with_logits(0.0, 1)
print(f"bce(logit=0, label=1) = {float(loss):.6f}  (ln 2)  grad = {float(grad):+.3f}")
print(f"bce(logit=50, label=1) = {float(dn.bce_with_logits(50.0, 1)[0]):.3e}  (stable, no overflow)")

# Adam: first step with unit gradient moves a parameter by about -lr
net = dn.Network([dn.dense(1, 1)], seed=0)
for a in net.param_arrays():
    a[...] = 0.0
opt = dn.AdamState.for_arrays(net.param_arrays(), lr=1e-3)
net.grads[0][0][...] = 1.0
dn.adam_step(net, opt)
print(f"\nAdam step with grad 1.0, lr 1e-3: weight is now {float(net.params[0][0]):+.6f}")

# checkpoints round-trip bitwise
net = dn.Network([dn.conv2d(3, 8, 3, 2, 1), dn.relu(), dn.flatten(), dn.dense(8 * 16 * 16, 3)], seed=7)
dn.save_network(net, "/tmp/gallery_net.ifnw")
loaded = dn.load_network("/tmp/gallery_net.ifnw")
x = np.random.default_rng(0).random((1, 3, 32, 32))
print(f"checkpoint round-trip exact: {np.array_equal(net.predict(x), loaded.predict(x))}")
