"""
Autodiff core and recurrent layers
==================================

The numerical engine is a small reverse-mode tape over float64 numpy
arrays. Every analytic gradient can be audited against central finite
differences, which is also how the full models are verified.
"""

import numpy as np

from mixqa import autodiff as ad
from mixqa.autodiff import Parameter, constant
from mixqa.layers import BiGru, GruLayer, gru_step
from mixqa.optim import Adam, grad_check

rng = np.random.default_rng(0)

# A throwaway loss mixing several ops; grad_check compares every parameter
# coordinate against (f(x+h) - f(x-h)) / 2h.
W = Parameter("W", rng.standard_normal((4, 3)))
x = Parameter("x", rng.standard_normal(3))


def loss_fn():
    h = ad.tanh(ad.matmul(W, x))
    return ad.log(ad.sum_all(ad.power_int(h, 2)), floor=1e-12)


print("max relative gradient error per block:", grad_check(loss_fn, [W, x]))

# One GRU update; gates squash to (0,1), the candidate state to (-1,1).
layer = GruLayer(input_size=3, hidden_size=4, rng=rng)
h1 = gru_step(layer, constant(np.zeros(4)), constant(rng.standard_normal(3)))
print("h1:", np.round(h1.values, 3))

# A bidirectional encoder returns per-position states (forward || backward)
# plus the end-state summary used as the question vector.
encoder = BiGru(input_size=3, hidden_size=4, rng=rng)
H, v = encoder(constant(rng.standard_normal((6, 3))))
print("H shape:", H.shape, "summary shape:", v.shape)

# Adam with bias correction walks a quadratic bowl to the minimum.
theta = Parameter("theta", np.array(3.0))
opt = Adam([theta], lr=5e-2)
for step in range(200):
    theta.zero_grad()
    ad.mul(theta, theta).backward()
    opt.step()
print("theta after 200 Adam steps:", float(theta.values))
