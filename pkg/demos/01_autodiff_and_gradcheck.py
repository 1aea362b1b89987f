# %% [markdown]
# # Reverse-mode autodiff and finite-difference checks
#
# Every layer in the network is a closure-based op on `Tensor`. Here we build a
# tiny graph by hand, backpropagate, and compare against central differences.

# %%
import numpy as np

from diacnn import ops
from diacnn.gradcheck import check_gradients, projection_loss
from diacnn.netgraph import build_diacnn, init_params, model_loss
from diacnn.tensor import Tensor

rng = np.random.default_rng(0)

# %% A conv -> batch norm -> relu -> max-pool stack, all in float64
x = Tensor(rng.normal(size=(2, 3, 8, 8)), requires_grad=True)
w = Tensor(rng.normal(size=(4, 3, 3, 3)), requires_grad=True)
gamma = Tensor(np.ones(4), requires_grad=True)
beta = Tensor(np.zeros(4), requires_grad=True)
probe = rng.normal(size=(2, 4, 4, 4))


def loss():
    h = ops.conv2d(x, w, None, 1, "same")
    h = ops.batch_norm(h, gamma, beta, np.zeros(4), np.ones(4), "train")
    return projection_loss(ops.maxpool2d(ops.relu(h)), probe)


err = check_gradients(loss, [x, w, gamma, beta], step=1e-5)
print(f"conv/bn/relu/pool stack: max relative error {err:.2e}")

# %% [markdown]
# The same machinery differentiates the whole DiaCNN loss. `model_loss`
# returns the scalar cross-entropy and the forward result.

# %%
model = build_diacnn(net_width=8, num_classes=2, input_shape=(3, 16, 16))
params = init_params(model, seed=0, dtype=np.float64)
images = rng.uniform(size=(4, 3, 16, 16))
labels = np.array([0, 1, 1, 0])
value, result = model_loss(model, params, images, labels, "train")
value.backward()
print(f"DiaCNN(8,2): {params.count()} parameters, loss {float(value.data):.4f}")
print("fc.weight gradient norm:", float(np.linalg.norm(params["fc.weight"].grad)))
