"""Learning the preconditioners.

The loss is the mean sign-invariant distance after L layers; gradients come
from a hand-written reverse pass and Adam updates the per-layer weights.
Case 3 trains only the preconditioners, Case 2 only A, Case 4 both.
"""
import numpy as np

from upr import CASE_MASKS, UPR_SPARTA, Rng, SpartaConfig, TrainConfig, gaussian_matrix, generate_dataset, make_identity_params, train
from upr.bench import run_gradcheck
from upr.config import ExperimentConfig

n, k, m, L = 20, 3, 40, 5
A = gaussian_matrix(m, n, Rng(3))
net = make_identity_params(L, n, 1.0, A, UPR_SPARTA, SpartaConfig(s=k))

# backward pass against central differences, on an instance kept away from
# sign flips, truncation boundaries and top-s ties
print("gradient check:", run_gradcheck(ExperimentConfig("gradcheck", "sparta", n=8, m=16, k=2, L=3, case=[4])))

data = generate_dataset(n, k, 1024, seed=1)
trained, curve = train(net, data, TrainConfig(epochs=30, mask=CASE_MASKS[3], seed=2))
print(f"mean loss: epoch 0 {curve[0]:.4f} -> epoch 29 {curve[-1]:.4f}")
print("learned step sizes per layer (mean w^2):", np.round((trained.W**2).mean(axis=1), 3))
