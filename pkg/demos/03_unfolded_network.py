"""Unrolling iterations into layers.

Each layer of the network is one solver iteration with its own diagonal
preconditioner G = diag(w**2). With w = sqrt(alpha) everywhere the network is
exactly the baseline, which is where training starts.
"""
import numpy as np

from upr import UPR_SPARTA, Rng, SpartaConfig, encode, forward, gaussian_matrix, init_for, make_identity_params, run_baseline
from upr.training import sample_signal

rng = Rng(2)
n, k, m, L = 40, 3, 80, 20
A = gaussian_matrix(m, n, rng.child("A"))
x = sample_signal(n, k, rng.child("x"))
y = encode(A, x)

cfg = SpartaConfig(s=k)
net = make_identity_params(L, n, cfg.alpha, A, UPR_SPARTA, cfg)
z0 = init_for(net, A, y, rng.child("init"))
_, trace = forward(net, y, z0)
base = run_baseline("sparta", A, y, cfg, L, z0=z0)
print("max |network - baseline| over all layers:", np.abs(trace.iterates - base.iterates).max())

# the truth is a fixed point of every layer, whatever the weights
net.W = rng.child("W").normal(net.W.shape)
print("truth preserved under random weights:", np.allclose(forward(net, y, x)[0], x))
