"""The two classical solvers.

SPARTA recovers sparse signals (spectral init on an estimated support, then
truncated gradient steps followed by hard thresholding). IRWF handles dense
signals with plain amplitude-flow gradient steps.
"""
import numpy as np

from upr import IRWF, SPARTA, IrwfConfig, Rng, SpartaConfig, encode, gaussian_matrix, run_baseline
from upr.training import sample_signal

rng = Rng(1)

n, k, m = 100, 5, 300
A = gaussian_matrix(m, n, rng.child("A", "sparta"))
x = sample_signal(n, k, rng.child("x", "sparta"))
tr = run_baseline(SPARTA, A, encode(A, x), SpartaConfig(s=k), 50, truth=x, rng=rng.child("init"))
print("SPARTA rel MSE every 10 iterations:", [f"{v:.1e}" for v in tr.rel_mse_per_iter[::10]])

n, m = 50, 400
A = gaussian_matrix(m, n, rng.child("A", "irwf"))
x = sample_signal(n, n, rng.child("x", "irwf"))
tr = run_baseline(IRWF, A, encode(A, x), IrwfConfig(), 200, truth=x, rng=rng.child("init"))
print("IRWF rel MSE every 40 iterations:  ", [f"{v:.1e}" for v in tr.rel_mse_per_iter[::40]])
