"""Phaseless measurements and the sign-invariant error.

A real signal x is observed only through y = |Ax|, so x and -x are
indistinguishable. Every error we report is measured up to that sign.
"""
import numpy as np

from upr import Rng, encode, gaussian_matrix, is_success, phase_distance, relative_mse

rng = Rng(0)
A = gaussian_matrix(8, 4, rng.child("A"))
x = np.array([1.0, 0.0, -2.0, 0.5])

y = encode(A, x)
print("y       =", np.round(y, 3))
print("y(-x)   =", np.round(encode(A, -x), 3))

# -x is a perfect reconstruction, a slightly perturbed x is not
for est in (-x, x + 1e-3, np.zeros(4)):
    rel = relative_mse(est, x)
    print(f"D = {phase_distance(est, x):.3e}   rel MSE = {rel:.3e}   success = {is_success(rel)}")
