"""Measurement model and recovery metrics for real-valued phase retrieval."""
import numpy as np

from .numerics import DimensionError

SUCCESS_THRESHOLD = 1e-5


def encode(A, x):
    """Phaseless measurements y = |A x|.

    Works on a single signal of shape (n,) or a batch of shape (B, n).
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != A.shape[1]:
        raise DimensionError(f"signal length {x.shape[-1]} does not match A with {A.shape[1]} columns")
    return np.abs(x @ A.T)


def phase_distance(a, b):
    """Squared distance up to a global sign: min(|a - b|^2, |a + b|^2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    minus = np.sum((a - b) ** 2, axis=-1)
    plus = np.sum((a + b) ** 2, axis=-1)
    return np.minimum(minus, plus)


def relative_mse(est, truth):
    """Phase-invariant squared error divided by the (unsquared) truth norm."""
    truth = np.asarray(truth, dtype=float)
    nrm = np.linalg.norm(truth, axis=-1)
    if np.any(nrm == 0):
        raise ValueError("relative_mse is undefined for a zero ground truth")
    return phase_distance(est, truth) / nrm


def is_success(rel_mse):
    return rel_mse < SUCCESS_THRESHOLD
