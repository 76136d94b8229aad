"""Dense real linear-algebra helpers, seeded random streams and selection."""
import zlib

import numpy as np

__all__ = [
    "DimensionError",
    "Rng",
    "gaussian_matrix",
    "top_k_indices",
    "hard_threshold",
    "power_iteration",
    "finite_diff_grad",
]


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


def _label_key(label):
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer labels must be nonnegative")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


class Rng:
    """Seeded Philox stream with reproducible labelled substreams.

    ``Rng(seed).child("trial", 3)`` always yields the same stream regardless of
    how many other children were drawn before it, so Monte-Carlo trials can be
    scheduled in any order.
    """

    def __init__(self, seed, path=()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, *labels):
        return Rng(self.seed, self.path + tuple(_label_key(l) for l in labels))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def integer(self, high=2**63):
        return int(self._gen.integers(high))

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, k):
        """k distinct integers from range(n), uniformly."""
        return self._gen.choice(n, size=k, replace=False)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"


def gaussian_matrix(rows, cols, rng):
    """i.i.d. N(0, 1) matrix of shape (rows, cols)."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return rng.normal((rows, cols))


def top_k_indices(v, k):
    """Indices of the k largest-magnitude entries, ties to the lowest index.

    The returned indices are sorted ascending.
    """
    v = np.asarray(v, dtype=float)
    if k < 0 or k > v.shape[-1]:
        raise ValueError(f"k={k} out of range for length {v.shape[-1]}")
    order = np.argsort(-np.abs(v), axis=-1, kind="stable")
    return np.sort(order[..., :k], axis=-1)


def hard_threshold(v, s, return_mask=False):
    """Keep the s largest-magnitude entries along the last axis, zero the rest."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if s >= n:
        mask = np.ones(v.shape, dtype=bool)
    else:
        idx = top_k_indices(v, s)
        mask = np.zeros(v.shape, dtype=bool)
        np.put_along_axis(mask, idx, True, axis=-1)
    out = np.where(mask, v, 0.0)
    return (out, mask) if return_mask else out


def _fix_sign(v):
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def power_iteration(M, max_iters=100, tol=1e-10, rng=None):
    """Leading eigenpair of a symmetric PSD matrix.

    Returns a unit vector (first nonzero entry made nonnegative) and its
    Rayleigh quotient. Stops once successive iterates move less than ``tol``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"power_iteration needs a square matrix, got {M.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    n = M.shape[0]
    e0 = np.zeros(n)
    e0[0] = 1.0
    if not np.any(M):
        return e0, 0.0

    v = rng.normal(n) if rng is not None else np.ones(n)
    v = v / np.linalg.norm(v)
    for _ in range(max_iters):
        w = M @ v
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            # start vector landed in the null space
            v = np.ones(n) / np.sqrt(n)
            continue
        w = w / nw
        d = w - v
        done = np.sqrt(d @ d) < tol
        v = w
        if done:
            break
    v = _fix_sign(v)
    return v, float(v @ M @ v)


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for j in range(flat.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[j] += h
        xm[j] -= h
        gf[j] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2 * h)
    return g
