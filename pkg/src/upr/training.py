"""End-to-end training of unfolded networks (sensing matrix and preconditioners).

Gradients are accumulated by hand through the fixed layer topology. Discrete
quantities are held constant in the backward pass: signs of A z, the
truncation set, the hard-threshold support, and the spectral initialization.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import encode
from .numerics import Rng, hard_threshold
from .unfolded import UPR_SPARTA, init_for


@dataclass(frozen=True)
class TrainableMask:
    train_A: bool = False
    train_layers: bool = True

    def __post_init__(self):
        if not (self.train_A or self.train_layers):
            raise ValueError("mask must train at least one parameter block")


CASE_MASKS = {
    2: TrainableMask(train_A=True, train_layers=False),
    3: TrainableMask(train_A=False, train_layers=True),
    4: TrainableMask(train_A=True, train_layers=True),
}


@dataclass
class Dataset:
    samples: np.ndarray  # (count, n)
    n: int
    k: int
    seed: int

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    mask: TrainableMask = field(default_factory=TrainableMask)
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate < 0:
            raise ValueError("invalid training configuration")


@dataclass
class AdamState:
    mA: np.ndarray
    vA: np.ndarray
    mW: np.ndarray
    vW: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(
            np.zeros_like(params.A), np.zeros_like(params.A), np.zeros_like(params.W), np.zeros_like(params.W)
        )


@dataclass
class GradBundle:
    d_A: np.ndarray
    d_layers: np.ndarray  # (L, n)


def sample_signal(n, k, rng):
    """Standard-normal signal with exactly k nonzeros on a uniform support."""
    if not 1 <= k <= n:
        raise ValueError(f"sparsity k={k} must satisfy 1 <= k <= n={n}")
    if k == n:
        return rng.normal(n)
    x = np.zeros(n)
    x[rng.choice(n, k)] = rng.normal(k)
    return x


def generate_dataset(n, k, count, seed):
    if not 1 <= k <= n:
        raise ValueError(f"sparsity k={k} must satisfy 1 <= k <= n={n}")
    if count < 1:
        raise ValueError("count must be >= 1")
    root = Rng(seed).child("dataset")
    X = np.array([sample_signal(n, k, root.child(i)) for i in range(count)]).reshape(count, n)
    return Dataset(X, n, k, seed)


def compute_inits(params, X, rngs):
    """Spectral initializations under the current sensing matrix (no gradient)."""
    Y = encode(params.A, X)
    return np.array([init_for(params, params.A, y, r) for y, r in zip(Y, rngs)])


def _batch_rngs(rng, count):
    return [rng.child(i) for i in range(count)]


def _unroll(params, X, Z0, keep=False):
    A = params.A
    cfg = params.solver_cfg
    c = 1.0 / params.m if cfg.one_over_m_scaling else 1.0
    sparse = params.kind == UPR_SPARTA
    Y = np.abs(X @ A.T)
    z = Z0
    caches = []
    for i in range(params.L):
        p = z @ A.T
        s = np.sign(p)
        r = p - Y * s
        tmask = None
        if sparse:
            tmask = np.abs(p) >= Y / (1.0 + cfg.tau)
            r = np.where(tmask, r, 0.0)
        g = c * (r @ A)
        v = z - params.W[i] ** 2 * g
        hmask = None
        if sparse:
            v, hmask = hard_threshold(v, cfg.s, return_mask=True)
        if keep:
            caches.append((z, s, r, g, tmask, hmask))
        z = v
    return Y, z, caches


def _loss_terms(X, Z):
    minus = np.sum((Z - X) ** 2, axis=1)
    plus = np.sum((Z + X) ** 2, axis=1)
    sigma = np.where(minus <= plus, 1.0, -1.0)
    return np.minimum(minus, plus), sigma


def loss_batch(params, batch, rng, z0s=None):
    """Mean phase distance between each signal and the network's estimate."""
    X = np.atleast_2d(np.asarray(batch, dtype=float))
    Z0 = compute_inits(params, X, _batch_rngs(rng, len(X))) if z0s is None else np.asarray(z0s, dtype=float)
    _, Z, _ = _unroll(params, X, Z0)
    return float(np.mean(_loss_terms(X, Z)[0]))


def backward(params, batch, rng, z0s=None, mask=None):
    """Loss value and its gradient w.r.t. A and every layer's w."""
    mask = mask or TrainableMask(train_A=True, train_layers=True)
    X = np.atleast_2d(np.asarray(batch, dtype=float))
    B = X.shape[0]
    Z0 = compute_inits(params, X, _batch_rngs(rng, B)) if z0s is None else np.asarray(z0s, dtype=float)
    A = params.A
    c = 1.0 / params.m if params.solver_cfg.one_over_m_scaling else 1.0

    Y, Z, caches = _unroll(params, X, Z0, keep=True)
    terms, sigma = _loss_terms(X, Z)
    loss = float(np.mean(terms))

    dA = np.zeros_like(A)
    dW = np.zeros_like(params.W)
    dY = np.zeros_like(Y)
    dz = 2.0 * (Z - sigma[:, None] * X) / B
    for i in reversed(range(params.L)):
        z, s, r, g, tmask, hmask = caches[i]
        dv = dz if hmask is None else np.where(hmask, dz, 0.0)
        w = params.W[i]
        dW[i] = -2.0 * w * np.sum(g * dv, axis=0)
        dg = -(w**2) * dv
        dA += c * (r.T @ dg)
        dr = c * (dg @ A.T)
        if tmask is not None:
            dr = np.where(tmask, dr, 0.0)
        dY -= s * dr
        dA += dr.T @ z
        dz = dv + dr @ A
    # encoder y = |A x|
    dA += (np.sign(X @ A.T) * dY).T @ X

    if not mask.train_A:
        dA[:] = 0.0
    if not mask.train_layers:
        dW[:] = 0.0
    return loss, GradBundle(dA, dW)


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update of the unmasked parameter blocks."""
    b1, b2, eps, lr = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.learning_rate
    t = state.t + 1
    new = params.copy()
    st = AdamState(state.mA.copy(), state.vA.copy(), state.mW.copy(), state.vW.copy(), t)

    def update(value, g, m, v):
        m[:] = b1 * m + (1 - b1) * g
        v[:] = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        value -= lr * mhat / (np.sqrt(vhat) + eps)

    if cfg.mask.train_A:
        update(new.A, grads.d_A, st.mA, st.vA)
    if cfg.mask.train_layers:
        update(new.W, grads.d_layers, st.mW, st.vW)
    return new, st


def train(params0, data, cfg, progress=None):
    """Minibatch Adam over seed-shuffled epochs.

    Returns the trained parameters and the per-epoch mean training loss.
    """
    X = data.samples if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    N = X.shape[0]
    if X.shape[1] != params0.n:
        raise ValueError(f"dataset signals have length {X.shape[1]}, network expects {params0.n}")
    bs = min(cfg.batch_size, N)
    params = params0.copy()
    state = AdamState.zeros_like(params)
    root = Rng(cfg.seed)
    init_rngs = [root.child("init", i) for i in range(N)]
    cached = None if cfg.mask.train_A else compute_inits(params, X, init_rngs)

    curve: List[float] = []
    for epoch in range(cfg.epochs):
        perm = root.child("shuffle", epoch).permutation(N)
        total = 0.0
        for start in range(0, N, bs):
            idx = perm[start : start + bs]
            if cached is not None:
                z0s = cached[idx]
            else:
                z0s = compute_inits(params, X[idx], [init_rngs[j] for j in idx])
            loss, grads = backward(params, X[idx], None, z0s=z0s, mask=cfg.mask)
            total += loss * len(idx)
            params, state = adam_step(params, grads, state, cfg)
        curve.append(total / N)
        if progress is not None:
            progress(epoch, curve[-1])
    return params, np.array(curve)


__all__ = [
    "TrainableMask",
    "CASE_MASKS",
    "Dataset",
    "TrainConfig",
    "AdamState",
    "GradBundle",
    "sample_signal",
    "generate_dataset",
    "compute_inits",
    "loss_batch",
    "backward",
    "adam_step",
    "train",
]
