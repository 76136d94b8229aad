"""Baseline SPARTA (sparse) and IRWF (dense) phase retrieval solvers.

Every step function accepts a single iterate of shape (n,) or a batch of
shape (B, n) together with measurements of shape (m,) or (B, m).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import relative_mse
from .numerics import DimensionError, hard_threshold, power_iteration, top_k_indices

log = logging.getLogger(__name__)

SPARTA = "sparta"
IRWF = "irwf"


@dataclass(frozen=True)
class SpartaConfig:
    s: int
    alpha: float = 1.0
    tau: float = 0.7
    init_card_frac: float = 1 / 6
    power_iters: int = 100
    one_over_m_scaling: bool = True

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("sparsity s must be >= 1")
        if self.alpha < 0 or self.tau <= 0:
            raise ValueError("alpha must be >= 0 and tau > 0")
        if not 0 < self.init_card_frac <= 1:
            raise ValueError("init_card_frac must lie in (0, 1]")


@dataclass(frozen=True)
class IrwfConfig:
    alpha: float = 1.0
    power_iters: int = 100
    one_over_m_scaling: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class SolverTrace:
    iterates: np.ndarray  # (L + 1, n)
    rel_mse_per_iter: Optional[np.ndarray] = None

    @property
    def final(self):
        return self.iterates[-1]


def _check(A, y, z):
    if z.shape[-1] != A.shape[1] or y.shape[-1] != A.shape[0]:
        raise DimensionError(f"A {A.shape}, y {y.shape}, z {z.shape} do not agree")


def _as_mask(iset, m):
    iset = np.asarray(iset)
    if iset.dtype == bool:
        return iset
    mask = np.zeros(m, dtype=bool)
    mask[iset.astype(int)] = True
    return mask


def sparta_support_estimate(A, y, s):
    """s largest columns of the score (1/m) sum_i y_i^2 A_ij^2."""
    A = np.asarray(A, dtype=float)
    if s > A.shape[1]:
        raise ValueError(f"s={s} exceeds signal length {A.shape[1]}")
    score = (np.asarray(y, dtype=float) ** 2) @ (A**2) / A.shape[0]
    return top_k_indices(score, s)


def sparta_init(A, y, cfg, rng, power_tol=1e-10):
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    _check(A, y, np.zeros(n))
    z = np.zeros(n)
    if not np.any(y):
        log.warning("sparta_init: all-zero measurements, returning zero vector")
        return z
    support = sparta_support_estimate(A, y, cfg.s)
    card = math.ceil(cfg.init_card_frac * m)
    rows = top_k_indices(y, card)
    a = A[np.ix_(rows, support)]
    sq = np.sum(a**2, axis=1)
    keep = sq > 0
    lam = (a[keep].T / sq[keep]) @ a[keep] / card
    v, _ = power_iteration(lam, cfg.power_iters, power_tol, rng)
    z[support] = v * np.sqrt(np.sum(y**2) / m)
    return z


def sparta_truncation_set(A, y, z, tau, as_mask=False):
    """Indices i with |a_i^T z| >= y_i / (1 + tau)."""
    A = np.asarray(A, dtype=float)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check(A, y, z)
    mask = np.abs(z @ A.T) >= y / (1.0 + tau)
    return mask if as_mask else np.flatnonzero(mask)


def sparta_gradient(A, y, z, iset, scale_by_m=True):
    """Truncated amplitude-flow gradient over the index set ``iset``.

    ``iset`` may be an index array or a boolean mask (batched masks allowed).
    """
    A = np.asarray(A, dtype=float)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check(A, y, z)
    mask = _as_mask(iset, A.shape[0])
    p = z @ A.T
    r = np.where(mask, p - y * np.sign(p), 0.0)
    g = r @ A
    return g / A.shape[0] if scale_by_m else g


def sparta_step(A, y, z, cfg):
    mask = sparta_truncation_set(A, y, z, cfg.tau, as_mask=True)
    g = sparta_gradient(A, y, z, mask, cfg.one_over_m_scaling)
    return hard_threshold(z - cfg.alpha * g, cfg.s)


def irwf_init(A, y, power_iters=100, rng=None, power_tol=1e-10):
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    _check(A, y, np.zeros(n))
    if not np.any(y):
        log.warning("irwf_init: all-zero measurements, returning zero vector")
        return np.zeros(n)
    Y = (A.T * y) @ A / m
    v, _ = power_iteration(Y, power_iters, power_tol, rng)
    return np.sqrt(np.pi / 2) * np.mean(y) * v


def irwf_gradient(A, y, z, scale_by_m=True):
    """A^T (A z - y * sign(A z)), optionally divided by m."""
    A = np.asarray(A, dtype=float)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check(A, y, z)
    p = z @ A.T
    g = (p - y * np.sign(p)) @ A
    return g / A.shape[0] if scale_by_m else g


def irwf_step(A, y, z, cfg):
    return z - cfg.alpha * irwf_gradient(A, y, z, cfg.one_over_m_scaling)


def baseline_init(kind, A, y, cfg, rng):
    if kind == SPARTA:
        return sparta_init(A, y, cfg, rng)
    if kind == IRWF:
        return irwf_init(A, y, cfg.power_iters, rng)
    raise ValueError(f"unknown solver kind {kind!r}")


def run_baseline(kind, A, y, cfg, L, truth=None, rng=None, z0=None):
    """Run L iterations of the baseline solver from its own initialization.

    Passing ``z0`` skips the initialization (useful for paired comparisons).
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    step = {SPARTA: sparta_step, IRWF: irwf_step}.get(kind)
    if step is None:
        raise ValueError(f"unknown solver kind {kind!r}")
    z = baseline_init(kind, A, y, cfg, rng) if z0 is None else np.asarray(z0, dtype=float)
    iterates = [z]
    for _ in range(L):
        z = step(A, y, z, cfg)
        iterates.append(z)
    iterates = np.array(iterates)
    rel = None
    if truth is not None:
        rel = relative_mse(iterates, np.broadcast_to(truth, iterates.shape))
    return SolverTrace(iterates, rel)
