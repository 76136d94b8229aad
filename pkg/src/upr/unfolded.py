"""Unfolded (UPR) decoders: SPARTA and IRWF iterations with learned preconditioners."""
import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .numerics import DimensionError, hard_threshold
from .solvers import (
    IRWF,
    SPARTA,
    IrwfConfig,
    SolverTrace,
    SpartaConfig,
    irwf_gradient,
    irwf_init,
    sparta_gradient,
    sparta_init,
    sparta_truncation_set,
)

FORMAT_VERSION = 1
UPR_SPARTA = "upr-sparta"
UPR_IRWF = "upr-irwf"
_BASE_KIND = {UPR_SPARTA: SPARTA, UPR_IRWF: IRWF}


@dataclass
class LayerParams:
    """Preconditioner of one layer.

    Normally the diagonal factor ``w`` with G = diag(w**2). A dense PSD ``G``
    may be given instead; it is used as-is and never trained.
    """

    w: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None

    def precondition(self, g):
        if self.G is not None:
            return g @ np.asarray(self.G).T
        return self.w**2 * g

    def matrix(self):
        return np.asarray(self.G) if self.G is not None else np.diag(self.w**2)


@dataclass
class NetworkParams:
    kind: str
    A: np.ndarray  # (m, n)
    W: np.ndarray  # (L, n); row l is w for layer l
    solver_cfg: Union[SpartaConfig, IrwfConfig]
    alpha_baseline: float = field(default=1.0)

    def __post_init__(self):
        if self.kind not in _BASE_KIND:
            raise ValueError(f"unknown network kind {self.kind!r}")
        self.A = np.asarray(self.A, dtype=float)
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if self.W.shape[0] < 1:
            raise ValueError("network needs at least one layer")
        if self.W.shape[1] != self.A.shape[1]:
            raise DimensionError(f"W has {self.W.shape[1]} columns but A has {self.A.shape[1]}")

    @property
    def L(self):
        return self.W.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def base_kind(self):
        return _BASE_KIND[self.kind]

    def layer(self, i):
        return LayerParams(w=self.W[i])

    @property
    def layers(self):
        return [self.layer(i) for i in range(self.L)]

    def copy(self):
        return NetworkParams(self.kind, self.A.copy(), self.W.copy(), self.solver_cfg, self.alpha_baseline)


def make_identity_params(L, n, alpha, A, kind, cfg):
    """Every layer gets G = alpha * I, i.e. the untrained baseline."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    A = np.asarray(A, dtype=float)
    if A.shape[1] != n:
        raise DimensionError(f"A has {A.shape[1]} columns, expected {n}")
    W = np.full((L, n), np.sqrt(alpha))
    return NetworkParams(kind, A.copy(), W, cfg, float(alpha))


def upr_sparta_layer(z, A, y, lp, cfg):
    mask = sparta_truncation_set(A, y, z, cfg.tau, as_mask=True)
    g = sparta_gradient(A, y, z, mask, cfg.one_over_m_scaling)
    return hard_threshold(z - lp.precondition(g), cfg.s)


def upr_irwf_layer(z, A, y, lp, scale_by_m=True):
    return z - lp.precondition(irwf_gradient(A, y, z, scale_by_m))


def apply_layer(params, i, z, y):
    lp = params.layer(i)
    cfg = params.solver_cfg
    if params.kind == UPR_SPARTA:
        return upr_sparta_layer(z, params.A, y, lp, cfg)
    return upr_irwf_layer(z, params.A, y, lp, cfg.one_over_m_scaling)


def forward(params, y, z0):
    """Apply layers 0..L-1; returns the final estimate and the iterate trace."""
    z = np.asarray(z0, dtype=float)
    if z.shape[-1] != params.n:
        raise DimensionError(f"z0 has length {z.shape[-1]}, expected {params.n}")
    iterates = [z]
    for i in range(params.L):
        z = apply_layer(params, i, z, y)
        iterates.append(z)
    return z, SolverTrace(np.array(iterates))


def init_for(params, A, y, rng):
    cfg = params.solver_cfg
    if params.kind == UPR_SPARTA:
        return sparta_init(A, y, cfg, rng)
    return irwf_init(A, y, cfg.power_iters, rng)


# -- serialization -----------------------------------------------------------


def params_to_dict(params):
    return {
        "version": FORMAT_VERSION,
        "kind": params.kind,
        "L": params.L,
        "n": params.n,
        "m": params.m,
        "alpha_baseline": params.alpha_baseline,
        "solver_cfg": asdict(params.solver_cfg),
        "layers": params.W.tolist(),
        "A": params.A.reshape(-1).tolist(),
    }


def params_from_dict(d):
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')!r}")
    kind = d["kind"]
    cfg_cls = SpartaConfig if kind == UPR_SPARTA else IrwfConfig
    A = np.array(d["A"], dtype=float).reshape(d["m"], d["n"])
    W = np.array(d["layers"], dtype=float).reshape(d["L"], d["n"])
    return NetworkParams(kind, A, W, cfg_cls(**d["solver_cfg"]), float(d["alpha_baseline"]))


def save_params(params, path, **extra):
    # json writes floats with repr(), which round-trips float64 exactly
    doc = params_to_dict(params)
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))
