"""Monte-Carlo experiments: ESR sweeps, per-layer traces, training and gradient checks.

All randomness is drawn from substreams of ``Rng(cfg.seed)`` keyed by
(purpose, grid index, trial index), so the learned cases and the baseline see
the same test signals and the same initializations trial by trial.
"""
import csv
import io
import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .config import ConfigError
from .model import encode, is_success, relative_mse
from .numerics import Rng, gaussian_matrix
from .solvers import IRWF, SPARTA, IrwfConfig, SpartaConfig, run_baseline
from .training import (
    CASE_MASKS,
    TrainableMask,
    TrainConfig,
    _unroll,
    backward,
    compute_inits,
    generate_dataset,
    loss_batch,
    sample_signal,
    train,
)
from .unfolded import UPR_IRWF, UPR_SPARTA, forward, init_for, load_params, make_identity_params, save_params

log = logging.getLogger(__name__)

ESR_HEADER = ["x", "esr", "trials", "case", "solver", "seed"]
TRACE_HEADER = ["layer", "median_rel_mse", "q25", "q75", "case", "solver", "seed"]
LOSS_HEADER = ["epoch", "mean_loss"]

GRADCHECK_H = 1e-6
GRADCHECK_TOL = 1e-5
GRADCHECK_MARGIN = 1e-3


class CheckpointError(ConfigError):
    pass


@dataclass
class TrialResult:
    trial: int
    rel_mse: float
    success: bool
    trace: Optional[np.ndarray] = None


@dataclass
class Curve:
    kind: str  # "esr" or "trace"
    x: np.ndarray
    y: np.ndarray
    trials: int
    seed: int
    case: int
    solver: str
    q25: Optional[np.ndarray] = None
    q75: Optional[np.ndarray] = None


# -- building blocks -----------------------------------------------------------


def solver_config(cfg, s=None):
    if cfg.solver == SPARTA:
        kw = dict(
            s=s if s is not None else cfg.sparsity,
            tau=cfg.tau,
            init_card_frac=cfg.init_card_frac,
            power_iters=cfg.power_iters,
            one_over_m_scaling=cfg.one_over_m_scaling,
        )
        if cfg.alpha is not None:
            kw["alpha"] = cfg.alpha
        return SpartaConfig(**kw)
    kw = dict(power_iters=cfg.power_iters, one_over_m_scaling=cfg.one_over_m_scaling)
    if cfg.alpha is not None:
        kw["alpha"] = cfg.alpha
    return IrwfConfig(**kw)


def network_kind(solver):
    return UPR_SPARTA if solver == SPARTA else UPR_IRWF


def _derive_seed(seed, *labels):
    """Integer seed for a labelled sub-experiment."""
    return Rng(seed).child(*labels).integer()


def test_signals(cfg, grid, n, k):
    root = Rng(cfg.seed)
    return [sample_signal(n, k, root.child("test", grid, t)) for t in range(cfg.trials)]


def _init_rngs(cfg, grid):
    root = Rng(cfg.seed)
    return [root.child("init", grid, t) for t in range(cfg.trials)]


def _pmap(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def evaluate_baseline(kind, A, scfg, L, xs, rngs, threads=1):
    def one(t):
        x = xs[t]
        tr = run_baseline(kind, A, encode(A, x), scfg, L, truth=x, rng=rngs[t])
        rel = float(tr.rel_mse_per_iter[-1])
        return TrialResult(t, rel, bool(is_success(rel)), tr.rel_mse_per_iter)

    return _pmap(one, range(len(xs)), threads)


def evaluate_network(params, xs, rngs, threads=1):
    def one(t):
        x = xs[t]
        y = encode(params.A, x)
        z0 = init_for(params, params.A, y, rngs[t])
        _, tr = forward(params, y, z0)
        rels = relative_mse(tr.iterates, np.broadcast_to(x, tr.iterates.shape))
        rel = float(rels[-1])
        return TrialResult(t, rel, bool(is_success(rel)), rels)

    return _pmap(one, range(len(xs)), threads)


def esr(results):
    return sum(r.success for r in results) / len(results)


def _checkpoint_path(cfg, case, label):
    return os.path.join(cfg.checkpoint_dir, f"{cfg.solver}_case{case}_{label}.json")


def learned_params(cfg, case, A, grid, label, k, s=None):
    """Train (or load) the network for one grid point."""
    path = _checkpoint_path(cfg, case, label) if cfg.checkpoint_dir else None
    if not cfg.train_inline:
        if path is None or not os.path.exists(path):
            raise CheckpointError(f"missing checkpoint for grid point {label} (case {case}): {path}")
        return load_params(path)
    scfg = solver_config(cfg, s)
    params0 = make_identity_params(cfg.depth, A.shape[1], scfg.alpha, A, network_kind(cfg.solver), scfg)
    data = generate_dataset(A.shape[1], k, cfg.train_size, _derive_seed(cfg.seed, "train", grid))
    tcfg = train_config(cfg, CASE_MASKS[case], _derive_seed(cfg.seed, "fit", grid))
    log.info("training case %d at %s (%d samples, %d epochs)", case, label, cfg.train_size, cfg.epochs)
    params, curve = train(params0, data, tcfg)
    if path is not None:
        os.makedirs(cfg.checkpoint_dir, exist_ok=True)
        save_params(params, path, epoch=cfg.epochs, loss_curve=curve.tolist())
    return params


def train_config(cfg, mask, seed):
    return TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        adam_beta1=cfg.adam_beta1,
        adam_beta2=cfg.adam_beta2,
        adam_eps=cfg.adam_eps,
        mask=mask,
        seed=seed,
    )


# -- experiments ---------------------------------------------------------------


def _pretrain(cfg, jobs, threads):
    """Train independent (case, grid point) networks in worker processes.

    Each job draws from its own substreams, so results do not depend on
    scheduling. Returns {(case, grid): params}.
    """
    if not (threads and threads > 1 and len(jobs) > 1 and cfg.train_inline):
        return {}
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futs = {(c, g): pool.submit(learned_params, cfg, c, A, g, label, k, s) for c, A, g, label, k, s in jobs}
        return {key: f.result() for key, f in futs.items()}


def _sweep(cfg, points, threads):
    """points: list of (x value, m, k, label). Returns one Curve per case."""
    kind = cfg.solver
    curves = {c: [] for c in cfg.case}
    mats = [gaussian_matrix(m, cfg.n, Rng(cfg.seed).child("A", g)) for g, (_, m, _, _) in enumerate(points)]
    sp = lambda k: k if kind == SPARTA else None
    jobs = [(c, mats[g], g, label, k, sp(k)) for g, (_, _, k, label) in enumerate(points) for c in cfg.case if c != 1]
    trained = _pretrain(cfg, jobs, threads)
    for g, (xval, m, k, label) in enumerate(points):
        A = mats[g]
        xs = test_signals(cfg, g, cfg.n, k)
        rngs = _init_rngs(cfg, g)
        for c in cfg.case:
            if c == 1:
                res = evaluate_baseline(kind, A, solver_config(cfg, sp(k)), cfg.depth, xs, rngs, threads)
            else:
                params = trained.get((c, g)) or learned_params(cfg, c, A, g, label, k, sp(k))
                res = evaluate_network(params, xs, rngs, threads)
            curves[c].append((xval, esr(res)))
            log.info("%s case %d %s: ESR %.3f", kind, c, label, curves[c][-1][1])
    return [
        Curve("esr", np.array([p[0] for p in pts]), np.array([p[1] for p in pts]), cfg.trials, cfg.seed, c, kind)
        for c, pts in curves.items()
    ]


def run_esr_sweep(cfg, threads=1):
    """ESR against m/n, one curve per requested case."""
    if not cfg.m_over_n:
        raise ConfigError("esr_sweep needs m_over_n")
    k = cfg.sparsity
    points = [(r, max(1, round(r * cfg.n)), k, f"x{r:g}") for r in cfg.m_over_n]
    return _sweep(cfg, points, threads)


def run_sparsity_sweep(cfg, threads=1):
    """ESR against the sparsity level k at fixed (n, m)."""
    if not cfg.k_grid:
        raise ConfigError("sparsity_sweep needs k_grid")
    m = cfg.measurements() if (cfg.m is not None or cfg.m_over_n) else cfg.n
    points = [(k, m, k, f"k{k}") for k in cfg.k_grid]
    return _sweep(cfg, points, threads)


def _trace_curve(results, cfg, case):
    T = np.array([r.trace for r in results])
    q25, med, q75 = np.quantile(T, [0.25, 0.5, 0.75], axis=0)
    return Curve("trace", np.arange(T.shape[1]), med, cfg.trials, cfg.seed, case, cfg.solver, q25, q75)


def run_layer_trace(cfg, threads=1):
    """Median and quartile relative MSE per layer for the baseline and each learned case."""
    m = cfg.measurements()
    k = cfg.sparsity
    s = k if cfg.solver == SPARTA else None
    A = gaussian_matrix(m, cfg.n, Rng(cfg.seed).child("A", 0))
    xs = test_signals(cfg, 0, cfg.n, k)
    rngs = _init_rngs(cfg, 0)
    curves = []
    cases = [1] + [c for c in cfg.case if c != 1]
    trained = _pretrain(cfg, [(c, A, 0, f"m{m}", k, s) for c in cases if c != 1], threads)
    for c in cases:
        if c == 1:
            res = evaluate_baseline(cfg.solver, A, solver_config(cfg, s), cfg.depth, xs, rngs, threads)
        else:
            params = trained.get((c, 0)) or learned_params(cfg, c, A, 0, f"m{m}", k, s)
            res = evaluate_network(params, xs, rngs, threads)
        curves.append(_trace_curve(res, cfg, c))
    return curves


def run_train(cfg, out_dir):
    """Train each learned case at a single (n, m); write checkpoints and loss curves."""
    m = cfg.measurements()
    k = cfg.sparsity
    s = k if cfg.solver == SPARTA else None
    scfg = solver_config(cfg, s)
    A = gaussian_matrix(m, cfg.n, Rng(cfg.seed).child("A", 0))
    data = generate_dataset(cfg.n, k, cfg.train_size, _derive_seed(cfg.seed, "train", 0))
    test = generate_dataset(cfg.n, k, cfg.test_size, _derive_seed(cfg.seed, "testset", 0))
    os.makedirs(out_dir, exist_ok=True)
    summary = {}
    params0 = make_identity_params(cfg.depth, cfg.n, scfg.alpha, A, network_kind(cfg.solver), scfg)
    test_rng = Rng(cfg.seed).child("testset-init")
    summary[1] = {"test_loss": loss_batch(params0, test.samples, test_rng)}
    for c in [c for c in cfg.case if c != 1]:
        tcfg = train_config(cfg, CASE_MASKS[c], _derive_seed(cfg.seed, "fit", 0))
        params, curve = train(params0, data, tcfg, progress=lambda e, l: log.info("epoch %d loss %.6g", e, l))
        test_loss = loss_batch(params, test.samples, test_rng)
        stem = os.path.join(out_dir, f"{cfg.solver}_case{c}")
        save_params(params, stem + ".json", epoch=cfg.epochs, loss_curve=curve.tolist(), test_loss=test_loss)
        with open(stem + "_loss.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(loss_csv(curve))
        summary[c] = {"test_loss": test_loss, "final_train_loss": float(curve[-1]) if len(curve) else None}
    return summary


# -- gradient check --------------------------------------------------------------


def trajectory_margin(params, X, Z0):
    """Smallest distance to any nondifferentiable switch along the unrolled path."""
    A = params.A
    cfg = params.solver_cfg
    Y = np.abs(X @ A.T)
    margins = [Y.min()]
    _, Z, caches = _unroll(params, X, Z0, keep=True)
    for i, (z, s, r, g, tmask, hmask) in enumerate(caches):
        p = z @ A.T
        margins.append(np.abs(p).min())
        if tmask is not None:
            margins.append(np.abs(np.abs(p) - Y / (1 + cfg.tau)).min())
            v = np.abs(z - params.W[i] ** 2 * g)
            srt = -np.sort(-v, axis=1)
            if cfg.s < v.shape[1]:
                margins.append((srt[:, cfg.s - 1] - srt[:, cfg.s]).min())
    minus = np.sum((Z - X) ** 2, axis=1)
    plus = np.sum((Z + X) ** 2, axis=1)
    margins.append(np.abs(minus - plus).min())
    return float(min(margins))


def _rel_err(g, fd):
    scale = np.abs(fd).max()
    if scale == 0 and np.abs(g).max() == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-6 * scale)
    return float(np.max(np.abs(g - fd) / denom))


def gradcheck_instance(params, X, Z0, mask, h=GRADCHECK_H):
    """Max relative error of backward against central differences, per block."""
    _, grads = backward(params, X, None, z0s=Z0, mask=mask)

    def fd(attr):
        base = getattr(params, attr)
        out = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for sgn in (1, -1):
                q = params.copy()
                getattr(q, attr)[idx] += sgn * h
                vals.append(loss_batch(q, X, None, z0s=Z0))
            out[idx] = (vals[0] - vals[1]) / (2 * h)
        return out

    report = {"A": 0.0, "layers": 0.0}
    if mask.train_A:
        report["A"] = _rel_err(grads.d_A, fd("A"))
    if mask.train_layers:
        report["layers"] = _rel_err(grads.d_layers, fd("W"))
    return report


def run_gradcheck(cfg, max_attempts=100, batch=2):
    """Gradient check on a margin-guarded random instance; resamples degenerate draws."""
    if cfg.n > 10 or cfg.measurements() > 20 or cfg.depth > 3:
        raise ConfigError("gradcheck expects n <= 10, m <= 20, L <= 3")
    m = cfg.measurements()
    k = cfg.sparsity
    s = k if cfg.solver == SPARTA else None
    scfg = solver_config(cfg, s)
    case = cfg.case[0]
    mask = CASE_MASKS.get(case, TrainableMask(train_A=True, train_layers=True))
    for attempt in range(max_attempts):
        r = Rng(cfg.seed).child("gradcheck", attempt)
        A = gaussian_matrix(m, cfg.n, r.child("A"))
        params = make_identity_params(cfg.depth, cfg.n, scfg.alpha, A, network_kind(cfg.solver), scfg)
        params.W = params.W * (1 + 0.2 * r.child("W").normal(params.W.shape))
        X = np.array([sample_signal(cfg.n, k, r.child("x", b)) for b in range(batch)])
        Z0 = compute_inits(params, X, [r.child("init", b) for b in range(batch)])
        if trajectory_margin(params, X, Z0) <= GRADCHECK_MARGIN:
            continue
        report = gradcheck_instance(params, X, Z0, mask)
        report.update(attempt=attempt, case=case, passed=max(report["A"], report["layers"]) <= GRADCHECK_TOL)
        return report
    raise RuntimeError(f"no margin-guarded instance found in {max_attempts} attempts")


def mask_combinations():
    for a, w in itertools.product((False, True), repeat=2):
        if a or w:
            yield TrainableMask(train_A=a, train_layers=w)


# -- CSV -------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def curves_csv(curves):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    kind = curves[0].kind
    w.writerow(ESR_HEADER if kind == "esr" else TRACE_HEADER)
    for c in curves:
        for i in range(len(c.x)):
            x = c.x[i]
            if kind == "esr":
                w.writerow([_fmt(x), _fmt(c.y[i]), c.trials, c.case, c.solver, c.seed])
            else:
                w.writerow([_fmt(x), _fmt(c.y[i]), _fmt(c.q25[i]), _fmt(c.q75[i]), c.case, c.solver, c.seed])
    return buf.getvalue()


def loss_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOSS_HEADER)
    for e, l in enumerate(curve):
        w.writerow([e, _fmt(l)])
    return buf.getvalue()


def emit_curve(curves, path):
    if isinstance(curves, Curve):
        curves = [curves]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(curves_csv(curves))


def read_curves(path) -> List[Curve]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    kind = "esr" if header == ESR_HEADER else "trace"
    if kind == "trace" and header != TRACE_HEADER:
        raise ValueError(f"unrecognised CSV header {header}")
    groups = {}
    for row in body:
        key = (int(row[-3]), row[-2], int(row[-1])) if kind == "trace" else (int(row[3]), row[4], int(row[5]))
        groups.setdefault(key, []).append(row)
    curves = []
    for (case, solver, seed), rows in groups.items():
        if kind == "esr":
            curves.append(
                Curve(
                    "esr",
                    np.array([float(r[0]) for r in rows]),
                    np.array([float(r[1]) for r in rows]),
                    int(rows[0][2]),
                    seed,
                    case,
                    solver,
                )
            )
        else:
            curves.append(
                Curve(
                    "trace",
                    np.array([int(r[0]) for r in rows]),
                    np.array([float(r[1]) for r in rows]),
                    0,
                    seed,
                    case,
                    solver,
                    np.array([float(r[2]) for r in rows]),
                    np.array([float(r[3]) for r in rows]),
                )
            )
    return curves
