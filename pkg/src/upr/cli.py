"""Command line entry point ``upr``.

Exit codes: 0 success, 2 configuration error, 3 failed gradient check.
"""
import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict

from . import bench
from .config import ConfigError, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3

_EXPECTED = {
    "train": ("train",),
    "sweep-esr": ("esr_sweep",),
    "sweep-sparsity": ("sparsity_sweep",),
    "trace": ("layer_trace",),
    "gradcheck": ("gradcheck",),
}


def build_parser():
    p = argparse.ArgumentParser(prog="upr", description="Unfolded phase retrieval experiments")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte-Carlo trials")
    p.add_argument("--preset", choices=("paper", "desk"), default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train learned cases at one (n, m) and write checkpoints")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--seed", type=int, default=None)

    for name, helptext in (
        ("sweep-esr", "ESR versus m/n"),
        ("sweep-sparsity", "ESR versus sparsity level"),
        ("trace", "per-layer relative MSE"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--out", default=None, help="CSV path (defaults to the config's output key)")
        s.add_argument("--seed", type=int, default=None)

    g = sub.add_parser("gradcheck", help="backward pass against finite differences")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, default=None)
    return p


def _load(args):
    cfg = parse_config(args.config, preset=args.preset)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    expected = _EXPECTED[args.command]
    if cfg.experiment not in expected:
        raise ConfigError(f"config experiment '{cfg.experiment}' does not match command '{args.command}'")
    return cfg


def _write_meta(path, cfg, started, extra=None):
    meta = {"config": asdict(cfg), "started": started, "wall_seconds": time.time() - started}
    if extra:
        meta.update(extra)
    with open(path + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, default=str)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    started = time.time()
    try:
        cfg = _load(args)
        if args.command == "gradcheck":
            report = bench.run_gradcheck(cfg)
            print(json.dumps(report, indent=1))
            return EXIT_OK if report["passed"] else EXIT_CHECK
        if args.command == "train":
            summary = bench.run_train(cfg, args.out)
            print(json.dumps(summary, indent=1))
            _write_meta(os.path.join(args.out, "train"), cfg, started)
            return EXIT_OK
        out = args.out or cfg.output
        if not out:
            raise ConfigError("no output path: pass --out or set 'output' in the config")
        runner = {
            "sweep-esr": bench.run_esr_sweep,
            "sweep-sparsity": bench.run_sparsity_sweep,
            "trace": bench.run_layer_trace,
        }[args.command]
        curves = runner(cfg, threads=args.threads)
        bench.emit_curve(curves, out)
        _write_meta(out, cfg, started, {"threads": args.threads})
        sys.stdout.write(bench.curves_csv(curves))
        return EXIT_OK
    except ConfigError as exc:
        print(f"upr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
