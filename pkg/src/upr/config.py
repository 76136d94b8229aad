"""Experiment configuration: flat ``key = value`` files and named presets.

Grammar, one entry per line::

    # comment                      (blank lines and '#' comments are ignored)
    key = value                    (scalar: int, float, true/false, or bare string)
    key = v1, v2, v3               (list-valued keys only)

Keys must be fields of :class:`ExperimentConfig`; anything else is an error.
"""
import dataclasses
import os
import typing
from dataclasses import dataclass, field
from typing import List, Optional

EXPERIMENTS = ("esr_sweep", "sparsity_sweep", "layer_trace", "train", "gradcheck")
SOLVERS = ("sparta", "irwf")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    solver: str
    n: int = 40
    m: Optional[int] = None
    m_over_n: List[float] = field(default_factory=list)
    k: Optional[int] = None
    k_grid: List[int] = field(default_factory=list)
    L: Optional[int] = None
    case: List[int] = field(default_factory=lambda: [1])
    trials: int = 100
    train_size: int = 1024
    test_size: int = 1024
    seed: int = 0
    # solver
    alpha: Optional[float] = None
    tau: float = 0.7
    init_card_frac: float = 1 / 6
    power_iters: int = 100
    one_over_m_scaling: bool = True
    # training
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    # io
    checkpoint_dir: Optional[str] = None
    train_inline: bool = True
    output: Optional[str] = None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.n < 1 or (self.m is not None and self.m < 1):
            raise ConfigError("n and m must be positive")
        if any(r <= 0 for r in self.m_over_n) or any(k < 1 or k > self.n for k in self.k_grid):
            raise ConfigError("grids must be positive (and k within [1, n])")
        if not self.case or any(c not in (1, 2, 3, 4) for c in self.case):
            raise ConfigError(f"case must be drawn from 1..4, got {self.case}")
        if self.trials < 1 or self.train_size < 1 or self.test_size < 1:
            raise ConfigError("trials and dataset sizes must be positive")
        if self.k is not None and not 1 <= self.k <= self.n:
            raise ConfigError(f"k={self.k} outside [1, n={self.n}]")
        if self.L is not None and self.L < 1:
            raise ConfigError("L must be >= 1")
        return self

    @property
    def depth(self):
        if self.L is not None:
            return self.L
        return 20 if self.solver == "sparta" else 50

    @property
    def sparsity(self):
        if self.k is not None:
            return self.k
        return self.n if self.solver == "irwf" else max(1, round(0.05 * self.n))

    def measurements(self):
        if self.m is not None:
            return self.m
        if self.m_over_n:
            return max(1, round(self.m_over_n[0] * self.n))
        raise ConfigError("set either m or m_over_n")


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_HINTS = typing.get_type_hints(ExperimentConfig)
REQUIRED = ("experiment", "solver")


def _scalar(text, typ, key, lineno):
    try:
        if typ is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"line {lineno}: key '{key}' expects {typ.__name__}, got {text!r}") from None


def _convert(key, text, lineno):
    typ = _HINTS[key]
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin is typing.Union:  # Optional[...]
        if text.lower() == "none":
            return None
        typ = args[0]
        origin = typing.get_origin(typ)
        args = typing.get_args(typ)
    if origin in (list, List):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"line {lineno}: key '{key}' needs at least one value")
        return [_scalar(p, args[0], key, lineno) for p in parts]
    return _scalar(text, typ, key, lineno)


def parse_text(text, base=None):
    """Parse config text into a dict of typed values (no defaults applied)."""
    values = dict(base or {})
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        seen.add(key)
        values[key] = _convert(key, value, lineno)
    return values


def preset_values(name, experiment, solver):
    """Defaults for the ``paper`` and ``desk`` profiles."""
    if name is None:
        return {}
    if name not in ("paper", "desk"):
        raise ConfigError(f"unknown preset {name!r}")
    paper = name == "paper"
    sparse = solver == "sparta"
    v = {
        "train_size": 2048 if paper else 1024,
        "test_size": 2048 if paper else 1024,
        "epochs": 100,
        "learning_rate": 1e-4,
        "trials": 100,
        "L": 20 if sparse else 50,
    }
    if experiment in ("esr_sweep", "train"):
        v["n"] = 100 if paper else 50
        if sparse:
            v["k"] = 5 if paper else 3
            v["m_over_n"] = [0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] if paper else [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        else:
            v["m_over_n"] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0] if paper else [2.0, 3.0, 4.0, 5.0, 6.0]
    elif experiment == "sparsity_sweep":
        v["n"] = v["m"] = 150 if paper else 75
        v["k_grid"] = [5, 10, 15, 20, 25, 30, 35, 40] if paper else [2, 4, 6, 8, 10, 12, 14, 16]
    elif experiment == "layer_trace":
        if sparse:
            v["n"] = v["m"] = 300 if paper else 150
            v["k"] = 5 if paper else 3
        else:
            v["n"], v["m"] = (100, 600) if paper else (50, 300)
        v["case"] = [3]
    elif experiment == "gradcheck":
        v.update(n=4, m=8, L=2, k=2 if sparse else None, case=[4])
    return v


def parse_config(path, preset=None, env=None):
    """Read a config file, layering it over an optional preset.

    ``UPR_SEED`` in the environment overrides the file's seed.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_text(text, preset, env)


def config_from_text(text, preset=None, env=None):
    values = parse_text(text)
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    merged = preset_values(preset, values["experiment"], values["solver"])
    merged.update(values)
    env = os.environ if env is None else env
    if env.get("UPR_SEED"):
        try:
            merged["seed"] = int(env["UPR_SEED"])
        except ValueError:
            raise ConfigError(f"UPR_SEED must be an integer, got {env['UPR_SEED']!r}") from None
    return ExperimentConfig(**merged).validate()
