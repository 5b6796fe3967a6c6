"""Flat ``key = value`` configuration for the detection pipeline.

Top-level fields use bare keys (``gamma = 0.05``); nested configs use dotted
keys (``solver.lambda_sparse = 0.25``, ``flow.levels = 3``). Tuples are written
comma-separated. ``#`` starts a comment.
"""

from dataclasses import dataclass, field, fields, is_dataclass, replace

from irstd.admm import SolverConfig
from irstd.grouping import LrtfrConfig
from irstd.motion import FlowConfig


@dataclass
class PipelineConfig:
    flow: FlowConfig = field(default_factory=FlowConfig)
    lrtfr: LrtfrConfig = field(default_factory=LrtfrConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    k: int = 4
    beta: float = 0.1
    gamma: float = 0.05
    patch: int = 32
    similar: int = 5
    scatter: str = "mean"
    tr: float = 0.4
    absolute_threshold: bool = False
    match_radius: float = 3.0
    seed: int = 0
    threads: int = 0

    def validate(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.patch < 1 or self.similar < 0:
            raise ValueError("patch must be >= 1 and similar >= 0")
        if self.scatter not in ("mean", "slot0"):
            raise ValueError("scatter must be 'mean' or 'slot0'")
        if not self.absolute_threshold and not 0 < self.tr <= 1:
            raise ValueError("tr must lie in (0, 1]")
        if self.match_radius <= 0:
            raise ValueError("match_radius must be > 0")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")
        if self.flow.levels < 1 or self.flow.iterations < 1 or self.flow.winsize < 1:
            raise ValueError("flow levels, iterations and winsize must be >= 1")
        if not 0 < self.flow.pyr_scale < 1:
            raise ValueError("flow.pyr_scale must lie in (0, 1)")
        if self.lrtfr.iters < 0 or self.lrtfr.lr <= 0:
            raise ValueError("lrtfr.iters must be >= 0 and lrtfr.lr > 0")
        self.solver.validate()
        return self


def _parse(value, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        kind = type(like[0]) if like else float
        return tuple(kind(v) for v in value.split(",") if v.strip())
    return value.strip()


def set_value(cfg, key, value):
    """Return a copy of ``cfg`` with the (possibly dotted) ``key`` parsed from text."""
    head, _, rest = key.strip().partition(".")
    names = {f.name for f in fields(cfg)}
    if head not in names:
        raise KeyError(f"unknown config key {key!r}")
    current = getattr(cfg, head)
    if rest:
        if not is_dataclass(current):
            raise KeyError(f"unknown config key {key!r}")
        return replace(cfg, **{head: set_value(current, rest, value)})
    if is_dataclass(current):
        raise KeyError(f"{key!r} is a section; set one of its fields")
    return replace(cfg, **{head: _parse(value, current)})


def parse_lines(lines):
    pairs = []
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_config(path=None, overrides=()):
    cfg = PipelineConfig()
    if path:
        with open(path) as fh:
            for key, value in parse_lines(fh):
                cfg = set_value(cfg, key, value)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not key=value")
        cfg = set_value(cfg, key, value)
    return cfg.validate()


def dump_config(cfg, prefix=""):
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if is_dataclass(value):
            lines.extend(dump_config(value, prefix + f.name + "."))
        elif isinstance(value, tuple):
            lines.append(f"{prefix}{f.name} = {','.join(str(v) for v in value)}")
        else:
            lines.append(f"{prefix}{f.name} = {value}")
    return lines
