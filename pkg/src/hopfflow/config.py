"""Flat ``key = value`` run configuration.

Values are layered: preset, then config file, then ``HOPFFLOW_<KEY>``
environment variables, then command-line flags.  Every layer is a mapping of
raw strings; :func:`build_config` converts and validates the merged result.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

ENV_PREFIX = "HOPFFLOW_"

PRESETS = {
    "round": {"abs_alpha": "2", "abs_beta": "2"},
    "asym": {"abs_alpha": "2", "abs_beta": "4"},
}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class RunConfig:
    abs_alpha: float | None = None
    abs_beta: float | None = None
    n_u: int = 64
    n_sigma: int = 64
    t_max: float = 0.49
    cfl: float = 0.2
    monitor_cadence: float = 0.01
    initial_family: str = "zero"
    epsilon: float = 0.0
    initial_path: str | None = None
    A: float = 10.0
    B: float = 10.0
    out_dir: str = "out"
    seed: int = 42
    hessian_variant: str = "corrected"
    samples: int = 1000
    fd_samples: int = 100
    snapshot_times: tuple[float, ...] = ()
    sweep_alpha: tuple[float, ...] = ()
    sweep_beta: tuple[float, ...] = ()
    workers: int = 1

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


def _optional_str(text: str):
    return text or None


_CONVERT = {
    "abs_alpha": float, "abs_beta": float, "n_u": int, "n_sigma": int, "t_max": float,
    "cfl": float, "monitor_cadence": float, "initial_family": str, "epsilon": float,
    "initial_path": _optional_str, "A": float, "B": float, "out_dir": str, "seed": int,
    "hessian_variant": str, "samples": int, "fd_samples": int, "snapshot_times": _floats,
    "sweep_alpha": _floats, "sweep_beta": _floats, "workers": int,
}


def parse_pairs(text: str) -> dict[str, str]:
    """Split ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def env_pairs(environ=None) -> dict[str, str]:
    """``HOPFFLOW_<KEY>`` overrides, e.g. ``HOPFFLOW_T_MAX=0.3``."""
    environ = os.environ if environ is None else environ
    by_upper = {k.upper(): k for k in KEYS}
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = by_upper.get(name[len(ENV_PREFIX):])
            if key is None:
                raise ConfigError(f"unknown environment override {name}")
            out[key] = value
    return out


def _check_range(cfg: RunConfig, require_moduli: bool):
    def bad(key, why):
        raise ConfigError(f"{key}: {why} (got {getattr(cfg, key)!r})")

    for key in ("abs_alpha", "abs_beta"):
        v = getattr(cfg, key)
        if v is None:
            if require_moduli:
                bad(key, "moduli are required")
        elif not (math.isfinite(v) and v > 1.0):
            bad(key, "must be a finite number > 1")
    if cfg.abs_alpha is not None and cfg.abs_beta is not None and cfg.abs_alpha > cfg.abs_beta:
        bad("abs_alpha", "must not exceed abs_beta")
    for key in ("n_u", "n_sigma"):
        if not 8 <= getattr(cfg, key) <= 4096:
            bad(key, "must lie in [8, 4096]")
    if not 0.0 < cfg.t_max < 0.5:
        bad("t_max", "must lie in (0, 0.5); the flow ends at t = 1/2")
    if not 0.0 < cfg.cfl <= 1.0:
        bad("cfl", "must lie in (0, 1]")
    if not 0.0 < cfg.monitor_cadence < 0.5:
        bad("monitor_cadence", "must lie in (0, 0.5)")
    if cfg.initial_family not in ("zero", "cos-bump", "file"):
        bad("initial_family", "must be zero, cos-bump or file")
    if cfg.initial_family == "file" and not cfg.initial_path:
        bad("initial_path", "required when initial_family = file")
    if not math.isfinite(cfg.epsilon):
        bad("epsilon", "must be finite")
    for key in ("A", "B"):
        if not (math.isfinite(getattr(cfg, key)) and getattr(cfg, key) > 0):
            bad(key, "must be positive")
    if cfg.seed < 0:
        bad("seed", "must be non-negative")
    if cfg.hessian_variant not in ("corrected", "printed"):
        bad("hessian_variant", "must be corrected or printed")
    for key in ("samples", "fd_samples", "workers"):
        if getattr(cfg, key) < 1:
            bad(key, "must be at least 1")
    if any(not 0.0 < s <= cfg.t_max for s in cfg.snapshot_times):
        bad("snapshot_times", "each time must lie in (0, t_max]")
    for key in ("sweep_alpha", "sweep_beta"):
        if any(not (math.isfinite(v) and v > 1.0) for v in getattr(cfg, key)):
            bad(key, "values must be finite numbers > 1")


def build_config(*layers: dict[str, str], require_moduli: bool = True) -> RunConfig:
    """Merge raw layers (later wins), convert and validate."""
    merged = {}
    for layer in layers:
        merged.update(layer)
    values = {}
    for key, raw in merged.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = _CONVERT[key](str(raw).strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    cfg = RunConfig(**values)
    _check_range(cfg, require_moduli)
    return cfg


def parse_config(text: str, require_moduli: bool = True) -> RunConfig:
    """Parse a config file's text on top of the defaults."""
    return build_config(parse_pairs(text), require_moduli=require_moduli)


def replace(cfg: RunConfig, **changes) -> RunConfig:
    out = dataclasses.replace(cfg, **changes)
    _check_range(out, require_moduli=False)
    return out


__all__ = ["ConfigError", "RunConfig", "PRESETS", "ENV_PREFIX", "KEYS", "parse_pairs",
           "env_pairs", "build_config", "parse_config", "replace"]
