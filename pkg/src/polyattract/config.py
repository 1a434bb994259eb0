"""Flat ``key = value`` experiment configuration.

Keys carry dotted section prefixes (``solver.dt = 1e-3``). Blank lines and
``#`` comments are ignored. Unknown keys, malformed values and out-of-range
numbers are rejected before any computation starts.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path

MODES = ("iterate", "bound", "simulate", "pair", "cloud", "rates")


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit_open(x):
    return 0 < x < 1


def _anything(x):
    return True


def _num(text: str) -> float:
    """A float, also accepting exact fractions such as ``1/3``."""
    try:
        return float(text)
    except ValueError:
        return float(Fraction(text.strip()))


def _float_list(text: str) -> list[float]:
    return [_num(v) for v in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    return int(text, 0)


# key -> (parser, range check, range description)
SCHEMA = {
    "mode": (str, lambda v: v in MODES, f"one of {', '.join(MODES)}"),
    "seed": (_int, lambda v: 0 <= v < 2**64, "in [0, 2^64)"),
    "output.dir": (str, _anything, ""),
    "output.plots": (_bool, _anything, ""),
    "output.snapshots": (_bool, _anything, ""),
    "solver.length": (_num, _positive, "> 0"),
    "solver.n_modes": (_int, _positive, ">= 1"),
    "solver.dt": (_num, _positive, "> 0"),
    "solver.k": (_num, _nonneg, ">= 0"),
    "solver.p": (_num, _positive, "> 0"),
    "solver.c3": (_num, _nonneg, ">= 0"),
    "solver.c1": (_num, _anything, ""),
    "solver.h": (_float_list, _anything, ""),
    "solver.kernel_sigma": (_float_list, _anything, ""),
    "solver.kernel_phi": (_int_list, lambda v: all(i >= 1 for i in v), "mode indices >= 1"),
    "solver.kernel_psi": (_int_list, lambda v: all(i >= 1 for i in v), "mode indices >= 1"),
    "rates.beta": (_num, _unit_open, "in (0, 1)"),
    "rates.bigC": (_num, _positive, "> 0"),
    "rates.bigT": (_num, _positive, "> 0"),
    "rates.y0": (_num, _nonneg, ">= 0"),
    "rates.n": (_int, _positive, ">= 1"),
    "bound.alpha0": (_num, _nonneg, ">= 0"),
    "bound.t_end": (_num, _positive, "> 0"),
    "bound.n_points": (_int, lambda v: v >= 2, ">= 2"),
    "bound.cp": (_num, _positive, "> 0"),
    "bound.t_star": (_num, _nonneg, ">= 0"),
    "simulate.t_end": (_num, _positive, "> 0"),
    "simulate.record_every": (_int, _positive, ">= 1"),
    "simulate.init_radius": (_num, _nonneg, ">= 0"),
    "simulate.init_a": (_float_list, _anything, ""),
    "simulate.init_b": (_float_list, _anything, ""),
    "pair.T": (_num, _positive, "> 0"),
    "pair.count": (_int, _positive, ">= 1"),
    "pair.radius": (_num, _positive, "> 0"),
    "pair.cp": (_num, _positive, "> 0"),
    "pair.C": (_num, _positive, "> 0"),
    "harness.cloud_size": (_int, lambda v: v >= 1, ">= 1"),
    "harness.init_radius": (_num, _positive, "> 0"),
    "harness.horizon": (_num, _positive, "> 0"),
    "harness.sample_interval": (_num, _positive, "> 0"),
    "harness.burn_in": (_num, _positive, "> 0"),
    "harness.reference_size": (_int, _positive, ">= 1"),
    "harness.eps": (_num, _positive, "> 0"),
    "harness.cover_size": (_int, _positive, ">= 1"),
    "harness.calib_members": (_int, _positive, ">= 1"),
    "harness.calib_radius": (_num, _positive, "> 0"),
    "harness.calib_time": (_num, _positive, "> 0"),
    "harness.window_start": (_num, _nonneg, ">= 0"),
    "harness.window_end": (_num, _positive, "> 0"),
    "harness.cp": (_num, _positive, "> 0"),
    "decay.lam": (_num, _positive, "> 0"),
    "decay.dt": (_num, _positive, "> 0"),
    "decay.t_end": (_num, _positive, "> 0"),
    "decay.window_start": (_num, _positive, "> 0"),
    "decay.a0": (_num, _anything, ""),
}

REQUIRED = {
    "iterate": ("rates.beta", "rates.bigC", "rates.y0"),
    "bound": ("rates.beta", "rates.bigC", "bound.alpha0"),
    "simulate": ("solver.k", "solver.p"),
    "pair": ("solver.k", "solver.p"),
    "cloud": ("solver.k", "solver.p"),
    "rates": ("solver.k", "solver.p"),
}


@dataclass
class ExperimentConfig:
    mode: str
    values: dict = field(default_factory=dict)
    source: str | None = None

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values

    def section(self, name: str) -> dict:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.values.items() if k.startswith(prefix)}


def parse_text(text: str, source: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'", key)
        raw[key] = value
    for key, value in (overrides or {}).items():
        raw[key] = str(value)
    return validate(raw, source)


def load(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text, str(path), overrides)


def validate(raw: dict[str, str], source: str | None = None) -> ExperimentConfig:
    values = {}
    for key, text in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'", key)
        parse, check, desc = SCHEMA[key]
        try:
            value = parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", key) from exc
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"'{key}' must be finite", key)
        if not check(value):
            raise ConfigError(f"'{key}' = {text} out of range ({desc})", key)
        values[key] = value
    if "mode" not in values:
        raise ConfigError("missing required key 'mode'", "mode")
    mode = values["mode"]
    for key in REQUIRED[mode]:
        if key not in values:
            raise ConfigError(f"missing required key '{key}' for mode {mode}", key)
    n_sig = len(values.get("solver.kernel_sigma", []))
    for key in ("solver.kernel_phi", "solver.kernel_psi"):
        # omitted mode lists default to mode 1 for every factor
        if key in values and len(values[key]) != n_sig:
            raise ConfigError(f"'{key}' must list one mode per kernel_sigma entry", key)
    n_modes = values.get("solver.n_modes", 64)
    for key in ("solver.h", "simulate.init_a", "simulate.init_b"):
        if len(values.get(key, [])) > n_modes:
            raise ConfigError(f"'{key}' has more entries than solver.n_modes", key)
    for key in ("solver.kernel_phi", "solver.kernel_psi"):
        if any(i > n_modes for i in values.get(key, [])):
            raise ConfigError(f"'{key}' refers to a mode above solver.n_modes", key)
    if "harness.window_start" in values and "harness.window_end" in values:
        if values["harness.window_start"] >= values["harness.window_end"]:
            raise ConfigError("harness.window_start must be below harness.window_end", "harness.window_start")
    if values.get("decay.window_start", 1e2) >= values.get("decay.t_end", 1e4):
        raise ConfigError("decay.window_start must be below decay.t_end", "decay.window_start")
    return ExperimentConfig(mode, values, source)
