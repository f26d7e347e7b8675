"""Run configuration: flat JSON keys, documented defaults, strict validation.

Precedence is command-line flags over the config file over defaults. Keys
whose default is ``None`` take a preset-specific value, listed in
``PRESET_DEFAULTS``.
"""

import json
import math
from dataclasses import dataclass

from .errors import ConfigError

PRESETS = ("oscillator-nonergodic", "interferometer-incompatibility", "classical-torus", "sqt-ergodic")

GOLDEN_ALPHA = (1.0 + math.sqrt(5.0)) / 4.0  # omega2 / omega1 = golden ratio


@dataclass(frozen=True)
class Key:
    name: str
    kind: str  # int | float | str | bool | pair | list | floatlist
    default: object
    help: str


KEYS = (
    Key("preset", "str", "oscillator-nonergodic", "pipeline to run: " + ", ".join(PRESETS)),
    Key("seed", "int", 0, "64-bit seed of the counter-based generator"),
    Key("members", "int", None, "ensemble size (sqt-ergodic: number of random spectral systems)"),
    Key("h", "float", None, "integrator step"),
    Key("T", "float", None, "horizon"),
    Key("delta0", "float", 0.0, "width of the initial x1 - x2 offsets (interferometer)"),
    Key("sigma0", "float", 0.0, "width of the initial y1 + y2 offsets (interferometer)"),
    Key("x0", "float", 20.0, "abscissa of the detection plane"),
    Key("d1", "pair", [0.5, 1.5], "detector D1 interval on the plane (particle 1)"),
    Key("d2", "pair", [0.25, 1.25], "detector D2 interval on the plane (particle 2)"),
    Key("screen", "float", 10.0, "half-height of the plane window normalizing the space average"),
    Key("widths", "list", [], "extra (delta0, sigma0) pairs for a pStar width sweep"),
    Key("omega1", "float", 1.0, "oscillator 1 angular frequency"),
    Key("omega2", "float", 2.0, "oscillator 2 angular frequency"),
    Key("a1", "float", 1.0, "oscillator 1 packet amplitude"),
    Key("a2", "float", 1.0, "oscillator 2 packet amplitude"),
    Key("hbar", "float", 1.0, "action scale"),
    Key("observables", "strlist", ["Q1", "Q2", "Q1^2"], "oscillator observables to compare"),
    Key("k", "float", 2.0 * math.pi, "interferometer wavenumber"),
    Key("a", "float", 1.0, "slit half-separation"),
    Key("m", "float", 1.0, "particle mass (interferometer)"),
    Key("epsilon_r", "float", 1e-3, "radius of the excluded ball around each slit"),
    Key("model", "str", "bosonic", "interferometer wavefunction: bosonic or nonoverlap"),
    Key("alpha_rational", "float", 1.5, "pendulum coupling giving a rational frequency ratio"),
    Key("alpha_irrational", "float", GOLDEN_ALPHA, "pendulum coupling giving an irrational ratio"),
    Key("q0", "pair", [0.3, 0.0], "initial pendulum angles"),
    Key("qdot0", "pair", [0.0, 0.2], "initial pendulum angular velocities"),
    Key("grid", "int", 64, "cells per torus axis for coverage"),
    Key("dim_max", "int", 16, "largest dimension of the random spectral systems"),
    Key("workers", "int", 1, "worker processes (results do not depend on it)"),
    Key("out", "str", "pilotwave-out", "output directory"),
    Key("emit_trajectories", "bool", False, "write trajectories.csv"),
    Key("figures", "bool", True, "render PNG figures next to the data files"),
)
KEY_MAP = {k.name: k for k in KEYS}

PRESET_DEFAULTS = {
    "oscillator-nonergodic": {"members": 1000, "h": 0.01, "T": 200.0 * math.pi},
    "interferometer-incompatibility": {"members": 10000, "h": 2e-3, "T": None},
    "classical-torus": {"members": 1, "h": 0.01, "T": 250.0},
    "sqt-ergodic": {"members": 100, "h": 0.0, "T": None},
}


def _coerce(key, value, path):
    kind = key.kind
    try:
        if value is None:
            if key.default is None:
                return None
            raise TypeError
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            v = float(value)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "pair":
            if isinstance(value, str):
                value = [float(s) for s in value.split(",")]
            v = [float(x) for x in value]
            if len(v) != 2:
                raise ValueError
            return v
        if kind == "list":
            out = []
            for item in value:
                pair = [float(x) for x in item]
                if len(pair) != 2:
                    raise ValueError
                out.append(pair)
            return out
        if kind == "strlist":
            if isinstance(value, str):
                value = value.split(",")
            if not all(isinstance(x, str) for x in value):
                raise TypeError
            return list(value)
    except (TypeError, ValueError):
        pass
    raise ConfigError(path, f"expected {kind}, got {value!r}")


def _check(cfg):
    def need(cond, key, reason):
        if not cond:
            raise ConfigError(key, reason)

    need(cfg["preset"] in PRESETS, "preset", f"unknown preset {cfg['preset']!r}; choose from {', '.join(PRESETS)}")
    need(0 <= cfg["seed"] < 2**64, "seed", "must fit in 64 unsigned bits")
    need(cfg["members"] >= 1, "members", "must be at least 1")
    need(cfg["preset"] == "sqt-ergodic" or cfg["h"] > 0, "h", "must be positive")
    need(cfg["T"] is None or cfg["T"] > 0, "T", "must be positive")
    need(cfg["delta0"] >= 0, "delta0", "must be non-negative")
    need(cfg["sigma0"] >= 0, "sigma0", "must be non-negative")
    need(cfg["x0"] >= 10.0 * cfg["a"], "x0", "detection plane must be in the far zone (x0 >= 10 a)")
    for d in ("d1", "d2"):
        need(cfg[d][0] <= cfg[d][1], d, "interval needs low <= high")
    need(cfg["screen"] > 0, "screen", "must be positive")
    for i, (dw, sw) in enumerate(cfg["widths"]):
        need(dw >= 0 and sw >= 0, f"widths[{i}]", "widths must be non-negative")
    for name in ("omega1", "omega2", "hbar", "k", "a", "m", "epsilon_r"):
        need(cfg[name] > 0, name, "must be positive")
    for name in ("a1", "a2", "alpha_rational", "alpha_irrational"):
        need(cfg[name] >= 0, name, "must be non-negative")
    need(cfg["epsilon_r"] < 0.1 * cfg["a"], "epsilon_r", "must be much smaller than a (< 0.1 a)")
    need(cfg["model"] in ("bosonic", "nonoverlap"), "model", "must be 'bosonic' or 'nonoverlap'")
    need(cfg["grid"] >= 1, "grid", "must be at least 1")
    need(2 <= cfg["dim_max"] <= 64, "dim_max", "must lie in [2, 64]")
    need(cfg["workers"] >= 1, "workers", "must be at least 1")
    known = ("Q1", "Q2", "Q1^2", "Q2^2", "P1", "P2", "1")
    for i, name in enumerate(cfg["observables"]):
        need(name in known, f"observables[{i}]", f"unknown observable {name!r}; choose from {', '.join(known)}")


def load_file(path):
    """Read a flat JSON object; raises ``OSError`` or :class:`ConfigError`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a JSON object")
    return data


def build_config(file_values=None, flag_values=None):
    """Merge defaults, file values and flags; validate; return a plain dict.

    Unknown keys are rejected. Preset-dependent defaults are filled in after
    the preset is known, so the resolved dict is complete.
    """
    merged = {}
    for source, values in (("config", file_values or {}), ("flags", flag_values or {})):
        for name, value in values.items():
            if name not in KEY_MAP:
                raise ConfigError(name, f"unknown key (from {source})")
            merged[name] = _coerce(KEY_MAP[name], value, name)
    cfg = {k.name: merged.get(k.name, k.default) for k in KEYS}
    cfg["preset"] = _coerce(KEY_MAP["preset"], cfg["preset"], "preset")
    if cfg["preset"] not in PRESETS:
        raise ConfigError("preset", f"unknown preset {cfg['preset']!r}; choose from {', '.join(PRESETS)}")
    for name, value in PRESET_DEFAULTS[cfg["preset"]].items():
        if name not in merged:
            cfg[name] = value
    _check(cfg)
    return cfg


def help_epilog():
    """Table of every config key with its default, for ``--help``."""
    lines = ["config keys (JSON object; flags override file values):"]
    for k in KEYS:
        default = "preset-specific" if k.default is None else json.dumps(k.default)
        lines.append(f"  {k.name:<18} {k.kind:<8} default {default}: {k.help}")
    lines.append("preset-specific defaults:")
    for preset, vals in PRESET_DEFAULTS.items():
        shown = ", ".join(f"{n}={'auto' if v is None else repr(v)}" for n, v in vals.items())
        lines.append(f"  {preset}: {shown}")
    lines.append("  interferometer T=auto means 2 * x0 / v; sqt-ergodic ignores h and T")
    return "\n".join(lines)


def dumps(cfg):
    """Canonical JSON text of a resolved configuration."""
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"
