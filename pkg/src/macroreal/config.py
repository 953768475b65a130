"""Run configuration: INI text <-> RunConfig, with per-key command-line overrides.

Every key lives in exactly one section and keys are unique across sections, so a
key name doubles as a flag name (``tau_over_tp`` -> ``--tau-over-tp``).
Angles accept multiples of pi ("2/3pi", "pi/2", "1.2pi") or plain radians.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields, replace
from typing import Any, Callable

import numpy as np

from .errors import ConfigError
from .schedule import PhaseDelays
from .spin_algebra import DEFAULT_OMEGA, MAIN_TEXT_COUPLING, ModelParams

MODELS = ("quantum", "classical")
ENGINES = ("closed_form", "exact", "mc")

_ANGLE = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*)?\s*(?:/\s*(\d+\.?\d*))?\s*\*?\s*(pi|π)\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """'2/3pi' -> 2.0944..., 'pi/2' -> 1.5707..., '0.25' -> 0.25 (radians)."""
    s = str(text).strip()
    m = _ANGLE.match(s)
    if m:
        sign, num, den, _, den2 = m.groups()
        value = float(num) if num not in (None, "", ".") else 1.0
        if den:
            value /= float(den)
        if den2:
            value /= float(den2)
        return (-1.0 if sign == "-" else 1.0) * value * math.pi
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot read angle {text!r}") from None


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple[float, ...] | None:
    t = text.strip()
    if t.lower() in ("", "none"):
        return None
    return tuple(float(x) for x in re.split(r"[,\s]+", t) if x)


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text: str):
        return None if text.strip().lower() in ("", "none") else parse(text)
    return inner


def _choice(options):
    def inner(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ConfigError(f"expected one of {options}, got {text!r}")
        return t
    return inner


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    # [model]
    model: str = "quantum"
    engine: str = "exact"
    omega: float = DEFAULT_OMEGA
    coupling: float = MAIN_TEXT_COUPLING
    tau_over_tp: float = 0.023
    # [delays]
    t_ji: float = 2 * math.pi / 3
    t_kj: float = math.pi
    t_lk: float = 5 * math.pi / 3
    grid: int = 0
    refine: bool = True
    threshold: float = 1.0
    # [sweep]
    tau_min: float = 1e-3
    tau_max: float = 1e-1
    tau_points: int = 41
    tau_values: tuple[float, ...] | None = None
    window_min: float = 0.018
    window_max: float = 0.056
    # [mc]
    shots: int = 100_000
    seed: int = 0
    resamples: int = 400
    photon: bool = False
    n_plus: float | None = None
    n_minus: float = 0.0
    # [noise]
    chi_ph: float | None = None
    t_total: float | None = None
    eta: float | None = None
    gamma: float | None = None
    significance: float = 5.0
    # [verdict]
    k_sigma: float = 5.0
    slope_tol: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model: expected one of {MODELS}, got {self.model!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine: expected one of {ENGINES}, got {self.engine!r}")
        if not (self.omega > 0 and self.coupling >= 0):
            raise ConfigError("omega must be positive and coupling non-negative")
        if not self.tau_over_tp > 0:
            raise ConfigError("tau_over_tp must be positive")
        if self.engine == "mc" and self.shots < 2:
            raise ConfigError(f"shots: engine=mc needs shots >= 2, got {self.shots}")
        if self.grid < 0 or self.grid == 1:
            raise ConfigError("grid must be 0 (single point) or >= 2")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.resamples < 100:
            raise ConfigError("resamples must be >= 100")
        if self.tau_values is not None:
            if len(self.tau_values) < 1 or min(self.tau_values) <= 0:
                raise ConfigError("tau_values must be positive")
        else:
            if not (0 < self.tau_min < self.tau_max):
                raise ConfigError("need 0 < tau_min < tau_max")
            if self.tau_points < 3:
                raise ConfigError("log range needs tau_points >= 3")
        if not (0 < self.window_min < self.window_max):
            raise ConfigError("need 0 < window_min < window_max")
        for name in ("chi_ph", "t_total", "eta", "gamma"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.significance <= 0 or self.k_sigma <= 0 or self.slope_tol <= 0:
            raise ConfigError("significance, k_sigma and slope_tol must be positive")

    # derived objects

    @property
    def params(self) -> ModelParams:
        return ModelParams.from_ratio(self.tau_over_tp, self.coupling, self.omega)

    @property
    def delays(self) -> PhaseDelays:
        return PhaseDelays(self.t_ji, self.t_kj, self.t_lk)

    @property
    def taus(self) -> np.ndarray:
        if self.tau_values is not None:
            return np.array(self.tau_values, dtype=float)
        return np.geomspace(self.tau_min, self.tau_max, self.tau_points)

    @property
    def window(self) -> tuple[float, float]:
        return (self.window_min, self.window_max)

    def readout(self):
        from .trajectory_mc import ReadoutModel

        if not self.photon:
            return None
        if self.n_plus is not None:
            return ReadoutModel(self.n_plus, self.n_minus)
        if self.chi_ph is None:
            raise ConfigError("photon readout needs n_plus or chi_ph")
        p = self.params
        return ReadoutModel.from_rate(self.chi_ph, p.tau * 1e-6)

    def budget(self):
        from .inequality import NoiseBudget

        if self.chi_ph is None and (self.eta is None or self.gamma is None):
            raise ConfigError("noise budget needs chi_ph or both eta and gamma")
        return NoiseBudget(self.chi_ph, self.t_total, self.eta, self.gamma, self.significance)


SECTIONS: dict[str, tuple[str, ...]] = {
    "model": ("model", "engine", "omega", "coupling", "tau_over_tp"),
    "delays": ("t_ji", "t_kj", "t_lk", "grid", "refine", "threshold"),
    "sweep": ("tau_min", "tau_max", "tau_points", "tau_values", "window_min", "window_max"),
    "mc": ("shots", "seed", "resamples", "photon", "n_plus", "n_minus"),
    "noise": ("chi_ph", "t_total", "eta", "gamma", "significance"),
    "verdict": ("k_sigma", "slope_tol"),
}

PARSERS: dict[str, Callable[[str], Any]] = {
    "model": _choice(MODELS),
    "engine": _choice(ENGINES),
    "omega": parse_angle,
    "t_ji": parse_angle,
    "t_kj": parse_angle,
    "t_lk": parse_angle,
    "grid": int,
    "tau_points": int,
    "shots": int,
    "seed": int,
    "resamples": int,
    "refine": _parse_bool,
    "photon": _parse_bool,
    "tau_values": _parse_float_list,
    "n_plus": _optional(float),
    "chi_ph": _optional(float),
    "t_total": _optional(float),
    "eta": _optional(float),
    "gamma": _optional(float),
}

KEYS = tuple(k for keys in SECTIONS.values() for k in keys)
assert set(KEYS) == {f.name for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        return PARSERS.get(key, float)(text)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: [{section}] has unknown key {key!r}")
            values[key] = parse_value(key, raw)
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_fmt(getattr(cfg, k))}" for k in keys)
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def with_overrides(cfg: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply raw string overrides keyed by config key."""
    if not overrides:
        return cfg
    return replace(cfg, **{k: parse_value(k, v) for k, v in overrides.items()})
