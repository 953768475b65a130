"""Measurement schedules: phase delays and ordered contact windows."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import DomainError
from .spin_algebra import ModelParams

FOUR_POINT = "four_point"
EIGHT_POINT = "eight_point"
SEQUENTIAL = "sequential"
CUSTOM = "custom"
MODES = (FOUR_POINT, EIGHT_POINT, SEQUENTIAL, CUSTOM)

MAIN_LABELS = ("i", "j", "k", "l")
EIGHT_LABELS = ("i", "i+", "j", "j+", "k", "k+", "l", "l+")


@dataclass(frozen=True)
class PhaseDelays:
    """Larmor phases omega*(t_b - t_a) between consecutive main measurements (radians)."""

    t_ji: float
    t_kj: float
    t_lk: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in self.as_tuple()):
            raise DomainError(f"phase delays must be finite: {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.t_ji, self.t_kj, self.t_lk)

    @property
    def t_ki(self) -> float:
        return self.t_ji + self.t_kj

    @property
    def t_lj(self) -> float:
        return self.t_kj + self.t_lk

    @property
    def t_li(self) -> float:
        return self.t_ji + self.t_kj + self.t_lk


# Delay presets of the two published tau-sweeps.
BLUE_PRESET = PhaseDelays(2 * math.pi / 3, math.pi, 5 * math.pi / 3)
RED_PRESET = PhaseDelays(1.2 * math.pi, 0.4 * math.pi, 5 * math.pi / 3)


@dataclass(frozen=True)
class Window:
    label: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class MeasurementSchedule:
    """Ordered, non-overlapping contact windows of equal duration ``tau``."""

    windows: tuple[Window, ...]
    tau: float
    mode: str = CUSTOM
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        if self.mode not in MODES:
            raise DomainError(f"unknown schedule mode {self.mode!r}")
        if not self.windows:
            raise DomainError("schedule needs at least one window")
        labels = [w.label for w in self.windows]
        if len(set(labels)) != len(labels):
            raise DomainError(f"duplicate window labels: {labels}")
        scale = max(1.0, max(abs(w.end) for w in self.windows))
        tol = 1e-9 * scale
        for w in self.windows:
            if not (math.isfinite(w.start) and math.isfinite(w.end)):
                raise DomainError(f"window {w.label!r} has non-finite bounds")
            if abs(w.duration - self.tau) > tol:
                raise DomainError(f"window {w.label!r} lasts {w.duration}, expected tau={self.tau}")
        for a, b in zip(self.windows, self.windows[1:]):
            if a.end > b.start + tol:
                raise DomainError(f"windows {a.label!r} and {b.label!r} overlap or are out of order")
        if self.mode == EIGHT_POINT:
            if tuple(labels) != EIGHT_LABELS:
                raise DomainError(f"eight-point schedule needs labels {EIGHT_LABELS}, got {tuple(labels)}")
            for a, b in zip(self.windows[::2], self.windows[1::2]):
                if abs(b.start - a.end) > tol:
                    raise DomainError(f"window {b.label!r} must abut {a.label!r}")
        object.__setattr__(self, "_index", {lab: n for n, lab in enumerate(labels)})

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(w.label for w in self.windows)

    @property
    def end_times(self) -> tuple[float, ...]:
        return tuple(w.end for w in self.windows)

    def __len__(self) -> int:
        return len(self.windows)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DomainError(f"unknown window label {label!r}; schedule has {self.labels}") from None

    def indices(self, labels) -> tuple[int, ...]:
        return tuple(self.index(lab) for lab in labels)

    def shifted(self, dt: float) -> "MeasurementSchedule":
        """Same schedule translated in time by ``dt``."""
        return MeasurementSchedule(
            tuple(Window(w.label, w.start + dt, w.end + dt) for w in self.windows), self.tau, self.mode
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tau": self.tau,
            "windows": [[w.label, w.start, w.end] for w in self.windows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementSchedule":
        return cls(tuple(Window(str(a), float(b), float(c)) for a, b, c in d["windows"]), float(d["tau"]), d["mode"])

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form; identifies the schedule in dataset headers."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).digest()


def _main_end_times(delays: PhaseDelays, p: ModelParams) -> list[float]:
    # first contact starts at 0, so t_i = tau
    t = [p.tau]
    for d in delays.as_tuple():
        t.append(t[-1] + d / p.omega)
    return t


def four_point(delays: PhaseDelays, p: ModelParams) -> MeasurementSchedule:
    """Windows i, j, k, l ending at t_i = tau and the given phase delays."""
    min_delay = p.omega * p.tau
    if min(delays.as_tuple()) < min_delay * (1 - 1e-12):
        raise DomainError(f"four-point delays must be >= omega*tau = {min_delay:.6g}, got {delays.as_tuple()}")
    ends = _main_end_times(delays, p)
    return MeasurementSchedule(
        tuple(Window(lab, t - p.tau, t) for lab, t in zip(MAIN_LABELS, ends)), p.tau, FOUR_POINT
    )


def eight_point(delays: PhaseDelays, p: ModelParams) -> MeasurementSchedule:
    """Four main windows each followed by an abutting twin window x+ over [t_x, t_x + tau]."""
    min_delay = 2 * p.omega * p.tau
    if min(delays.as_tuple()) < min_delay * (1 - 1e-12):
        raise DomainError(f"eight-point delays must be >= 2*omega*tau = {min_delay:.6g}, got {delays.as_tuple()}")
    windows = []
    for lab, t in zip(MAIN_LABELS, _main_end_times(delays, p)):
        windows.append(Window(lab, t - p.tau, t))
        windows.append(Window(lab + "+", t, t + p.tau))
    return MeasurementSchedule(tuple(windows), p.tau, EIGHT_POINT)


def sequential(count: int, p: ModelParams, spacing: float | None = None) -> MeasurementSchedule:
    """``count`` windows labelled "1".."count"; window n ends at n*spacing (default spacing = tau)."""
    if count < 1:
        raise DomainError("sequential schedule needs count >= 1")
    s = p.tau if spacing is None else spacing
    if s < p.tau:
        raise DomainError(f"spacing {s} shorter than tau {p.tau}")
    return MeasurementSchedule(
        tuple(Window(str(n), n * s - p.tau, n * s) for n in range(1, count + 1)), p.tau, SEQUENTIAL
    )
