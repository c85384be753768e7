"""Conveyor-mode shuttle waveforms and the pulse-stage timeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

STAGE_NAMES = ("I", "S", "T", "SHUTTLE_OUT", "WAIT_D", "SHUTTLE_BACK", "T2", "S2", "P", "F")


@dataclass(frozen=True)
class ShuttleWaveform:
    amplitudes: tuple = (0.150, 0.192, 0.150, 0.192)  # V
    offsets: tuple = (0.7, 0.896, 0.7, 0.896)  # V
    phases: tuple = (-math.pi / 2, 0.0, math.pi / 2, math.pi)  # rad
    f: float = 1e7  # Hz
    wavelength: float = 280.0  # nm

    @property
    def velocity(self) -> float:
        """Nominal shuttle velocity in nm/s."""
        return self.wavelength * self.f

    @classmethod
    def from_config(cls, cfg: dict) -> "ShuttleWaveform":
        kw = {}
        if "amplitudes_V" in cfg:
            kw["amplitudes"] = tuple(cfg["amplitudes_V"])
        if "offsets_V" in cfg:
            kw["offsets"] = tuple(cfg["offsets_V"])
        if "phases_rad" in cfg:
            kw["phases"] = tuple(cfg["phases_rad"])
        if "f_Hz" in cfg:
            kw["f"] = float(cfg["f_Hz"])
        if "lambda_nm" in cfg:
            kw["wavelength"] = float(cfg["lambda_nm"])
        return cls(**kw)

    def to_config(self) -> dict:
        return {"amplitudes_V": list(self.amplitudes), "offsets_V": list(self.offsets),
                "phases_rad": list(self.phases), "f_Hz": self.f, "lambda_nm": self.wavelength}


def waveform_voltage(w: ShuttleWaveform, i: int, tau_S):
    """Voltage on shuttle gate ``i`` (1..4) at shuttle time ``tau_S``."""
    if i not in (1, 2, 3, 4):
        raise ValueError("gate index must be 1..4")
    k = i - 1
    return w.amplitudes[k] * np.sin(2 * math.pi * w.f * np.asarray(tau_S) + w.phases[k]) + w.offsets[k]


def nominal_position(tau_S, w: ShuttleWaveform = ShuttleWaveform()):
    """Nominal shuttle distance in nm after shuttle time ``tau_S`` (s)."""
    if np.any(np.asarray(tau_S) < 0):
        raise ValueError("tau_S must be non-negative")
    return w.wavelength * w.f * tau_S


def shuttle_time(d, w: ShuttleWaveform = ShuttleWaveform()):
    return d / (w.wavelength * w.f)


@dataclass(frozen=True)
class Stage:
    name: str
    duration: float  # s
    separated: bool


@dataclass(frozen=True)
class StageTimeline:
    """Durations of the fixed stages; shuttle stages get their duration from
    the shuttle distance when a trajectory is built."""

    I: float = 1e-3
    S: float = 30e-9
    T: float = 10e-9
    WAIT_D: float = 300e-9
    T2: float = 10e-9
    S2: float = 30e-9
    P: float = 500e-9
    F: float = 1e-3

    def __post_init__(self):
        for k, v in self.__dict__.items():
            # the wait is the scanned variable and may be zero
            if v < 0 or (v == 0 and k != "WAIT_D"):
                raise ValueError(f"stage {k} must have positive duration")

    def with_wait(self, tau_w: float) -> "StageTimeline":
        return replace(self, WAIT_D=float(tau_w))

    @property
    def dwell(self) -> float:
        """Separated dwell in the static double dot before shuttling (S + T)."""
        return self.S + self.T

    def stages(self, shuttle_duration: float = 0.0) -> list[Stage]:
        return [
            Stage("I", self.I, False),
            Stage("S", self.S, True),
            Stage("T", self.T, True),
            Stage("SHUTTLE_OUT", shuttle_duration, True),
            Stage("WAIT_D", self.WAIT_D, True),
            Stage("SHUTTLE_BACK", shuttle_duration, True),
            Stage("T2", self.T2, True),
            Stage("S2", self.S2, True),
            Stage("P", self.P, False),
            Stage("F", self.F, False),
        ]

    @classmethod
    def from_config(cls, cfg: dict) -> "StageTimeline":
        kw = {}
        for name in cls.__dataclass_fields__:
            key = f"{name}_ns"
            if key in cfg:
                kw[name] = float(cfg[key]) * 1e-9
        return cls(**kw)

    def to_config(self) -> dict:
        return {f"{k}_ns": v * 1e9 for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear shuttle position over the full pulse sequence."""

    stages: tuple
    starts: np.ndarray
    target_d: float
    speed: float  # nm/s

    @property
    def total_duration(self) -> float:
        return float(self.starts[-1] + self.stages[-1].duration)

    @property
    def separated_time(self) -> float:
        return float(sum(s.duration for s in self.stages if s.separated))

    def stage_interval(self, name: str) -> tuple[float, float]:
        for s, t0 in zip(self.stages, self.starts):
            if s.name == name:
                return float(t0), float(t0 + s.duration)
        raise KeyError(name)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        a0, a1 = self.stage_interval("SHUTTLE_OUT")
        w0, w1 = self.stage_interval("WAIT_D")
        b0, b1 = self.stage_interval("SHUTTLE_BACK")
        out = np.where((t >= a0) & (t < a1), self.speed * (t - a0), out)
        out = np.where((t >= w0) & (t < w1), self.target_d, out)
        out = np.where((t >= b0) & (t < b1), self.target_d - self.speed * (t - b0), out)
        return float(out) if out.ndim == 0 else out

    def quadrature_nodes(self, max_step: float = 1e-9):
        """Midpoint-rule nodes over separated stages: ``(positions, weights)``.

        Stages at constant position get a single node carrying the full
        duration, which is exact for them.
        """
        pos, wts = [], []
        for s in self.stages:
            if not s.separated or s.duration <= 0:
                continue
            if s.name in ("SHUTTLE_OUT", "SHUTTLE_BACK"):
                n = max(1, math.ceil(s.duration / max_step - 1e-9))
                dt = s.duration / n
                frac = (np.arange(n) + 0.5) / n
                p = self.target_d * (frac if s.name == "SHUTTLE_OUT" else 1 - frac)
                pos.append(p)
                wts.append(np.full(n, dt))
            else:
                pos.append(np.array([self.target_d if s.name == "WAIT_D" else 0.0]))
                wts.append(np.array([s.duration]))
        if not pos:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(pos), np.concatenate(wts)


def trajectory(timeline: StageTimeline, w: ShuttleWaveform, target_d: float,
               max_d: float | None = None) -> Trajectory:
    if target_d < 0:
        raise ValueError("target_d must be non-negative")
    if max_d is not None and target_d > max_d:
        raise ValueError("target_d beyond the reachable shuttle range")
    speed = w.wavelength * w.f
    dur = target_d / speed
    stages = tuple(timeline.stages(dur))
    starts = np.concatenate([[0.0], np.cumsum([s.duration for s in stages])[:-1]])
    return Trajectory(stages, starts, float(target_d), speed)
