"""Synthetic singlet-return-probability data from the spin-valley model."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .io import read_csv_columns, read_json, write_csv, write_json
from .landscape import ValleyLandscape
from .physics import TABLE1, SpinValleyParams, precession_frequency, precession_frequency_batch
from .pulses import ShuttleWaveform, StageTimeline, trajectory


@dataclass(frozen=True)
class NoiseConfig:
    """Readout model; ``shots=None`` disables shot noise."""

    T2_star: float = 1.0e-6
    a: float = 0.35
    c: float = 0.5
    shots: int | None = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.a <= 0.5:
            raise ValueError("visibility must lie in (0, 0.5]")
        if self.c - self.a < 0 or self.c + self.a > 1:
            raise ValueError("c +- a must stay within [0, 1]")
        if self.T2_star <= 0:
            raise ValueError("T2_star must be positive")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 (or None for no shot noise)")

    def noiseless(self) -> "NoiseConfig":
        return NoiseConfig(self.T2_star, self.a, self.c, None, self.seed)


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Singlet probability ``P[i, j]`` on ``axis1[i]`` (d or tau) and ``axis2[j]`` (B)."""

    axis1_name: str
    axis1: np.ndarray
    axis2_name: str
    axis2: np.ndarray
    P: np.ndarray
    meta: dict | None = None

    def __post_init__(self):
        if self.P.shape != (len(self.axis1), len(self.axis2)):
            raise ValueError("P shape does not match the axes")
        for ax in (self.axis1, self.axis2):
            if len(ax) > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError("axes must be strictly increasing")
        if np.any(self.P < 0) or np.any(self.P > 1):
            raise ValueError("probabilities outside [0, 1]")

    def row_mean_subtracted(self) -> np.ndarray:
        """Subtract, for every B, the mean over the first axis."""
        return self.P - self.P.mean(axis=0, keepdims=True)


UNITS = {"d": "nm", "tau": "s", "tau_w": "s", "B": "T"}


def save_map(pm: ProbabilityMap, path, config: dict | None = None) -> tuple[Path, Path]:
    path = Path(path)
    A1, A2 = np.meshgrid(pm.axis1, pm.axis2, indexing="ij")
    write_csv(path, ["axis1", "axis2", "P"], zip(A1.ravel(), A2.ravel(), pm.P.ravel()))
    side = {
        "kind": "ProbabilityMap",
        "axis1": {"name": pm.axis1_name, "unit": UNITS.get(pm.axis1_name, ""), "n": len(pm.axis1)},
        "axis2": {"name": pm.axis2_name, "unit": UNITS.get(pm.axis2_name, ""), "n": len(pm.axis2)},
        "meta": pm.meta or {},
        "config": config or {},
    }
    sidecar = path.with_suffix(".json")
    write_json(sidecar, side)
    return path, sidecar


def load_map(path) -> ProbabilityMap:
    path = Path(path)
    cols = read_csv_columns(path, ["axis1", "axis2", "P"])
    side = read_json(path.with_suffix(".json"))
    n1, n2 = side["axis1"]["n"], side["axis2"]["n"]
    a1 = cols["axis1"].reshape(n1, n2)[:, 0]
    a2 = cols["axis2"].reshape(n1, n2)[0, :]
    return ProbabilityMap(side["axis1"]["name"], a1, side["axis2"]["name"], a2,
                          cols["P"].reshape(n1, n2), side.get("meta"))


def singlet_probability(phase, t_sep, noise: NoiseConfig):
    t_sep = np.asarray(t_sep, dtype=float)
    if np.any(t_sep < 0):
        raise ValueError("t_sep must be non-negative")
    return noise.c + noise.a * np.exp(-(t_sep / noise.T2_star) ** 2) * np.cos(phase)


def cell_rng(seed: int, *index) -> np.random.Generator:
    """Generator for one map cell; independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, index)]))


def apply_shot_noise(P: np.ndarray, noise: NoiseConfig, prefix=()) -> np.ndarray:
    if noise.shots is None:
        return P
    out = np.empty_like(P)
    N = noise.shots
    for idx in np.ndindex(P.shape):
        p = min(max(float(P[idx]), 0.0), 1.0)
        out[idx] = cell_rng(noise.seed, *prefix, *idx).binomial(N, p) / N
    return out


def simulate_dqd_scan(params: SpinValleyParams, B, tau, noise: NoiseConfig = NoiseConfig()) -> ProbabilityMap:
    """P_S(tau_DQD, B) of the static double dot."""
    B = np.asarray(B, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if B.size == 0 or tau.size == 0:
        raise ValueError("empty grid")
    nu = np.atleast_1d(precession_frequency(params, B))
    phase = 2 * math.pi * tau[:, None] * nu[None, :]
    P = singlet_probability(phase, tau[:, None] * np.ones_like(nu), noise)
    P = apply_shot_noise(P, noise)
    return ProbabilityMap("tau", tau, "B", B, P, {"params": asdict(params)})


def local_frequency(landscape: ValleyLandscape, positions, y_offset, B, static: SpinValleyParams = TABLE1):
    """nu at shuttled-dot positions (rows) and fields (columns), Hz.

    The shuttled dot takes E_r, delta_g and v_r from the landscape; the static
    dot keeps ``static.E_l`` and ``static.v_l``.
    """
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    B = np.atleast_1d(np.asarray(B, dtype=float))
    E, dg, v = landscape.sample_at(positions, np.full_like(positions, y_offset))
    return precession_frequency_batch(dg[:, None], static.E_l, E[:, None], static.v_l,
                                      v[:, None], B[None, :], static.g_base)


def accumulate_phase(landscape: ValleyLandscape, traj, B, y_offset: float = 0.0,
                     static: SpinValleyParams = TABLE1, max_step: float = 1e-9):
    """Total phase 2*pi*int nu dt over separated stages, and the separated time.

    ``B`` may be a scalar or array; the phase has the same shape.
    """
    pos, wts = traj.quadrature_nodes(max_step)
    if not landscape.contains(pos, np.full_like(pos, y_offset)):
        raise ValueError("trajectory leaves the landscape")
    nu = local_frequency(landscape, pos, y_offset, B, static)
    phase = 2 * math.pi * (wts @ nu)
    t_sep = float(wts.sum())
    return (float(phase[0]) if np.ndim(B) == 0 else phase), t_sep


def _phase_table(landscape, d, B, timeline, waveform, y_offset, static, max_step):
    """Phases ``(len(d), len(B))`` and separated times for a set of distances."""
    nodes = [trajectory(timeline, waveform, float(dj)).quadrature_nodes(max_step) for dj in d]
    all_pos = np.concatenate([p for p, _ in nodes])
    if not landscape.contains(all_pos, np.full_like(all_pos, y_offset)):
        raise ValueError("shuttle distances outside the landscape")
    uniq, inv = np.unique(np.round(all_pos, 9), return_inverse=True)
    nu = local_frequency(landscape, uniq, y_offset, B, static)
    phase = np.empty((len(d), len(B)))
    t_sep = np.empty(len(d))
    k = 0
    for j, (p, w) in enumerate(nodes):
        idx = inv[k:k + len(p)]
        k += len(p)
        phase[j] = 2 * math.pi * (w @ nu[idx])
        t_sep[j] = w.sum()
    return phase, t_sep


def simulate_shuttle_map(landscape: ValleyLandscape, d, B, timeline: StageTimeline = StageTimeline(),
                         noise: NoiseConfig = NoiseConfig(), y_offset: float = 0.0,
                         static: SpinValleyParams = TABLE1, waveform: ShuttleWaveform = ShuttleWaveform(),
                         max_step: float = 1e-9) -> ProbabilityMap:
    """P_S(d, B) at a fixed wait time; no row-mean subtraction."""
    d = np.asarray(d, dtype=float)
    B = np.asarray(B, dtype=float)
    phase, t_sep = _phase_table(landscape, d, B, timeline, waveform, y_offset, static, max_step)
    P = singlet_probability(phase, t_sep[:, None], noise)
    P = apply_shot_noise(P, noise)
    return ProbabilityMap("d", d, "B", B, P, {"y_offset_nm": y_offset, "tau_w_s": timeline.WAIT_D})


def simulate_tau_resolved(landscape: ValleyLandscape, d_list, tau_w, B, timeline: StageTimeline = StageTimeline(),
                          noise: NoiseConfig = NoiseConfig(), y_offset: float = 0.0,
                          static: SpinValleyParams = TABLE1, waveform: ShuttleWaveform = ShuttleWaveform(),
                          max_step: float = 1e-9) -> list[ProbabilityMap]:
    """One P_S(tau_w, B) map per shuttle distance."""
    tau_w = np.asarray(tau_w, dtype=float)
    B = np.asarray(B, dtype=float)
    d_list = np.asarray(d_list, dtype=float)
    # phase without the wait plus nu at the waiting point times tau_w
    phase0, t0 = _phase_table(landscape, d_list, B, timeline.with_wait(0.0), waveform,
                              y_offset, static, max_step)
    nu_wait = local_frequency(landscape, d_list, y_offset, B, static)
    maps = []
    for k, dk in enumerate(d_list):
        phase = phase0[k][None, :] + 2 * math.pi * tau_w[:, None] * nu_wait[k][None, :]
        t_sep = t0[k] + tau_w
        P = singlet_probability(phase, t_sep[:, None], noise)
        P = apply_shot_noise(P, noise, prefix=(k,))
        maps.append(ProbabilityMap("tau_w", tau_w, "B", B, P, {"d_nm": float(dk), "y_offset_nm": y_offset}))
    return maps
