"""Decaying-cosine fits of singlet-probability traces."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fitcore import FitProblem, FitReport, least_squares

PAD_FACTOR = 16
PEAK_OVER_FLOOR = 2.0
GRID_POINTS = 400
# false-alarm probability of the strongest periodogram line under pure noise
FALSE_ALARM = 0.01


@dataclass
class OscillationFit:
    a: float
    nu: float
    phi: float
    T2_star: float
    c: float
    report: FitReport | None = None
    low_visibility: bool = False
    init_method: str = "periodogram"
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.a < 0 or self.nu < 0 or not self.T2_star > 0:
            raise ValueError("invalid oscillation parameters")

    @property
    def nu_sigma(self) -> float:
        return float(self.report["nu"][1]) if self.report is not None else float("nan")

    def model(self, t):
        return oscillation_model(np.asarray(t, dtype=float), self.a, self.nu, self.phi, self.T2_star, self.c)


def oscillation_model(t, a, nu, phi, T2, c):
    return c + a * np.exp(-(t / T2) ** 2) * np.cos(2 * np.pi * nu * t + phi)


def _periodogram(t, y):
    dt = float(np.median(np.diff(t)))
    n = PAD_FACTOR * len(t)
    spec = np.abs(np.fft.rfft(y, n)) ** 2
    freqs = np.fft.rfftfreq(n, dt)
    return freqs, spec


def _quadrature(t, y, nu):
    """Amplitude and phase of ``y`` at frequency ``nu`` by projection."""
    w = 2 * np.pi * nu * t
    X = np.column_stack([np.cos(w), -np.sin(w)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(np.hypot(*coef)), float(np.arctan2(coef[1], coef[0]))


def fit_oscillation(t, P, T2_guess: float = 1e-6, nu_max: float | None = None) -> OscillationFit:
    """Fit ``P(t) = c + a exp(-(t/T2)^2) cos(2 pi nu t + phi)``.

    The mean is removed first, so the returned ``c`` is the trace mean plus
    the fitted residual offset. The starting frequency is the strongest
    nonzero periodogram line; if that line does not clear twice the spectral
    noise floor a brute-force frequency grid is used instead.
    """
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    if t.shape != P.shape or t.ndim != 1:
        raise ValueError("t and P must be 1D and equally long")
    if len(t) < 8:
        raise ValueError("need at least 8 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be strictly increasing")
    mean = float(P.mean())
    y = P - mean
    span = t[-1] - t[0]
    dt = float(np.median(np.diff(t)))
    nyq = 0.5 / dt
    nu_max = nyq if nu_max is None else min(nu_max, nyq)

    if np.ptp(y) == 0:
        return OscillationFit(0.0, 0.0, 0.0, T2_guess, mean, None, True, "none",
                              {"reason": "flat trace"})

    freqs, spec = _periodogram(t, y)
    sel = (freqs > 0.5 / span) & (freqs <= nu_max)
    if not np.any(sel):
        sel = freqs > 0
    k = np.argmax(np.where(sel, spec, -np.inf))
    floor = float(np.median(spec[sel]))
    method = "periodogram"
    nu0 = float(freqs[k])
    if spec[k] < PEAK_OVER_FLOOR * floor:
        method = "grid"
        grid = np.linspace(0.5 / span, nu_max, GRID_POINTS)
        env = np.exp(-(t / T2_guess) ** 2)
        best = np.inf
        for nu in grid:
            w = 2 * np.pi * nu * t
            X = np.column_stack([env * np.cos(w), env * np.sin(w), np.ones_like(t)])
            _, res, *_ = np.linalg.lstsq(X, y, rcond=None)
            r = float(res[0]) if res.size else float(np.sum((X @ np.linalg.lstsq(X, y, rcond=None)[0] - y) ** 2))
            if r < best:
                best, nu0 = r, float(nu)

    env = np.exp(-(t / T2_guess) ** 2)
    amp, phi0 = _quadrature(t, y / np.maximum(env, 1e-3), nu0)
    amp = max(amp, 1e-6)

    def resid(p):
        a, nu, phi, T2, c = p
        return oscillation_model(t, a, nu, phi, T2, c) - y

    prob = FitProblem(resid, [amp, nu0, phi0, T2_guess, 0.0],
                      lower=[0.0, 0.0, -np.inf, 1e-3 * T2_guess, -1.0],
                      upper=[np.inf, np.inf, np.inf, 1e3 * T2_guess, 1.0],
                      names=["a", "nu", "phi", "T2_star", "c"],
                      x_scale=[max(amp, 1e-3), max(nu0, 1.0 / span), 1.0, T2_guess, 0.1])
    rep = least_squares(prob)
    a, nu, phi, T2, c = rep.estimates
    phi = float((phi + np.pi) % (2 * np.pi) - np.pi)
    noise = float(np.sqrt(2 * rep.cost / max(len(t) - 5, 1)))
    sigma_a = float(rep.uncertainties[0])
    power_ratio, threshold = _line_significance(t, y)
    low = bool(a < 1e-9 or not a > 3 * sigma_a or power_ratio < threshold)
    rep.flags["low_visibility"] = low
    return OscillationFit(float(a), float(nu), phi, float(T2), mean + float(c), rep, low, method,
                          {"residual_rms": noise, "line_power_ratio": power_ratio})


def _line_significance(t, y):
    """Strongest unpadded periodogram line over the exponential noise floor,
    and the line height pure noise exceeds with probability FALSE_ALARM
    across all independent frequencies."""
    spec = np.abs(np.fft.rfft(y)) ** 2
    spec = spec[1:]
    floor = float(np.median(spec)) / np.log(2)
    m = max(len(spec), 1)
    return float(spec.max() / max(floor, 1e-300)), float(np.log(m / FALSE_ALARM))


def fit_columns(pm, **kw) -> list[OscillationFit]:
    """One fit per column of a P_S(tau, B) map."""
    return [fit_oscillation(pm.axis1, pm.P[:, j], **kw) for j in range(pm.P.shape[1])]
