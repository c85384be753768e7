"""Magnetospectroscopy benchmark: charge-transition scans, E_ST extraction
and dot triangulation from cross-capacitance ratios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d, median_filter

from .fitcore import FitProblem, FitReport, least_squares
from .io import read_csv_columns, write_csv
from .physics import CONST

SOBEL_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])
PEAK_THRESHOLD = 5.0  # robust z of the line maximum
G = 2.0


# --------------------------------------------------------------------- scans

@dataclass(frozen=True, eq=False)
class TransitionScan:
    """Sensor signal indexed ``[V, B]``; V is the sweep axis."""
    B: np.ndarray
    V: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        V = np.asarray(self.V, dtype=float)
        S = np.asarray(self.signal, dtype=float)
        if S.shape != (V.size, B.size):
            raise ValueError("signal must have shape (len(V), len(B))")
        for ax in (B, V):
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError("axes must be strictly increasing")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "signal", S)

    def with_signal(self, S) -> "TransitionScan":
        return TransitionScan(self.B, self.V, S)


def save_scan(scan: TransitionScan, path):
    rows = ((b, v, scan.signal[i, j]) for j, b in enumerate(scan.B) for i, v in enumerate(scan.V))
    return write_csv(path, ["B_T", "V_V", "signal"], rows)


def load_scan(path) -> TransitionScan:
    c = read_csv_columns(path, ["B_T", "V_V", "signal"])
    B = np.unique(c["B_T"])
    V = np.unique(c["V_V"])
    if B.size * V.size != c["B_T"].size:
        raise ValueError("scan is not a complete grid")
    S = np.full((V.size, B.size), np.nan)
    S[np.searchsorted(V, c["V_V"]), np.searchsorted(B, c["B_T"])] = c["signal"]
    return TransitionScan(B, V, S)


def sobel_filter(image) -> np.ndarray:
    """Convolution with the 3x3 Sobel kernel along axis 0, replicate borders."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ValueError("image must be 2D and at least 3x3")
    # separable form of convolve(img, SOBEL_Y, mode="nearest"); differencing
    # the smoothed rows keeps constant regions exactly zero
    P = np.pad(img, 1, mode="edge")
    smooth = P[:, :-2] + 2.0 * P[:, 1:-1] + P[:, 2:]
    return smooth[2:] - smooth[:-2]


def subtract_background(image, transition_width: int) -> np.ndarray:
    """Remove a running median of length 3 * width (made odd) along axis 0."""
    img = np.asarray(image, dtype=float)
    if transition_width < 1:
        raise ValueError("transition width must be at least one sample")
    k = 3 * int(transition_width)
    k += 1 - k % 2
    if k > img.shape[0]:
        raise ValueError("median kernel longer than the sweep line")
    return img - median_filter(img, size=(k, 1), mode="nearest")


# ---------------------------------------------------------------- tracking

def lorentzian(V, A, V0, w, c):
    return A / (1.0 + ((V - V0) / w) ** 2) + c


@dataclass
class TrackedTransition:
    B: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    valid: np.ndarray

    def rows(self):
        return zip(self.B, self.V, self.sigma, self.valid)


def _fit_line(V, y, threshold):
    med = np.median(y)
    noise = 1.4826 * np.median(np.abs(y - med))
    k = int(np.argmax(np.abs(y - med)))
    A0 = y[k] - med
    if noise > 0 and abs(A0) < threshold * noise:
        return np.nan, np.nan, False
    half = np.abs(y - med) >= 0.5 * abs(A0)
    # contiguous half-maximum run around the peak
    lo = k
    while lo > 0 and half[lo - 1]:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and half[hi + 1]:
        hi += 1
    dV = V[1] - V[0]
    w0 = max(0.5 * (V[hi] - V[lo]), dV)
    # fit only the neighbourhood of the peak
    n_half = max(int(round(5 * w0 / dV)), 6)
    a, b = max(k - n_half, 0), min(k + n_half + 1, len(V))
    V, y, k = V[a:b], y[a:b], k - a

    def resid(p):
        return lorentzian(V, *p) - y

    rep = least_squares(FitProblem(resid, [A0, V[k], w0, med],
                                   lower=[-np.inf, V[0], 0.1 * dV, -np.inf],
                                   upper=[np.inf, V[-1], max(V[-1] - V[0], 0.2 * dV), np.inf],
                                   x_scale=[abs(A0) or 1.0, max(abs(V[k]), dV), w0, abs(A0) or 1.0]))
    ok = rep.converged and V[0] < rep.estimates[1] < V[-1]
    return float(rep.estimates[1]), float(rep.uncertainties[1]), bool(ok)


def track_transition(filtered: TransitionScan, window=None, threshold: float = PEAK_THRESHOLD) -> TrackedTransition:
    """Lorentzian fit of the dominant peak of every B-line."""
    V = filtered.V
    sel = np.ones(V.size, bool) if window is None else (V >= window[0]) & (V <= window[1])
    Vs = V[sel]
    out = [_fit_line(Vs, filtered.signal[sel, j], threshold) for j in range(filtered.B.size)]
    Vp, sg, ok = (np.array(v) for v in zip(*out))
    return TrackedTransition(filtered.B.copy(), Vp, sg, ok.astype(bool))


# ----------------------------------------------------------- lineshapes

def _beta(T):
    return 1.0 / (CONST.k_B * T)  # 1/ueV


def v01_model(B, alpha, T, V0, g: float = G):
    """Zeeman-split 0-1 transition position; alpha in eV/V, T in K, B in T."""
    b = _beta(T)
    x = b * g * CONST.mu_B * np.asarray(B, dtype=float)
    a = alpha * 1e6  # ueV/V
    return -(x + 2 * np.logaddexp(0.0, -x)) / (2 * a * b) + V0


def v12_model(B, alpha, T, V0, E_ST, g: float = G):
    """1-2 transition position with a singlet-triplet splitting E_ST (ueV)."""
    b = _beta(T)
    x = b * g * CONST.mu_B * np.asarray(B, dtype=float)
    bE = b * E_ST
    a = alpha * 1e6
    num = np.logaddexp(x, 0.0) + 0.5 * x + bE
    den = np.logaddexp.reduce(np.stack([x + bE, 2 * x, x, np.zeros_like(x)]), axis=0)
    return (num - den) / (a * b) + V0


@dataclass
class MagnetospecModel:
    alpha: float  # eV/V
    T: float  # K
    V_0: float  # V
    E_ST: float | None = None  # ueV
    g: float = G

    def __post_init__(self):
        if not self.alpha > 0 or not self.T > 0:
            raise ValueError("alpha and T must be positive")

    @property
    def beta(self) -> float:
        return _beta(self.T)


@dataclass
class Fit01:
    model: MagnetospecModel
    report: FitReport
    residuals: np.ndarray
    B: np.ndarray


def fit_01_transition(B, V, sigma=None, g: float = G, T: float | None = None) -> Fit01:
    """Fit the 0-1 transition; alpha, V_0 and (unless ``T`` is given) T free."""
    B = np.asarray(B, dtype=float)
    V = np.asarray(V, dtype=float)
    m = np.isfinite(V)
    if m.sum() < 4:
        raise ValueError("need at least 4 tracked positions")
    Bm, Vm = B[m], V[m]
    sig = np.ones_like(Vm) if sigma is None else np.asarray(sigma, dtype=float)[m]
    sig = np.where(np.isfinite(sig) & (sig > 0), sig, np.nanmedian(sig[sig > 0]) if np.any(sig > 0) else 1.0)
    # linear tail gives alpha and V0, the low-field offset gives T
    tail = Bm >= np.quantile(Bm, 0.6)
    slope, icpt = np.polyfit(Bm[tail], Vm[tail], 1)
    alpha0 = g * CONST.mu_B / (2 * abs(slope)) * 1e-6 if slope < 0 else 0.1
    alpha0 = float(np.clip(alpha0, 1e-5, 5.0))
    if T is None:
        drop = icpt - Vm[np.argmin(Bm)]
        T0 = 0.1
        if drop > 0:
            b0 = math.log(2) / (alpha0 * 1e6 * drop)
            T0 = float(np.clip(1 / (CONST.k_B * b0), 1e-3, 10.0))

        def resid(p):
            return (v01_model(Bm, p[0], p[1], p[2], g) - Vm) / sig

        rep = least_squares(FitProblem(resid, [alpha0, T0, icpt], lower=[1e-6, 1e-4, -np.inf],
                                       upper=[10.0, 100.0, np.inf], names=["alpha", "T", "V_0"],
                                       x_scale=[alpha0, T0, max(abs(icpt), 1e-3)]))
        alpha, T_fit, V0 = rep.estimates
    else:
        if not T > 0:
            raise ValueError("T must be positive")

        def resid(p):
            return (v01_model(Bm, p[0], T, p[1], g) - Vm) / sig

        r2 = least_squares(FitProblem(resid, [alpha0, icpt], lower=[1e-6, -np.inf], upper=[10.0, np.inf],
                                      names=["alpha", "V_0"], x_scale=[alpha0, max(abs(icpt), 1e-3)]))
        alpha, V0 = r2.estimates
        T_fit = T
        cov = np.zeros((3, 3))
        cov[np.ix_([0, 2], [0, 2])] = r2.covariance
        rep = FitReport(np.array([alpha, T, V0]), np.sqrt(np.clip(np.diag(cov), 0, None)), r2.cost,
                        r2.iterations, r2.converged, ["alpha", "T", "V_0"], r2.cost_history, cov, r2.message,
                        {"T_fixed": True})
    xmax = g * CONST.mu_B * Bm.max() / (CONST.k_B * T_fit)
    xmin = g * CONST.mu_B * Bm.min() / (CONST.k_B * T_fit)
    rep.flags["under_identified"] = bool(xmax < 3 or xmin > 1)
    res = np.full(B.shape, np.nan)
    res[m] = Vm - v01_model(Bm, alpha, T_fit, V0, g)
    return Fit01(MagnetospecModel(float(alpha), float(T_fit), float(V0), None, g), rep, res, B)


def subtract_correlated_noise(resid_01, B_01, positions_12, B_12) -> np.ndarray:
    """V_12(B) minus the 0-1 fit residual measured at the same field."""
    B_01 = np.asarray(B_01, dtype=float)
    B_12 = np.asarray(B_12, dtype=float)
    if B_01.shape != B_12.shape or not np.array_equal(B_01, B_12):
        raise ValueError("transitions must share one field grid")
    return np.asarray(positions_12, dtype=float) - np.asarray(resid_01, dtype=float)


def fit_EST(B, V12, alpha: float, T: float, sigma=None, g: float = G) -> FitReport:
    """Fit E_ST and a fresh offset V_0 with alpha and T held fixed."""
    B = np.asarray(B, dtype=float)
    V12 = np.asarray(V12, dtype=float)
    m = np.isfinite(V12)
    Bm, Vm = B[m], V12[m]
    if Bm.size < 4:
        raise ValueError("need at least 4 positions")
    sig = np.ones_like(Vm) if sigma is None else np.asarray(sigma, dtype=float)[m]
    Emax = g * CONST.mu_B * Bm.max()
    grid = np.linspace(0.0, 1.5 * Emax, 301)
    best = (np.inf, 0.0, 0.0)
    for E in grid:
        f = v12_model(Bm, alpha, T, 0.0, E, g)
        w = 1 / sig ** 2
        V0 = float(np.sum(w * (Vm - f)) / np.sum(w))
        c = float(np.sum(w * (Vm - f - V0) ** 2))
        if c < best[0]:
            best = (c, E, V0)

    def resid(p):
        return (v12_model(Bm, alpha, T, p[1], p[0], g) - Vm) / sig

    rep = least_squares(FitProblem(resid, [max(best[1], 1e-3), best[2]], lower=[0.0, -np.inf],
                                   upper=[np.inf, np.inf], names=["E_ST", "V_0"],
                                   x_scale=[max(best[1], 1.0), max(abs(best[2]), 1e-3)]))
    rep.flags["kink_out_of_range"] = bool(rep.estimates[0] > Emax)
    rep.flags["below_thermal"] = bool(rep.estimates[0] < CONST.k_B * T)
    return rep


# ------------------------------------------------------------- synthetic

@dataclass
class ScanSynthConfig:
    alpha: float = 0.1
    T: float = 0.1
    E_ST: float = 50.0
    V0_01: float = 0.0
    V0_12: float = 0.004
    B: tuple = (0.0, 1.0, 301)
    V_halfspan: float = 0.0025
    V_points: int = 251
    width: float = 80e-6  # V, transition half-width
    position_noise: float = 50e-6  # V
    drift_amplitude: float = 150e-6  # V, common to both transitions
    drift_correlation: float = 0.03  # T
    signal_noise: float = 0.005
    background_slope: float = 40.0  # signal units per V
    seed: int = 0


def common_mode_drift(B, amplitude, rng, correlation: float = 0.03):
    """Zero-mean slow wander shared by both transitions.

    Gaussian-smoothed white noise with correlation length ``correlation``
    (in T). Its linear trend in B is removed: a trend common to both
    transitions is indistinguishable from a lever-arm change and no
    residual-based correction can recover it.
    """
    B = np.asarray(B, dtype=float)
    if amplitude == 0 or B.size < 3:
        return np.zeros(B.size)
    dB = (B[-1] - B[0]) / (B.size - 1)
    w = gaussian_filter1d(rng.standard_normal(B.size), correlation / dB, mode="reflect")
    A = np.column_stack([np.ones_like(B), B])
    w = w - A @ np.linalg.lstsq(A, w, rcond=None)[0]
    return amplitude * w / np.std(w)


def synthesize_scans(cfg: ScanSynthConfig = ScanSynthConfig()):
    """Sensor scans of both transitions with a shared drift.

    Returns ``(scan01, scan12, truth)`` where ``truth`` holds the true and
    perturbed transition positions.
    """
    rng = np.random.default_rng(cfg.seed)
    B = np.linspace(*cfg.B[:2], int(cfg.B[2]))
    drift = common_mode_drift(B, cfg.drift_amplitude, rng, cfg.drift_correlation)
    true01 = v01_model(B, cfg.alpha, cfg.T, cfg.V0_01)
    true12 = v12_model(B, cfg.alpha, cfg.T, cfg.V0_12, cfg.E_ST)
    pos01 = true01 + drift + rng.normal(0, cfg.position_noise, B.size)
    pos12 = true12 + drift + rng.normal(0, cfg.position_noise, B.size)
    scans = []
    for pos, centre in ((pos01, cfg.V0_01), (pos12, cfg.V0_12)):
        V = centre + np.linspace(-cfg.V_halfspan, cfg.V_halfspan, cfg.V_points) - 3e-4
        step = np.arctan((V[:, None] - pos[None, :]) / cfg.width) / np.pi
        bg = cfg.background_slope * (V[:, None] - centre)
        S = step + bg + rng.normal(0, cfg.signal_noise, (V.size, B.size))
        scans.append(TransitionScan(B, V, S))
    truth = {"B": B, "true01": true01, "true12": true12, "pos01": pos01, "pos12": pos12, "drift": drift}
    return scans[0], scans[1], truth


# --------------------------------------------------------------- pipeline

@dataclass
class MagnetospecResult:
    fit01: Fit01
    est: FitReport
    track01: TrackedTransition
    track12: TrackedTransition
    cleaned12: np.ndarray
    noise_subtracted: bool = True
    flags: dict = field(default_factory=dict)

    @property
    def E_ST(self) -> float:
        return float(self.est.estimates[0])

    def report(self) -> dict:
        a = self.fit01.report
        return {
            "alpha_eV_per_V": {"value": float(a.estimates[0]), "sigma": float(a.uncertainties[0])},
            "T_K": {"value": float(a.estimates[1]), "sigma": float(a.uncertainties[1])},
            "V_0_01_V": {"value": float(a.estimates[2]), "sigma": float(a.uncertainties[2])},
            "E_ST_ueV": {"value": float(self.est.estimates[0]), "sigma": float(self.est.uncertainties[0])},
            "V_0_12_V": {"value": float(self.est.estimates[1]), "sigma": float(self.est.uncertainties[1])},
            "noise_subtracted": self.noise_subtracted,
            "note": "E_ST is reported as an estimate of E_VS (E_ST/E_VS <= 1)",
            "flags": {**{k: v for k, v in self.est.flags.items()},
                      "fit01_under_identified": bool(a.flags.get("under_identified", False)), **self.flags},
        }


def estimate_width_samples(scan: TransitionScan) -> int:
    """Full width at half maximum of the mean Sobel line, in samples."""
    line = np.abs(sobel_filter(scan.signal))
    k = np.argmax(line, axis=0)
    widths = []
    for j in range(0, line.shape[1], max(1, line.shape[1] // 25)):
        col = line[:, j] - np.median(line[:, j])
        half = col >= 0.5 * col[k[j]]
        lo = hi = k[j]
        while lo > 0 and half[lo - 1]:
            lo -= 1
        while hi < col.size - 1 and half[hi + 1]:
            hi += 1
        widths.append(hi - lo + 1)
    return max(int(np.median(widths)), 1)


def _processed(scan: TransitionScan, width_samples: int) -> TransitionScan:
    return scan.with_signal(subtract_background(sobel_filter(scan.signal), width_samples))


def track_pair(scan01: TransitionScan, scan12: TransitionScan, width_samples: int | None = None):
    """Sobel, median background and Lorentzian tracking of both transitions."""
    if not np.array_equal(scan01.B, scan12.B):
        raise ValueError("transitions must share one field grid")
    if width_samples is None:
        width_samples = estimate_width_samples(scan01)
    return (track_transition(_processed(scan01, width_samples)),
            track_transition(_processed(scan12, width_samples)))


def analyse_tracks(t01: TrackedTransition, t12: TrackedTransition, noise_subtraction: bool = True,
                   alpha: float | None = None, T: float | None = None, refit: bool = True,
                   fit_T: bool = True) -> MagnetospecResult:
    """0-1 fit, optional correlated-noise subtraction and E_ST fit."""
    if not np.array_equal(t01.B, t12.B):
        raise ValueError("transitions must share one field grid")
    both = t01.valid & t12.valid
    if both.sum() < 4:
        raise ValueError("too few tracked field values")
    V01 = np.where(both, t01.V, np.nan)
    V12 = np.where(both, t12.V, np.nan)
    if refit:
        if not fit_T and T is None:
            raise ValueError("T is required when it is not fitted")
        f01 = fit_01_transition(t01.B, V01, T=None if fit_T else T)
    else:
        if alpha is None or T is None:
            raise ValueError("alpha and T are required when refitting is disabled")
        V0 = float(np.nanmean(V01 - v01_model(t01.B, alpha, T, 0.0)))
        res = V01 - v01_model(t01.B, alpha, T, V0)
        rep = FitReport(np.array([alpha, T, V0]), np.zeros(3), 0.0, 0, True, ["alpha", "T", "V_0"],
                        flags={"fixed": True})
        f01 = Fit01(MagnetospecModel(alpha, T, V0), rep, res, t01.B)
    cleaned = subtract_correlated_noise(f01.residuals, t01.B, V12, t12.B) if noise_subtraction else V12
    est = fit_EST(t12.B, cleaned, f01.model.alpha, f01.model.T)
    return MagnetospecResult(f01, est, t01, t12, cleaned, noise_subtraction,
                             {"lines_used": int(both.sum()), "lines_total": int(both.size)})


def run_pipeline(scan01: TransitionScan, scan12: TransitionScan, width_samples: int | None = None,
                 noise_subtraction: bool = True, **kw) -> MagnetospecResult:
    """Sobel -> median background -> Lorentzian tracking -> 0-1 fit ->
    correlated-noise subtraction -> E_ST fit. Keywords go to
    :func:`analyse_tracks`."""
    t01, t12 = track_pair(scan01, scan12, width_samples)
    return analyse_tracks(t01, t12, noise_subtraction, **kw)


# --------------------------------------------------------- triangulation

@dataclass(frozen=True)
class GateKernel:
    """Gaussian lever-arm response of one gate at the dot position."""
    name: str
    x: float
    y: float
    width: float
    amplitude: float = 1.0

    def response(self, X, Y):
        return self.amplitude * np.exp(-((X - self.x) ** 2 + (Y - self.y) ** 2) / (2 * self.width ** 2))


def potential_map(kernels, voltages: dict, X, Y):
    """Electrostatic potential (linear superposition of gate kernels)."""
    U = np.zeros(np.broadcast(X, Y).shape)
    for k in kernels:
        U = U + voltages.get(k.name, 0.0) * k.response(X, Y)
    return U


@dataclass(frozen=True, eq=False)
class CapacitanceRatioMap:
    x: np.ndarray
    y: np.ndarray
    ratio: np.ndarray  # [x, y], nan where masked
    measured: float
    measured_sigma: float
    gates: tuple = ("", "")

    def __post_init__(self):
        r = self.ratio[np.isfinite(self.ratio)]
        if np.any(r <= 0):
            raise ValueError("ratios must be positive")

    def clipped(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.abs(self.ratio - self.measured) <= self.measured_sigma

    def with_measurement(self, value, sigma) -> "CapacitanceRatioMap":
        return CapacitanceRatioMap(self.x, self.y, self.ratio, value, sigma, self.gates)

    def rows(self):
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                r = self.ratio[i, j]
                yield xv, yv, (r if np.isfinite(r) else "")


def cross_capacitance_ratio(kernels, g1: str, g2: str, x, y, V_op: dict | None = None,
                            dV: float = 5e-3, measured=(1.0, 0.1), eps: float = 1e-300) -> CapacitanceRatioMap:
    """Ratio of finite-difference potential responses of two gates per cell."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X, Y = np.meshgrid(x, y, indexing="ij")
    V_op = dict(V_op or {})

    def response(g):
        vp = dict(V_op)
        vm = dict(V_op)
        vp[g] = vp.get(g, 0.0) + dV
        vm[g] = vm.get(g, 0.0) - dV
        return potential_map(kernels, vp, X, Y) - potential_map(kernels, vm, X, Y)

    num, den = response(g1), response(g2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(den) > eps, num / den, np.nan)
    ratio = np.where(ratio > 0, ratio, np.nan)
    return CapacitanceRatioMap(x, y, ratio, float(measured[0]), float(measured[1]), (g1, g2))


def measured_ratio(alpha_g1_P: float, alpha_g2_P: float, sigma1: float = 0.0, sigma2: float = 0.0):
    """alpha_{g1,g2} = alpha_{g1,P} / alpha_{g2,P} with propagated 1 sigma."""
    r = alpha_g1_P / alpha_g2_P
    s = abs(r) * math.hypot(sigma1 / alpha_g1_P, sigma2 / alpha_g2_P)
    return r, s


@dataclass
class Triangulation:
    x: float
    y: float
    sigma_x: float
    sigma_y: float
    cells: int
    consistent: bool


def triangulate(map_a: CapacitanceRatioMap, map_b: CapacitanceRatioMap) -> Triangulation:
    if not (np.array_equal(map_a.x, map_b.x) and np.array_equal(map_a.y, map_b.y)):
        raise ValueError("maps must share one grid")
    both = map_a.clipped() & map_b.clipped()
    if not np.any(both):
        return Triangulation(float("nan"), float("nan"), float("nan"), float("nan"), 0, False)
    X, Y = np.meshgrid(map_a.x, map_a.y, indexing="ij")
    xs, ys = X[both], Y[both]
    return Triangulation(float(xs.mean()), float(ys.mean()), float(xs.std()), float(ys.std()), int(both.sum()), True)


def default_gate_layout(width: float = 50.0):
    """Screening gates above and below the channel, barriers left and right."""
    return [GateKernel("ST", 0.0, 60.0, width), GateKernel("SB", 0.0, -60.0, width),
            GateKernel("LB", -50.0, 0.0, width), GateKernel("RB", 50.0, 0.0, width),
            GateKernel("P", 0.0, 0.0, width)]


def y_displacement_calibration(dV, y) -> tuple[float, float]:
    """Least-squares slope (nm/V) and its 1 sigma of y against V_ST - V_SB."""
    dV = np.asarray(dV, dtype=float)
    y = np.asarray(y, dtype=float)
    if dV.size < 2 or np.unique(dV).size < 2:
        raise ValueError("need at least two distinct voltage differences")
    A = np.column_stack([dV, np.ones_like(dV)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    if dV.size > 2:
        r = y - A @ coef
        s2 = float(r @ r) / (dV.size - 2)
        cov = s2 * np.linalg.inv(A.T @ A)
        sig = float(math.sqrt(cov[0, 0]))
    else:
        sig = 0.0
    return float(coef[0]), sig
