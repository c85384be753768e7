"""Fits of the spin-valley Hamiltonian to measured precession spectra nu(B)."""
from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from ..fitcore import FitProblem, FitReport, least_squares
from ..physics import CONST, SpinValleyParams, anticrossing_center, precession_frequency_batch

NAMES = ["delta_g", "E_l", "E_r", "v_l", "v_r"]
V_INIT = 0.07  # ueV
FEATURE_Z = 5.0
SCAN_POINTS = 41
PROMINENCE = 0.5


def _model(p, B):
    return precession_frequency_batch(p[0], p[1], p[2], p[3], p[4], B)


def _find_features(B, nu, sigma, slope):
    """Centres of the (at most two) strongest departures from the linear background.

    A candidate must be a local maximum of the deviation that stands out from
    the valleys on both sides by at least half its height, so the long tail
    of one anticrossing is not counted twice.
    """
    dev = np.abs(nu - slope * B) / sigma
    peaks, props = find_peaks(dev, height=FEATURE_Z, prominence=0.0)
    keep = props["prominences"] >= PROMINENCE * props["peak_heights"]
    peaks = peaks[keep][np.argsort(dev[peaks[keep]])[::-1]][:2]
    centers = []
    for k in peaks:
        j = k - 1 if dev[k - 1] > dev[k + 1] else k + 1
        centers.append(0.5 * (B[k] + B[j]))
    return sorted(centers)


def _scan(p, idx, B, nu, sigma, half):
    """Grid search of one anticrossing energy, holding the rest fixed."""
    grid = p[idx] + np.linspace(-half, half, SCAN_POINTS)
    grid = grid[grid > 0]
    P = np.repeat(p[None, :], grid.size, axis=0)
    P[:, idx] = grid
    pred = precession_frequency_batch(*(P[:, i, None] for i in range(5)), B[None, :])
    cost = np.sum(((pred - nu) / sigma) ** 2, axis=1)
    out = p.copy()
    out[idx] = grid[np.argmin(cost)]
    return out


def fit_anticrossing_spectrum(B, nu, sigma=None, x0: SpinValleyParams | None = None,
                              max_iter: int = 300) -> FitReport:
    """Weighted least-squares fit of (delta_g, E_l, E_r, v_l, v_r).

    Starting energies come from the two strongest departures of nu(B) from
    the Zeeman-difference line; both assignments of those features to the
    left and right dot are fitted and the lower cost wins. The assignment is
    inherently ambiguous (swapping the dots together with the sign of
    delta_g leaves the spectrum unchanged), which is recorded in the flags.
    """
    B = np.asarray(B, dtype=float)
    nu = np.asarray(nu, dtype=float)
    sigma = np.ones_like(nu) if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), nu.shape)
    if B.shape != nu.shape or B.ndim != 1:
        raise ValueError("B and nu must be 1D and equally long")
    if len(B) < 6:
        raise ValueError("need at least 6 spectrum points")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    if np.any(B < 0):
        raise ValueError("B must be non-negative")

    flags: dict = {"label_assignment": "arbitrary: (E_l, v_l) <-> (E_r, v_r) with delta_g -> -delta_g is equivalent"}
    if x0 is not None:
        starts = [x0.as_array()[:5]]
        flags["under_determined"] = False
    else:
        ratio = nu * CONST.h / (CONST.mu_B * np.where(B > 0, B, np.nan))
        dg0 = float(np.nanmedian(ratio))
        slope = dg0 * CONST.mu_B / CONST.h
        centers = _find_features(B, nu, sigma, slope)
        flags["features_found"] = len(centers)
        flags["under_determined"] = len(centers) < 2
        E = [float(2 * CONST.mu_B * c) for c in centers]
        # missing features are parked beyond the scanned range
        while len(E) < 2:
            E.append(float(2 * CONST.mu_B * B.max() * 1.2 + 5.0 * len(E)))
        dB = float(np.median(np.diff(np.sort(B))))
        half = 2 * CONST.mu_B * 1.5 * dB
        starts = []
        for Ea, Eb in ((E[0], E[1]), (E[1], E[0])):
            p = np.array([dg0, Ea, Eb, V_INIT, V_INIT])
            for idx in (1, 2) if len(centers) >= 2 else ():
                p = _scan(p, idx, B, nu, sigma, half)
            starts.append(p)

    def resid(p):
        return (_model(p, B) - nu) / sigma

    best = None
    costs = []
    for p0 in starts:
        prob = FitProblem(resid, p0, lower=[-0.1, 0, 0, 0, 0], upper=[0.1, np.inf, np.inf, np.inf, np.inf],
                          names=NAMES, max_iter=max_iter, absolute_sigma=True,
                          x_scale=[max(abs(p0[0]), 1e-6), max(p0[1], 1.0), max(p0[2], 1.0), V_INIT, V_INIT])
        rep = least_squares(prob)
        costs.append(rep.cost)
        if best is None or rep.cost < best.cost:
            best = rep
    best.flags.update(flags)
    best.flags["costs_per_assignment"] = ";".join(f"{c:.6g}" for c in costs)
    best.flags["reduced_chi2"] = 2 * best.cost / max(len(B) - 5, 1)
    return best


def params_from_report(rep: FitReport) -> SpinValleyParams:
    dg, El, Er, vl, vr = rep.estimates
    return SpinValleyParams(float(dg), float(El), float(Er), float(vl), float(vr))


def spectrum_cost(params: SpinValleyParams, B, nu, sigma=1.0) -> float:
    r = (_model(params.as_array()[:5], np.asarray(B, dtype=float)) - np.asarray(nu)) / sigma
    return 0.5 * float(r @ r)


def swap_labels(params: SpinValleyParams) -> SpinValleyParams:
    """The equivalent parameter set with the dots exchanged."""
    return SpinValleyParams(-params.delta_g, params.E_r, params.E_l, params.v_r, params.v_l, params.g_base)


__all__ = ["fit_anticrossing_spectrum", "params_from_report", "spectrum_cost", "swap_labels",
           "anticrossing_center"]
