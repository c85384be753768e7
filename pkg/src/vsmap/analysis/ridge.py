"""Anticrossing ridge extraction from P_S(d, B) maps and spline resampling."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.ndimage import gaussian_filter1d, median_filter

from ..io import read_csv_columns, write_csv
from ..physics import valley_splitting_from_field

BAND_HALFWIDTH = 0.030  # T
SIGNIFICANCE = 3.0
RESAMPLE_PITCH = 1.4  # nm
# median significance below which a tracked ridge is treated as noise
COHERENT_Z = 6.0
MIN_RUN = 3
MAX_GAP_WIDENING = 3
# half-width of the stationary-line window, in field steps
STATIONARY_WIDTH = 3.0


@dataclass(frozen=True, eq=False)
class RidgeTrace:
    d: np.ndarray
    B_VS: np.ndarray  # nan where invalid
    valid: np.ndarray
    y_offset: float = 0.0
    significance: np.ndarray | None = None

    @property
    def E_VS(self) -> np.ndarray:
        """Valley splitting with g = 2, nan for invalid entries."""
        return np.where(self.valid, valley_splitting_from_field(self.B_VS, 2.0), np.nan)

    def valid_points(self):
        return self.d[self.valid], self.E_VS[self.valid]


def save_ridge(trace: RidgeTrace, path) -> Path:
    rows = ((d, b if v else "", e if v else "", bool(v))
            for d, b, e, v in zip(trace.d, trace.B_VS, trace.E_VS, trace.valid))
    return write_csv(path, ["d_nm", "B_T", "E_VS_ueV", "valid"], rows)


def load_ridge(path, y_offset: float = 0.0) -> RidgeTrace:
    cols = read_csv_columns(path, ["d_nm", "B_T", "E_VS_ueV", "valid"])
    valid = np.asarray(cols["valid"], dtype=float) > 0
    B = np.array([float(b) if str(b) not in ("", "nan") else np.nan for b in cols["B_T"]])
    return RidgeTrace(np.asarray(cols["d_nm"], dtype=float), B, valid, y_offset)


def ridge_significance(M: np.ndarray, dB: float, long_scale: float = 0.013,
                       short_scale: float = 0.0032, row_normalize: bool = True) -> np.ndarray:
    """Robust z-score of the anticrossing signature for every (d, B) cell.

    ``M`` is the row-mean-subtracted map ``[d, B]``. A high-pass along B removes
    the slowly varying g-factor background. The rectified signal is then
    centred and scaled per field value across d, which suppresses features
    present at every d (such as the static-dot and dwell lines), and finally
    turned into a robust z-score per d column. ``row_normalize=False`` skips
    the per-field step, which is needed when the ridge itself is flat in d.
    """
    hp = M - gaussian_filter1d(M, long_scale / dB, axis=1, mode="nearest")
    env = np.abs(hp)
    if row_normalize:
        row_med = np.median(env, axis=0, keepdims=True)
        row_mad = np.median(np.abs(env - row_med), axis=0, keepdims=True)
        env = (env - row_med) / (row_mad + np.median(row_mad) + np.finfo(float).tiny)
    env = gaussian_filter1d(env, short_scale / dB, axis=1, mode="nearest")
    med = np.median(env, axis=1, keepdims=True)
    noise = 1.4826 * np.median(np.abs(env - med), axis=1, keepdims=True)
    noise = np.where(noise > 0, noise, np.finfo(float).tiny)
    return (env - med) / noise


def _peak(zrow, B, center, band, halfwidth):
    idx = np.nonzero(np.abs(B - center) <= band)[0]
    if idx.size == 0:
        return np.nan, -np.inf
    k = idx[np.argmax(zrow[idx])]
    lo, hi = max(k - halfwidth, 0), min(k + halfwidth + 1, len(B))
    w = np.clip(zrow[lo:hi], 0, None)
    if w.sum() <= 0:
        return float(B[k]), float(zrow[k])
    return float(w @ B[lo:hi] / w.sum()), float(zrow[k])


def _track(z, B, seed_col, seed_B, band, halfwidth, threshold):
    """Greedy walk outwards from the seed column.

    The search centre is the last accepted field extrapolated one column with
    the local slope; after rejected columns the window widens (up to 3x).
    """
    n = z.shape[0]
    B_out = np.full(n, np.nan)
    sig = np.full(n, -np.inf)
    b, s = _peak(z[seed_col], B, seed_B, band, halfwidth)
    B_out[seed_col], sig[seed_col] = b, s
    for step in (1, -1):
        hist = [(seed_col, b)]
        j = seed_col + step
        while 0 <= j < n:
            jl, bl = hist[-1]
            gap = abs(j - jl)
            slope = 0.0
            if len(hist) >= 2:
                (j2, b2), (j1, b1) = hist[-2], hist[-1]
                slope = (b1 - b2) / (j1 - j2)
            c = bl + slope * step
            width = band * min(gap, MAX_GAP_WIDENING)
            bj, sj = _peak(z[j], B, c, width, halfwidth)
            sig[j] = sj
            if sj > threshold:
                B_out[j] = bj
                hist.append((j, bj))
            j += step
    return B_out, sig


def extract_ridge(pm, band_halfwidth: float = BAND_HALFWIDTH, threshold: float = SIGNIFICANCE,
                  y_offset: float | None = None, centroid_halfwidth: int = 3) -> RidgeTrace:
    """Follow the spin-valley anticrossing of the shuttled dot through a
    P_S(d, B) map.

    Seeds at the strongest signature, then walks outwards in d, searching
    within ``band_halfwidth`` of the (slope-extrapolated) previous field.
    Isolated jumps away from a running median of the trace are searched
    again in a narrow window around that median. Entries whose signature does
    not exceed ``threshold`` (robust z-score) are invalid, as are entries
    whose search window left the scanned field range.
    """
    P = np.asarray(pm.P, dtype=float)
    if P.size == 0:
        raise ValueError("empty map")
    d = np.asarray(pm.axis1, dtype=float)
    B = np.asarray(pm.axis2, dtype=float)
    if y_offset is None:
        y_offset = float((pm.meta or {}).get("y_offset_nm", 0.0))
    if len(B) < 5:
        raise ValueError("need at least 5 field points")
    dB = float(np.median(np.diff(B)))
    M = P - P.mean(axis=0, keepdims=True)
    z_raw = ridge_significance(M, dB, row_normalize=False)
    trace, sig = _extract(ridge_significance(M, dB), B, dB, band_halfwidth, threshold, centroid_halfwidth)
    ok = np.isfinite(trace) & (sig > threshold)
    if not ok.any() or np.median(sig[ok]) < COHERENT_Z:
        # a ridge that hardly moves in d is removed by the per-field
        # normalisation; track the plain significance instead
        trace, sig = _extract(z_raw, B, dB, band_halfwidth, threshold, centroid_halfwidth)
    else:
        trace, sig = _merge_stationary(trace, sig, z_raw, B, dB, band_halfwidth, threshold,
                                       centroid_halfwidth)
    # a peak on the scan edge means the anticrossing may lie outside the window
    edge = (trace <= B[0] + dB) | (trace >= B[-1] - dB)
    valid = np.isfinite(trace) & (sig > threshold) & ~edge
    # isolated detections are noise peaks picked up while searching
    for seg in contiguous_segments(valid):
        if seg.stop - seg.start < MIN_RUN:
            valid[seg] = False
    return RidgeTrace(d, np.where(valid, trace, np.nan), valid, y_offset, sig)


def _stationary_line(z_raw, B, threshold):
    """Field of a feature present at (nearly) every d, or None.

    The dwell before shuttling always probes the same spot, which imprints
    a line at one fixed field across the whole map.
    """
    floor = np.quantile(z_raw, 0.2, axis=0)
    k = int(np.argmax(floor))
    return float(B[k]) if floor[k] > threshold else None


def _merge_stationary(trace, sig, z_raw, B, dB, band, threshold, halfwidth):
    """Use the plain significance where the ridge meets the stationary line.

    There the per-field normalisation removes most of the ridge and leaves a
    remainder biased towards high field; such entries are re-measured on the
    plain map. Entries the normalised map lost entirely stay invalid, since
    the plain map cannot tell ridge and line apart.
    """
    B_line = _stationary_line(z_raw, B, threshold)
    if B_line is None:
        return trace, sig
    width = STATIONARY_WIDTH * dB
    cand = [_peak(z_raw[j], B, B_line, width, halfwidth) for j in range(len(trace))]
    cand_B = np.array([c[0] for c in cand])
    cand_s = np.array([c[1] for c in cand])
    usable = np.isfinite(cand_B) & (cand_s > threshold)
    ok = np.isfinite(trace) & (sig > threshold)
    trace, sig = trace.copy(), sig.copy()
    on_line = ok & (np.abs(trace - B_line) <= width) & usable
    trace[on_line], sig[on_line] = cand_B[on_line], cand_s[on_line]
    return trace, sig


def _extract(z, B, dB, band_halfwidth, threshold, centroid_halfwidth):
    seed_col = int(np.argmax(z.max(axis=1)))
    seed_B = float(B[np.argmax(z[seed_col])])
    trace, sig = _track(z, B, seed_col, seed_B, band_halfwidth, centroid_halfwidth, threshold)
    guide = _running_median(trace, 9)
    narrow = 2.5 * dB
    for j in np.flatnonzero(np.abs(trace - guide) > narrow):
        bj, sj = _peak(z[j], B, guide[j], narrow, centroid_halfwidth)
        trace[j], sig[j] = (bj, sj) if sj > threshold else (np.nan, sj)
    return trace, sig


def _running_median(x, window):
    out = np.full_like(x, np.nan)
    half = window // 2
    for i in range(len(x)):
        seg = x[max(0, i - half):i + half + 1]
        seg = seg[np.isfinite(seg)]
        if seg.size:
            out[i] = np.median(seg)
    return out


def contiguous_segments(valid: np.ndarray) -> list[slice]:
    segs = []
    start = None
    for i, v in enumerate(valid):
        if v and start is None:
            start = i
        elif not v and start is not None:
            segs.append(slice(start, i))
            start = None
    if start is not None:
        segs.append(slice(start, len(valid)))
    return segs


@dataclass(frozen=True, eq=False)
class DenseTrace:
    d: np.ndarray
    E_VS: np.ndarray  # nan in gaps
    y_offset: float = 0.0

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.E_VS)


def resample_spline(trace: RidgeTrace, pitch: float = RESAMPLE_PITCH, min_points: int = 4,
                    method: str = "cubic") -> DenseTrace:
    """Spline through each contiguous valid run of the ridge, sampled every
    ``pitch`` nm; gaps stay empty and nothing is extrapolated.

    ``method`` is ``"cubic"`` (not-a-knot C2 spline) or ``"pchip"`` (shape
    preserving, but it clips extrema between sparse nodes). Runs shorter
    than ``min_points`` are passed through at their own nodes.
    """
    if method not in ("cubic", "pchip"):
        raise ValueError("method must be 'cubic' or 'pchip'")
    if not pitch > 0:
        raise ValueError("pitch must be positive")
    E = trace.E_VS
    d_all, E_all = [], []
    for seg in contiguous_segments(trace.valid):
        ds, Es = trace.d[seg], E[seg]
        if len(ds) < min_points:
            d_all.append(ds)
            E_all.append(Es)
            continue
        n = int(np.floor((ds[-1] - ds[0]) / pitch + 1e-9)) + 1
        grid = ds[0] + pitch * np.arange(n)
        d_all.append(grid)
        interp = (CubicSpline(ds, Es, bc_type="not-a-knot", extrapolate=False) if method == "cubic"
                  else PchipInterpolator(ds, Es, extrapolate=False))
        E_all.append(interp(grid))
    if not d_all:
        return DenseTrace(np.zeros(0), np.zeros(0), trace.y_offset)
    d_cat = np.concatenate(d_all)
    E_cat = np.concatenate(E_all)
    return DenseTrace(d_cat, E_cat, trace.y_offset)


def ridge_rms_error(trace: RidgeTrace, true_B) -> float:
    """RMS field error over valid entries, T."""
    err = (trace.B_VS - np.asarray(true_B))[trace.valid]
    return float(np.sqrt(np.mean(err ** 2))) if err.size else float("nan")


__all__ = ["RidgeTrace", "DenseTrace", "extract_ridge", "resample_spline", "save_ridge",
           "load_ridge", "ridge_rms_error", "contiguous_segments"]
