"""Assembly of several d-traces at different y offsets into a 2D E_VS map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..io import read_csv_columns, write_csv
from .ridge import DenseTrace


@dataclass(frozen=True, eq=False)
class ValleyMap2D:
    d: np.ndarray
    y: np.ndarray
    E_VS: np.ndarray  # [d, y], nan where missing
    is_1d: bool = False

    def rows(self):
        for i, dv in enumerate(self.d):
            for j, yv in enumerate(self.y):
                e = self.E_VS[i, j]
                yield dv, yv, (e if np.isfinite(e) else "")


def _on_grid(trace: DenseTrace, d_grid, tol):
    out = np.full(d_grid.size, np.nan)
    if trace.d.size == 0:
        return out
    idx = np.searchsorted(trace.d, d_grid)
    for k, (i, dv) in enumerate(zip(idx, d_grid)):
        for j in (i - 1, i):
            if 0 <= j < trace.d.size and abs(trace.d[j] - dv) <= tol:
                out[k] = trace.E_VS[j]
    return out


def assemble_2d_map(traces, y_grid=None, d_grid=None, pitch: float = 1.4) -> ValleyMap2D:
    """Linear interpolation in y between traces, value-matched at each d.

    ``traces`` is a sequence of :class:`DenseTrace` (carrying ``y_offset``).
    A cell is missing if either bracketing trace is missing at that d.
    """
    traces = sorted(traces, key=lambda t: t.y_offset)
    if not traces:
        raise ValueError("no traces")
    ys = np.array([t.y_offset for t in traces], dtype=float)
    if np.unique(ys).size != ys.size:
        raise ValueError("traces must have distinct y offsets")
    if d_grid is None:
        lo = min(t.d.min() for t in traces if t.d.size)
        hi = max(t.d.max() for t in traces if t.d.size)
        d_grid = lo + pitch * np.arange(int(np.floor((hi - lo) / pitch + 1e-9)) + 1)
    d_grid = np.asarray(d_grid, dtype=float)
    cols = np.column_stack([_on_grid(t, d_grid, 1e-6 * max(pitch, 1.0)) for t in traces])
    if len(traces) == 1:
        return ValleyMap2D(d_grid, ys, cols, True)
    if y_grid is None:
        y_grid = ys[0] + pitch * np.arange(int(np.floor((ys[-1] - ys[0]) / pitch + 1e-9)) + 1)
        if not np.isclose(y_grid[-1], ys[-1]):
            y_grid = np.append(y_grid, ys[-1])
    y_grid = np.asarray(y_grid, dtype=float)
    if y_grid.min() < ys[0] - 1e-12 or y_grid.max() > ys[-1] + 1e-12:
        raise ValueError("y grid extends beyond the traces")
    j = np.clip(np.searchsorted(ys, y_grid, side="right") - 1, 0, len(ys) - 2)
    w = (y_grid - ys[j]) / (ys[j + 1] - ys[j])
    lower, upper = cols[:, j], cols[:, j + 1]
    E = (1 - w) * lower + w * upper
    # exact hits on a trace do not need the neighbour
    E = np.where(w == 0, lower, np.where(w == 1, upper, E))
    return ValleyMap2D(d_grid, y_grid, E, False)


def save_map2d(m: ValleyMap2D, path):
    return write_csv(path, ["d_nm", "y_nm", "E_VS_ueV"], m.rows())


def load_map2d(path) -> ValleyMap2D:
    c = read_csv_columns(path, ["d_nm", "y_nm", "E_VS_ueV"])
    d = np.unique(np.asarray(c["d_nm"], dtype=float))
    y = np.unique(np.asarray(c["y_nm"], dtype=float))
    E = np.full((d.size, y.size), np.nan)
    for dv, yv, e in zip(c["d_nm"], c["y_nm"], c["E_VS_ueV"]):
        if str(e) not in ("", "nan"):
            E[np.searchsorted(d, float(dv)), np.searchsorted(y, float(yv))] = float(e)
    return ValleyMap2D(d, y, E, y.size == 1)
