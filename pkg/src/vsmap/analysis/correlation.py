"""Binned spatial Pearson correlation and Gaussian correlation-length fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fitcore import FitProblem, FitReport, least_squares
from ..landscape import CorrelationModel
from ..physics import orbital_energy

MIN_PAIRS = 10
D_MAX = 28.0


def pearson(a, b) -> float:
    """Textbook sample Pearson coefficient; nan if either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da, db = a - a.mean(), b - b.mean()
    den = np.sqrt(np.sum(da * da) * np.sum(db * db))
    return float(np.sum(da * db) / den) if den > 0 else float("nan")


@dataclass(frozen=True)
class CorrelationBin:
    D: float
    corr: float
    pairs: int


def binned_correlation(x, y, E, bin_width: float = 1.4, distance: str = "geometric",
                       min_pairs: int = MIN_PAIRS, D_max: float | None = None) -> list[CorrelationBin]:
    """Pearson correlation of E over point pairs, binned by separation.

    Bins are centred on multiples of ``bin_width``; the zero bin holds each
    point paired with itself. Every unordered pair enters in both orders, so
    the coefficient is symmetric in the pair members. ``distance`` selects
    the geometric separation or the separation along x only (pairs on the
    same y). Non-finite entries are ignored.
    """
    if distance not in ("geometric", "along_d"):
        raise ValueError("distance must be 'geometric' or 'along_d'")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    x, y, E = (np.asarray(v, dtype=float).ravel() for v in (x, y, E))
    keep = np.isfinite(x) & np.isfinite(y) & np.isfinite(E)
    x, y, E = x[keep], y[keep], E[keep]
    if x.size < 2:
        raise ValueError("need at least 2 valid points")
    i, j = np.triu_indices(x.size, k=0)
    if distance == "geometric":
        D = np.hypot(x[i] - x[j], y[i] - y[j])
    else:
        same = y[i] == y[j]
        i, j = i[same], j[same]
        D = np.abs(x[i] - x[j])
    if D_max is not None:
        m = D <= D_max + 0.5 * bin_width
        i, j, D = i[m], j[m], D[m]
    k = np.rint(D / bin_width).astype(np.int64)
    order = np.argsort(k, kind="stable")
    k, i, j = k[order], i[order], j[order]
    edges = np.flatnonzero(np.diff(k)) + 1
    out = []
    for ks, ii, jj in zip(np.split(k, edges), np.split(i, edges), np.split(j, edges)):
        if ks.size == 0:
            continue
        n = ii.size
        if n < min_pairs:
            continue
        a = np.concatenate([E[ii], E[jj]])
        b = np.concatenate([E[jj], E[ii]])
        c = pearson(a, b)
        if np.isfinite(c):
            out.append(CorrelationBin(float(ks[0] * bin_width), c, int(n)))
    return out


@dataclass
class CorrelationFit:
    model: CorrelationModel
    report: FitReport
    E_orb_meV: float


def fit_correlation_model(bins, D_max: float = D_MAX, a0: float = 10.0) -> CorrelationFit:
    """Least-squares fit of exp(-D^2 / ((4 - pi) a_dot^2)) for D < D_max."""
    D = np.array([b.D for b in bins], dtype=float)
    C = np.array([b.corr for b in bins], dtype=float)
    m = D < D_max
    D, C = D[m], C[m]
    if D.size < 3:
        raise ValueError("need at least 3 bins below D_max")
    # start from the first 1/e crossing when available
    below = np.flatnonzero(C < np.exp(-1))
    if below.size and D[below[0]] > 0:
        a0 = float(D[below[0]] / np.sqrt(4 - np.pi))

    def resid(p):
        return np.exp(-D ** 2 / ((4 - np.pi) * p[0] ** 2)) - C

    rep = least_squares(FitProblem(resid, [a0], lower=[1e-3], upper=[1e4], names=["a_dot"]))
    a = float(rep.estimates[0])
    decays = bool(C[-1] < C[0] - 0.2)
    if not decays or a >= 1e4 * 0.999:
        rep.converged = False
        rep.flags["non_decaying"] = True
    return CorrelationFit(CorrelationModel(a_dot=a), rep, orbital_energy(a))


def bins_to_rows(bins):
    return [(b.D, b.corr, b.pairs) for b in bins]
