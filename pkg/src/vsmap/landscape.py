"""Correlated valley-splitting, g-factor and coupling landscapes."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .physics import orbital_energy

MAX_CELLS = 10_000
CHOL_JITTER = 1e-10


@dataclass(frozen=True)
class RicianParams:
    gamma: float = 35.4  # µeV
    sigma: float = 13.6  # µeV

    def __post_init__(self):
        if self.gamma < 0 or self.sigma <= 0:
            raise ValueError("need gamma >= 0 and sigma > 0")


@dataclass(frozen=True)
class FoldedGaussianParams:
    mu: float = 38.1  # µeV
    sigma_tilde: float = 13.0  # µeV

    def __post_init__(self):
        if self.mu < 0 or self.sigma_tilde <= 0:
            raise ValueError("need mu >= 0 and sigma_tilde > 0")


@dataclass(frozen=True)
class CorrelationModel:
    a_dot: float = 16.0  # nm

    def __post_init__(self):
        if self.a_dot <= 0:
            raise ValueError("a_dot must be positive")

    @property
    def E_orb(self) -> float:
        """Orbital energy in meV."""
        return orbital_energy(self.a_dot)


def gaussian_correlation(D, model: CorrelationModel):
    D = np.asarray(D, dtype=float)
    if np.any(D < 0):
        raise ValueError("distance must be non-negative")
    out = np.exp(-D ** 2 / ((4 - math.pi) * model.a_dot ** 2))
    return float(out) if out.ndim == 0 else out


def grid_axis(extent: float, pitch: float, origin: float = 0.0) -> np.ndarray:
    # round up so the last node reaches the full extent
    n = math.ceil(extent / pitch - 1e-9) + 1 if extent > 0 else 1
    return origin + pitch * np.arange(n)


@lru_cache(maxsize=16)
def _factor(nx: int, ny: int, pitch: float, a_dot: float) -> np.ndarray:
    xs = pitch * np.arange(nx)
    ys = pitch * np.arange(ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return covariance_factor(pts, CorrelationModel(a_dot))


def covariance_matrix(points: np.ndarray, model: CorrelationModel) -> np.ndarray:
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / ((4 - math.pi) * model.a_dot ** 2))


def covariance_factor(points: np.ndarray, model: CorrelationModel) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T`` equal to the Gaussian covariance of ``points``.

    Cholesky with a small diagonal jitter; the smooth Gaussian kernel is
    numerically rank deficient on fine grids, in which case an eigenvalue
    square root with negative eigenvalues clipped is used instead.
    """
    C = covariance_matrix(np.asarray(points, dtype=float), model)
    try:
        return np.linalg.cholesky(C + CHOL_JITTER * np.eye(len(C)))
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(C)
        return V * np.sqrt(np.clip(w, 0, None))


def synthesize_gaussian_field(x_extent, y_extent, pitch, model: CorrelationModel,
                              seed=None, rng=None) -> np.ndarray:
    """Standard-normal field on the grid with Gaussian spatial correlation.

    Returns an array of shape ``(nx, ny)``.
    """
    if pitch <= 0:
        raise ValueError("pitch must be positive")
    nx = len(grid_axis(x_extent, pitch))
    ny = len(grid_axis(y_extent, pitch))
    if nx * ny > MAX_CELLS:
        raise ValueError(f"grid of {nx * ny} cells too large for dense factorization")
    rng = np.random.default_rng(seed) if rng is None else rng
    L = _factor(nx, ny, float(pitch), float(model.a_dot))
    return (L @ rng.standard_normal(nx * ny)).reshape(nx, ny)


def rician_field(fieldX, fieldY, params: RicianParams) -> np.ndarray:
    fieldX = np.asarray(fieldX, dtype=float)
    fieldY = np.asarray(fieldY, dtype=float)
    if fieldX.shape != fieldY.shape:
        raise ValueError("field shapes differ")
    return np.hypot(params.gamma + params.sigma * fieldX, params.sigma * fieldY)


@dataclass(frozen=True)
class LandscapeSpec:
    x_extent: float = 210.0
    y_extent: float = 18.0
    pitch: float = 1.4
    x_origin: float = 0.0
    y_origin: float = -12.0
    rician: RicianParams = field(default_factory=RicianParams)
    correlation: CorrelationModel = field(default_factory=CorrelationModel)
    delta_g_mean: float = 6.58e-4
    delta_g_spread: float = 2e-4
    v_mean: float = 0.08  # µeV

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.x_extent < 0 or self.y_extent < 0:
            raise ValueError("extents must be non-negative")
        if self.v_mean < 0:
            raise ValueError("v_mean must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LandscapeSpec":
        d = dict(d)
        if isinstance(d.get("rician"), dict):
            d["rician"] = RicianParams(**d["rician"])
        if isinstance(d.get("correlation"), dict):
            d["correlation"] = CorrelationModel(**d["correlation"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ValleyLandscape:
    """Gridded fields indexed ``[ix, iy]`` on axes ``x`` and ``y`` (nm)."""

    x: np.ndarray
    y: np.ndarray
    E_VS_grid: np.ndarray
    delta_g_grid: np.ndarray
    v_grid: np.ndarray
    seed: int | None = None
    spec: LandscapeSpec | None = None

    def __post_init__(self):
        shape = (len(self.x), len(self.y))
        for name in ("E_VS_grid", "delta_g_grid", "v_grid"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")
        if np.any(self.E_VS_grid < 0) or np.any(self.v_grid < 0):
            raise ValueError("E_VS and v must be non-negative")

    @property
    def pitch(self) -> float:
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else float("nan")

    @classmethod
    def from_functions(cls, x, y, E_VS, delta_g=6.58e-4, v=0.08) -> "ValleyLandscape":
        """Deterministic landscape from callables ``f(X, Y)`` or constants."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        X, Y = np.meshgrid(x, y, indexing="ij")

        def ev(f):
            return np.broadcast_to(f(X, Y) if callable(f) else f, X.shape).astype(float).copy()

        return cls(x, y, ev(E_VS), ev(delta_g), ev(v))

    def contains(self, x, y) -> bool:
        x = np.asarray(x)
        y = np.asarray(y)
        tol = 1e-9
        return bool(np.all((x >= self.x[0] - tol) & (x <= self.x[-1] + tol)
                           & (y >= self.y[0] - tol) & (y <= self.y[-1] + tol)))

    def _interp(self, grid, x, y):
        gx, gy = self.x, self.y
        if len(gx) > 1:
            fx = np.clip((x - gx[0]) / (gx[1] - gx[0]), 0, len(gx) - 1)
            ix = np.minimum(np.floor(fx).astype(int), len(gx) - 2)
            tx = fx - ix
        else:
            ix = np.zeros(np.shape(x), dtype=int)
            tx = np.zeros(np.shape(x))
        if len(gy) > 1:
            fy = np.clip((y - gy[0]) / (gy[1] - gy[0]), 0, len(gy) - 1)
            iy = np.minimum(np.floor(fy).astype(int), len(gy) - 2)
            ty = fy - iy
        else:
            iy = np.zeros(np.shape(y), dtype=int)
            ty = np.zeros(np.shape(y))
        ix1 = np.minimum(ix + 1, len(gx) - 1)
        iy1 = np.minimum(iy + 1, len(gy) - 1)
        return ((1 - tx) * (1 - ty) * grid[ix, iy] + tx * (1 - ty) * grid[ix1, iy]
                + (1 - tx) * ty * grid[ix, iy1] + tx * ty * grid[ix1, iy1])

    def sample_at(self, x, y):
        """Bilinear interpolation of ``(E_VS, delta_g, v)`` at ``(x, y)``."""
        x_arr, y_arr = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if not self.contains(x_arr, y_arr):
            raise ValueError("coordinates outside the landscape extents")
        out = tuple(self._interp(g, x_arr, y_arr)
                    for g in (self.E_VS_grid, self.delta_g_grid, self.v_grid))
        if x_arr.ndim == 0:
            return tuple(float(o) for o in out)
        return out


def synthesize_landscape(spec: LandscapeSpec, seed: int) -> ValleyLandscape:
    """Rician valley-splitting landscape with correlated g-factor difference.

    Three independent correlated normal fields are drawn from one generator
    seeded with ``seed``: two form the complex valley coupling whose
    magnitude is E_VS, the third perturbs delta_g.
    """
    rng = np.random.default_rng(seed)
    args = (spec.x_extent, spec.y_extent, spec.pitch, spec.correlation)
    X = synthesize_gaussian_field(*args, rng=rng)
    Y = synthesize_gaussian_field(*args, rng=rng)
    Z = synthesize_gaussian_field(*args, rng=rng)
    E = rician_field(X, Y, spec.rician)
    dg = spec.delta_g_mean + spec.delta_g_spread * Z
    v = np.full_like(E, spec.v_mean)
    x = grid_axis(spec.x_extent, spec.pitch, spec.x_origin)
    y = grid_axis(spec.y_extent, spec.pitch, spec.y_origin)
    return ValleyLandscape(x, y, E, dg, v, seed, spec)


FIELDS = {"E_VS": "E_VS_grid", "delta_g": "delta_g_grid", "v": "v_grid"}


def save_landscape(landscape: ValleyLandscape, directory) -> dict[str, Path]:
    """Write one long-format CSV per field plus a JSON sidecar."""
    from .io import write_csv, write_json

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    X, Y = np.meshgrid(landscape.x, landscape.y, indexing="ij")
    paths = {}
    for name, attr in FIELDS.items():
        p = directory / f"landscape_{name}.csv"
        write_csv(p, ["x_nm", "y_nm", "value"],
                  zip(X.ravel(), Y.ravel(), getattr(landscape, attr).ravel()))
        paths[name] = p
    side = {
        "kind": "ValleyLandscape",
        "shape": [len(landscape.x), len(landscape.y)],
        "seed": landscape.seed,
        "spec": landscape.spec.to_dict() if landscape.spec else None,
        "units": {"x_nm": "nm", "y_nm": "nm", "E_VS": "ueV", "delta_g": "1", "v": "ueV"},
        "files": {k: v.name for k, v in paths.items()},
    }
    paths["sidecar"] = directory / "landscape.json"
    write_json(paths["sidecar"], side)
    return paths


def load_landscape(directory) -> ValleyLandscape:
    from .io import read_csv_columns

    directory = Path(directory)
    side = json.loads((directory / "landscape.json").read_text())
    nx, ny = side["shape"]
    grids = {}
    x = y = None
    for name, attr in FIELDS.items():
        cols = read_csv_columns(directory / side["files"][name], ["x_nm", "y_nm", "value"])
        grids[attr] = cols["value"].reshape(nx, ny)
        x = cols["x_nm"].reshape(nx, ny)[:, 0]
        y = cols["y_nm"].reshape(nx, ny)[0, :]
    spec = LandscapeSpec.from_dict(side["spec"]) if side.get("spec") else None
    return ValleyLandscape(x, y, seed=side.get("seed"), spec=spec, **grids)
