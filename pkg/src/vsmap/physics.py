"""Constants, the four-level spin-valley Hamiltonian and its spectrum.

Units: energies in µeV, fields in T, times in s, frequencies in Hz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysConstants:
    mu_B: float = 57.883818060  # µeV/T
    h: float = 4.135667696e-9  # µeV s
    hbar: float = 6.582119569e-16  # eV s
    k_B: float = 86.173332621  # µeV/K
    m_e: float = 9.1093837015e-31  # kg
    e: float = 1.602176634e-19  # C
    m_t_ratio: float = 0.19


CONST = PhysConstants()

# Jacobi sweeps stop once the off-diagonal Frobenius norm falls below this
EIG_TOL = 1e-12
_MAX_SWEEPS = 30
_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class SpinValleyParams:
    """Parameters of the spin-valley model.

    ``delta_g`` sets the Zeeman difference of the antiparallel states,
    ``E_l``/``E_r`` the valley splittings and ``v_l``/``v_r`` the spin-valley
    couplings of the left (static) and right dot, in µeV.
    """

    delta_g: float
    E_l: float
    E_r: float
    v_l: float
    v_r: float
    g_base: float = 2.0

    def __post_init__(self):
        for name in ("E_l", "E_r", "v_l", "v_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.g_base <= 0:
            raise ValueError("g_base must be positive")
        if abs(self.delta_g) >= 0.1:
            raise ValueError("|delta_g| must be < 0.1")

    def as_array(self) -> np.ndarray:
        return np.array([self.delta_g, self.E_l, self.E_r, self.v_l, self.v_r])

    def replace(self, **kw) -> "SpinValleyParams":
        d = dict(self.__dict__)
        d.update(kw)
        return SpinValleyParams(**d)


TABLE1 = SpinValleyParams(delta_g=6.58e-4, E_l=66.64, E_r=53.52, v_l=0.058, v_r=0.082)


def _hamiltonian_batch(delta_g, E_l, E_r, v_l, v_r, g_base, B, const=CONST):
    """Broadcasting Hamiltonian builder; returns shape ``(..., 4, 4)``."""
    arrs = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                 for a in (delta_g, E_l, E_r, v_l, v_r, g_base, B)))
    delta_g, E_l, E_r, v_l, v_r, g_base, B = arrs
    dEz = delta_g * const.mu_B * B
    Ez = g_base * const.mu_B * B
    H = np.zeros(B.shape + (4, 4))
    H[..., 0, 0] = -dEz / 2
    H[..., 1, 1] = dEz / 2
    H[..., 2, 2] = E_r - Ez
    H[..., 3, 3] = E_l - Ez
    H[..., 0, 3] = H[..., 3, 0] = v_l
    H[..., 1, 2] = H[..., 2, 1] = v_r
    return H


def build_hamiltonian(params: SpinValleyParams, B: float) -> np.ndarray:
    """4x4 Hamiltonian in the basis {|ud+-}, |du+-}, |dd++}, |dd--}}, µeV."""
    if B < 0:
        raise ValueError("B must be non-negative")
    p = params
    return _hamiltonian_batch(p.delta_g, p.E_l, p.E_r, p.v_l, p.v_r, p.g_base, float(B))


def _jacobi(A: np.ndarray, want_vectors: bool):
    """Cyclic Jacobi rotations applied to a stack of symmetric 4x4 matrices."""
    A = np.array(A, dtype=float, copy=True)
    V = np.broadcast_to(np.eye(4), A.shape).copy() if want_vectors else None
    scale = np.maximum(np.sqrt((A ** 2).sum(axis=(-2, -1))), 1.0)
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(sum(2 * A[..., p, q] ** 2 for p, q in _PAIRS))
        if np.all(off <= 1e-15 * scale):
            break
        for p, q in _PAIRS:
            apq = A[..., p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            app, aqq = A[..., p, p], A[..., q, q]
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = np.where(active, (aqq - app) / (2 * np.where(active, apq, 1.0)), 0.0)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(theta == 0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1 / np.sqrt(t ** 2 + 1)
            s = t * c
            # A <- J^T A J with J the (p, q) plane rotation
            Ap = A[..., :, p].copy()
            Aq = A[..., :, q].copy()
            A[..., :, p] = c[..., None] * Ap - s[..., None] * Aq
            A[..., :, q] = s[..., None] * Ap + c[..., None] * Aq
            Ap = A[..., p, :].copy()
            Aq = A[..., q, :].copy()
            A[..., p, :] = c[..., None] * Ap - s[..., None] * Aq
            A[..., q, :] = s[..., None] * Ap + c[..., None] * Aq
            A[..., p, q] = np.where(active, 0.0, A[..., p, q])
            A[..., q, p] = A[..., p, q]
            if V is not None:
                Vp = V[..., :, p].copy()
                Vq = V[..., :, q].copy()
                V[..., :, p] = c[..., None] * Vp - s[..., None] * Vq
                V[..., :, q] = s[..., None] * Vp + c[..., None] * Vq
    w = np.diagonal(A, axis1=-2, axis2=-1).copy()
    order = np.argsort(w, axis=-1)
    w = np.take_along_axis(w, order, axis=-1)
    if V is not None:
        V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return w, V


def eigensystem(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a
    real symmetric 4x4 matrix, or a stack of them along leading axes."""
    H = np.asarray(H, dtype=float)
    if H.shape[-2:] != (4, 4):
        raise ValueError("expected 4x4 matrices")
    if np.any(np.abs(H - np.swapaxes(H, -1, -2)) > 1e-12):
        raise ValueError("matrix is not symmetric")
    return _jacobi(H, want_vectors=True)


def eigenvalues(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if np.any(np.abs(H - np.swapaxes(H, -1, -2)) > 1e-12):
        raise ValueError("matrix is not symmetric")
    return _jacobi(H, want_vectors=False)[0]


def _min_gap(w: np.ndarray) -> np.ndarray:
    # eigenvalues are sorted, so the smallest pairwise gap is between neighbours
    return np.min(np.diff(w, axis=-1), axis=-1)


def precession_frequency_batch(delta_g, E_l, E_r, v_l, v_r, B, g_base=2.0, const=CONST):
    """Vectorised singlet-triplet precession frequency in Hz."""
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("B must be non-negative")
    H = _hamiltonian_batch(delta_g, E_l, E_r, v_l, v_r, g_base, B, const)
    w, _ = _jacobi(H, want_vectors=False)
    return np.abs(_min_gap(w)) / const.h


def precession_frequency(params: SpinValleyParams, B):
    """Smallest transition frequency of the spin-valley spectrum, Hz.

    Accepts a scalar or an array of fields.
    """
    p = params
    nu = precession_frequency_batch(p.delta_g, p.E_l, p.E_r, p.v_l, p.v_r, B, p.g_base)
    return float(nu) if np.ndim(nu) == 0 else nu


def anticrossing_center(E_VS, g: float = 2.0, const=CONST):
    """Field of the spin-valley anticrossing for valley splitting ``E_VS``.

    The printed relation ``B = E mu_B / g`` is dimensionally inconsistent;
    ``B = E / (g mu_B)`` is used instead.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    if np.any(np.asarray(E_VS) < 0):
        raise ValueError("E_VS must be non-negative")
    return np.asarray(E_VS, dtype=float) / (g * const.mu_B) if np.ndim(E_VS) else E_VS / (g * const.mu_B)


def valley_splitting_from_field(B_VS, g: float = 2.0, const=CONST):
    return g * const.mu_B * np.asarray(B_VS, dtype=float)


def orbital_energy(a_dot_nm: float, const=CONST) -> float:
    """Harmonic-confinement orbital energy for dot size ``a_dot``, in meV."""
    hbar_J = const.hbar * const.e
    m = const.m_t_ratio * const.m_e
    E_J = hbar_J ** 2 / (m * (a_dot_nm * 1e-9) ** 2)
    return E_J / const.e * 1e3


def dot_size_from_orbital_energy(E_orb_meV: float, const=CONST) -> float:
    hbar_J = const.hbar * const.e
    m = const.m_t_ratio * const.m_e
    return hbar_J / np.sqrt(m * E_orb_meV * 1e-3 * const.e) * 1e9
