"""Rician and folded-Gaussian valley-splitting distributions and their MLE fits."""
from __future__ import annotations

import math

import numpy as np

from ..fitcore import FitReport, mle_fit
from ..landscape import FoldedGaussianParams, RicianParams

# The power series of I0 has only positive terms and stays accurate to
# ~1e-16 well beyond the classical 3.75 switch; the asymptotic series only
# reaches 1e-9 relative accuracy for x above roughly 20.
BESSEL_SWITCH = 20.0
_SERIES_TERMS = 80
_ASYM_TERMS = 12


def _log_i0_series(x):
    q = (x / 2.0) ** 2
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return np.log(total)


def _log_i0_asymptotic(x):
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! 8^k x^k)
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, _ASYM_TERMS):
        term = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        total = total + term
    return x - 0.5 * np.log(2 * np.pi * x) + np.log(total)


def log_i0(x):
    """log of the modified Bessel function I0 for x >= 0."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < BESSEL_SWITCH
    out[small] = _log_i0_series(x[small])
    out[~small] = _log_i0_asymptotic(x[~small])
    return out if out.ndim else float(out)


def i0(x):
    return np.exp(log_i0(x))


def rician_logpdf(E, gamma, sigma):
    E = np.asarray(E, dtype=float)
    s2 = sigma * sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (np.log(E) - np.log(s2) - (E * E + gamma * gamma) / (2 * s2)
               + log_i0(E * gamma / s2))
    return np.where(E > 0, out, -np.inf)


def rician_pdf(E, gamma, sigma):
    return np.exp(rician_logpdf(E, gamma, sigma))


def folded_gaussian_logpdf(E, mu, sigma):
    E = np.asarray(E, dtype=float)
    a = -(E - mu) ** 2 / (2 * sigma ** 2)
    b = -(E + mu) ** 2 / (2 * sigma ** 2)
    with np.errstate(divide="ignore"):
        out = np.logaddexp(a, b) - np.log(sigma * math.sqrt(2 * math.pi))
    return np.where(E >= 0, out, -np.inf)


def folded_gaussian_pdf(E, mu, sigma):
    return np.exp(folded_gaussian_logpdf(E, mu, sigma))


def sample_rician(params: RicianParams, n: int, rng) -> np.ndarray:
    return np.hypot(params.gamma + params.sigma * rng.standard_normal(n), params.sigma * rng.standard_normal(n))


def sample_folded_gaussian(params: FoldedGaussianParams, n: int, rng) -> np.ndarray:
    return np.abs(params.mu + params.sigma_tilde * rng.standard_normal(n))


def _check(samples):
    s = np.asarray(samples, dtype=float).ravel()
    s = s[np.isfinite(s)]
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if np.any(s <= 0):
        raise ValueError("samples must be positive")
    return s


def fit_rician(samples) -> tuple[RicianParams, FitReport]:
    s = _check(samples)
    m2, m4 = np.mean(s ** 2), np.mean(s ** 4)
    # moment estimates: E[E^2] = g^2 + 2 s^2, E[E^4] = g^4 + 8 g^2 s^2 + 8 s^4
    g2 = math.sqrt(max(2 * m2 * m2 - m4, 0.0))
    s2 = max((m2 - g2) / 2, 1e-6 * m2)
    x0 = [max(math.sqrt(g2), 1e-3 * math.sqrt(m2)), math.sqrt(s2)]
    rep = mle_fit(lambda e, th: rician_logpdf(e, th[0], th[1]), s, x0,
                  lower=[0.0, 1e-9], upper=[np.inf, np.inf], names=["gamma", "sigma"])
    return RicianParams(float(rep.estimates[0]), float(rep.estimates[1])), rep


def fit_folded_gaussian(samples) -> tuple[FoldedGaussianParams, FitReport]:
    s = _check(samples)
    m1, m2 = np.mean(s), np.mean(s ** 2)
    x0 = [m1, math.sqrt(max(m2 - m1 * m1, 1e-6 * m2))]
    rep = mle_fit(lambda e, th: folded_gaussian_logpdf(e, th[0], th[1]), s, x0,
                  lower=[0.0, 1e-9], upper=[np.inf, np.inf], names=["mu", "sigma_tilde"])
    return FoldedGaussianParams(float(rep.estimates[0]), float(rep.estimates[1])), rep
