"""Damped Gauss-Newton least squares and maximum-likelihood estimation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

LAMBDA_INIT = 1e-3
LAMBDA_DOWN = 3.0
LAMBDA_UP = 2.0
NORMAL_REG = 1e-12
JAC_REL_STEP = 1e-6
STEP_TOL = 1e-12


@dataclass
class FitProblem:
    residual: Callable[[np.ndarray], np.ndarray]
    x0: Sequence[float]
    lower: Sequence[float] | None = None
    upper: Sequence[float] | None = None
    max_iter: int = 200
    tol: float = 1e-12
    absolute_sigma: bool = False
    names: Sequence[str] | None = None
    x_scale: Sequence[float] | None = None

    def __post_init__(self):
        n = len(self.x0)
        self.x0 = np.asarray(self.x0, dtype=float)
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("bounds are not ordered")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ValueError("initial parameters outside bounds")
        if self.x_scale is None:
            sc = np.abs(self.x0)
            self.x_scale = np.where(sc > 0, sc, 1.0)
        else:
            self.x_scale = np.asarray(self.x_scale, dtype=float)


@dataclass
class FitReport:
    estimates: np.ndarray
    uncertainties: np.ndarray
    cost: float
    iterations: int
    converged: bool
    names: list[str] | None = None
    cost_history: list[float] = field(default_factory=list)
    covariance: np.ndarray | None = None
    message: str = ""
    flags: dict = field(default_factory=dict)

    def __getitem__(self, key):
        i = self.names.index(key)
        return self.estimates[i], self.uncertainties[i]

    def to_dict(self) -> dict:
        names = self.names or [f"p{i}" for i in range(len(self.estimates))]
        return {
            "parameters": {n: {"value": float(v), "sigma": float(s)}
                           for n, v, s in zip(names, self.estimates, self.uncertainties)},
            "cost": float(self.cost),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "message": self.message,
            "flags": {k: (v if isinstance(v, (bool, int, str)) or v is None else float(v))
                      for k, v in self.flags.items()},
        }


def numeric_jacobian(fun, x, f0=None, rel_step=JAC_REL_STEP, lower=None, upper=None):
    """Central-difference Jacobian, one-sided at active bounds."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-8) if x[i] != 0 else rel_step
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        if upper is not None and xp[i] > upper[i]:
            xp[i] = x[i]
        if lower is not None and xm[i] < lower[i]:
            xm[i] = x[i]
        fp = fun(xp) if xp[i] != x[i] else (f0 if f0 is not None else fun(x))
        fm = fun(xm) if xm[i] != x[i] else (f0 if f0 is not None else fun(x))
        cols.append((np.asarray(fp) - np.asarray(fm)) / (xp[i] - xm[i]))
    return np.column_stack(cols)


def least_squares(problem: FitProblem) -> FitReport:
    """Levenberg-damped Gauss-Newton with bound projection.

    Works in parameters scaled by ``problem.x_scale``; the damping adds
    ``lam * I`` to the scaled normal matrix. Accepted steps divide ``lam`` by 3,
    rejected steps double it.
    """
    sc = problem.x_scale
    lo, hi = problem.lower / sc, problem.upper / sc

    def fun(u):
        return np.asarray(problem.residual(u * sc), dtype=float)

    u = problem.x0 / sc
    r = fun(u)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals not finite at initial parameters")
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = LAMBDA_INIT
    converged = False
    message = "iteration budget exhausted"
    it = 0
    J = numeric_jacobian(fun, u, r, lower=lo, upper=hi)
    while it < problem.max_iter:
        it += 1
        if cost == 0.0:
            converged, message = True, "zero cost"
            break
        JTJ = J.T @ J
        g = J.T @ r
        accepted = False
        while lam < 1e16:
            A = JTJ + (lam + NORMAL_REG) * np.eye(u.size)
            try:
                step = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(A, g, rcond=None)[0]
            u_new = np.clip(u + step, lo, hi)
            r_new = fun(u_new)
            cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        lam = max(lam / LAMBDA_DOWN, 1e-15)
        du = u_new - u
        rel_decrease = (cost - cost_new) / cost
        u, r, cost = u_new, r_new, cost_new
        history.append(cost)
        if cost == 0.0 or rel_decrease < problem.tol:
            converged, message = True, "relative cost decrease below tolerance"
            u, r, cost = _polish(fun, u, r, cost, lo, hi)
            history.append(cost)
            break
        if np.linalg.norm(du * sc) < STEP_TOL * max(1.0, np.linalg.norm(u * sc)):
            converged, message = True, "step norm below tolerance"
            break
        J = numeric_jacobian(fun, u, r, lower=lo, upper=hi)

    # covariance in scaled coordinates keeps the regularizer negligible
    J = numeric_jacobian(fun, u, r, lower=lo, upper=hi)
    cov = _covariance(J, r, absolute_sigma=problem.absolute_sigma) * np.outer(sc, sc)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    names = list(problem.names) if problem.names is not None else None
    return FitReport(u * sc, sig, cost, it, converged, names, history, cov, message)


def _polish(fun, u, r, cost, lo, hi):
    """One undamped Gauss-Newton step, kept only if it does not raise the cost.

    Near the optimum the relative cost decrease hits floating-point limits
    before the damped iterates settle; a final plain step removes that lag.
    """
    J = numeric_jacobian(fun, u, r, lower=lo, upper=hi)
    A = J.T @ J + NORMAL_REG * np.eye(u.size)
    try:
        step = -np.linalg.solve(A, J.T @ r)
    except np.linalg.LinAlgError:
        return u, r, cost
    u_new = np.clip(u + step, lo, hi)
    r_new = fun(u_new)
    # allow for rounding in the cost of an already optimal point
    if np.all(np.isfinite(r_new)) and 0.5 * float(r_new @ r_new) <= cost * (1 + 1e-12):
        return u_new, r_new, 0.5 * float(r_new @ r_new)
    return u, r, cost


def _covariance(J, r, absolute_sigma=False):
    m, n = J.shape
    JTJ = J.T @ J + NORMAL_REG * np.eye(n)
    try:
        cov = np.linalg.inv(JTJ)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(JTJ)
    if not absolute_sigma:
        dof = max(m - n, 1)
        cov = cov * float(r @ r) / dof
    return cov


def _grad_hess(f, x, lo, hi, rel_step=1e-4):
    n = x.size
    h = rel_step * np.maximum(np.abs(x), 1e-3)
    # keep the stencil inside the bounds
    xc = np.clip(x, lo + h, hi - h)
    xc = np.where(lo + h > hi - h, x, xc)
    f0 = f(xc)
    g = np.zeros(n)
    H = np.zeros((n, n))
    fp = np.zeros(n)
    fm = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h[i]
        fp[i], fm[i] = f(xc + e), f(xc - e)
        g[i] = (fp[i] - fm[i]) / (2 * h[i])
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h[i] ** 2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i], ej[j] = h[i], h[j]
            fpp = f(xc + ei + ej)
            fmm = f(xc - ei - ej)
            fpm = f(xc + ei - ej)
            fmp = f(xc - ei + ej)
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h[i] * h[j])
    # first-order shift of the gradient back to x
    g = g + H @ (x - xc)
    return g, H


def mle_fit(log_density: Callable, samples, x0, lower=None, upper=None,
            max_iter: int = 200, tol: float = 1e-12, names=None) -> FitReport:
    """Maximum-likelihood fit by damped Newton iterations on the negative
    log-likelihood; uncertainties from the inverse observed information.

    ``log_density(samples, theta)`` returns per-sample log densities and must
    be ``-inf`` (or raise) outside the support.
    """
    samples = np.asarray(samples, dtype=float)
    x = np.asarray(x0, dtype=float)
    n = x.size
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("initial parameters outside bounds")

    def nll(theta):
        v = -np.sum(log_density(samples, theta))
        return v if np.isfinite(v) else np.inf

    f = nll(x)
    if not np.isfinite(f):
        raise ValueError("samples outside the support of the density")
    history = [f]
    lam = LAMBDA_INIT
    converged = False
    message = "iteration budget exhausted"
    it = 0
    while it < max_iter:
        it += 1
        g, H = _grad_hess(nll, x, lo, hi)
        diag = np.abs(np.diag(H)).copy()
        diag[diag == 0] = 1.0
        # zero gradient components pushing into an active bound
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        accepted = False
        while lam < 1e16:
            A = H + lam * np.diag(diag) + NORMAL_REG * np.eye(n)
            step = np.zeros(n)
            if np.any(free):
                Af = A[np.ix_(free, free)]
                try:
                    sf = -np.linalg.solve(Af, g[free])
                except np.linalg.LinAlgError:
                    sf = -np.linalg.lstsq(Af, g[free], rcond=None)[0]
                # fall back to scaled gradient descent when not a descent direction
                if sf @ g[free] >= 0:
                    sf = -g[free] / (lam * diag[free] + 1e-300)
                step[free] = sf
            x_new = np.clip(x + step, lo, hi)
            f_new = nll(x_new)
            if f_new < f:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        lam = max(lam / LAMBDA_DOWN, 1e-15)
        dx = x_new - x
        rel = (f - f_new) / max(abs(f), 1e-300)
        x, f = x_new, f_new
        history.append(f)
        # a small decrease only signals convergence for a nearly undamped Newton step
        if rel < tol and lam <= LAMBDA_INIT:
            converged, message = True, "relative objective decrease below tolerance"
            break
        if np.linalg.norm(dx) < STEP_TOL * max(1.0, np.linalg.norm(x)):
            converged, message = True, "step norm below tolerance"
            break

    _, H = _grad_hess(nll, x, lo, hi)
    try:
        cov = np.linalg.inv(H + NORMAL_REG * np.eye(n))
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(H)
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitReport(x, sig, f, it, converged, list(names) if names else None, history, cov, message)
