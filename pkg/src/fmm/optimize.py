"""Numeric kernels for FMM fitting.

Grid search over (alpha, omega), a Nelder-Mead polish, the linearized
least-squares problem solved at fixed (alpha, omega), and the
nonnegative-amplitude joint fit used to finish backfitting.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _sciopt

from .core import TWO_PI, wrap_angle
from .errors import ConfigError, DegenerateDesignError

OMEGA_FLOOR = 1e-3

# relative threshold on 1 - corr(z, w)^2 and on column variance
_DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Rectangular (alpha, omega) grid.

    `alpha_range` is half-open when it spans a full turn and closed
    otherwise (refinement windows). A single omega value is allowed when
    `omega_range` is degenerate, i.e. omega is held fixed.
    """

    alpha_count: int = 48
    omega_count: int = 24
    alpha_range: tuple[float, float] = (0.0, TWO_PI)
    omega_range: tuple[float, float] = (OMEGA_FLOOR, 1.0)

    def __post_init__(self):
        lo, hi = self.omega_range
        if lo < OMEGA_FLOOR - 1e-15 or hi > 1.0 or lo > hi:
            raise ConfigError(f"omega range {self.omega_range} outside [{OMEGA_FLOOR}, 1]")
        if self.alpha_count < 2:
            raise ConfigError("alpha grid needs at least 2 points")
        if self.omega_count < 2 and not (self.omega_count == 1 and lo == hi):
            raise ConfigError("omega grid needs at least 2 points")

    @property
    def full_turn(self) -> bool:
        a0, a1 = self.alpha_range
        return np.isclose(a1 - a0, TWO_PI)

    def alpha_values(self) -> np.ndarray:
        a0, a1 = self.alpha_range
        return np.linspace(a0, a1, self.alpha_count, endpoint=not self.full_turn)

    def omega_values(self) -> np.ndarray:
        lo, hi = self.omega_range
        if self.omega_count == 1:
            return np.array([lo])
        return np.linspace(lo, hi, self.omega_count)

    @property
    def alpha_step(self) -> float:
        a = self.alpha_values()
        return float(a[1] - a[0])

    @property
    def omega_step(self) -> float:
        w = self.omega_values()
        return float(w[1] - w[0]) if w.size > 1 else 0.0

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (alpha, omega) arrays, omega-major."""
        om, al = np.meshgrid(self.omega_values(), self.alpha_values(), indexing="ij")
        return al.ravel(), om.ravel()

    def refined(self, alpha: float, omega: float) -> "GridSpec":
        """Same-size grid spanning one current step either side of a point."""
        da = self.alpha_step
        a_range = (alpha - da, alpha + da)
        if self.omega_count == 1:
            return GridSpec(self.alpha_count, 1, a_range, self.omega_range)
        dw = self.omega_step
        lo = max(OMEGA_FLOOR, omega - dw)
        hi = min(1.0, omega + dw)
        return GridSpec(self.alpha_count, self.omega_count, a_range, (lo, hi))


@dataclass(frozen=True)
class SimplexConfig:
    max_evals: int = 200
    rel_tol: float = 1e-8
    initial_step: tuple[float, ...] = (TWO_PI / 48, (1.0 - OMEGA_FLOOR) / 23)

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ConfigError("rel_tol must be positive")
        if self.max_evals < 1:
            raise ConfigError("max_evals must be positive")


@dataclass(frozen=True)
class SimplexResult:
    x: tuple[float, ...]
    fun: float
    n_evals: int
    exhausted: bool


def grid_minimize(objective: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  spec: GridSpec, parallel: bool = False,
                  n_workers: int = 4) -> tuple[float, float, float]:
    """Minimise a vectorised objective over every grid cell.

    `objective(alpha, omega)` receives equal-length 1-D arrays and returns
    an array of RSS values; NaN counts as +inf. Ties go to the smaller
    omega, then the smaller alpha, so the result does not depend on the
    order or chunking of the evaluation.
    """
    alpha, omega = spec.cells()
    if parallel and alpha.size > 1:
        chunks = np.array_split(np.arange(alpha.size), n_workers)
        chunks = [c for c in chunks if c.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda c: np.asarray(objective(alpha[c], omega[c]), float),
                                  chunks))
        rss = np.concatenate(parts)
    else:
        rss = np.asarray(objective(alpha, omega), dtype=float)
    rss = np.where(np.isnan(rss), np.inf, rss)
    best = np.lexsort((alpha, omega, rss))[0]
    return float(alpha[best]), float(omega[best]), float(rss[best])


def simplex(fun: Callable[[np.ndarray], float], x0: Sequence[float],
            steps: Sequence[float], cfg: SimplexConfig) -> SimplexResult:
    """Nelder-Mead from `x0` with an axis-aligned initial simplex.

    Never returns a point worse than `x0`.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = float(fun(x0))
    sim = [x0]
    for i, s in enumerate(steps):
        v = x0.copy()
        v[i] += s if s > 0 else 1e-3
        sim.append(v)
    # fatol is absolute in scipy; scale by the start value
    fatol = cfg.rel_tol * max(abs(f0), 1e-300)
    res = _sciopt.minimize(fun, x0, method="Nelder-Mead",
                           options={"initial_simplex": np.array(sim),
                                    "maxfev": cfg.max_evals,
                                    "fatol": fatol,
                                    "xatol": np.inf})
    exhausted = res.status == 1 or res.nfev >= cfg.max_evals
    if not np.isfinite(res.fun) or res.fun > f0:
        return SimplexResult(tuple(x0), f0, int(res.nfev) + 1, exhausted)
    return SimplexResult(tuple(np.asarray(res.x, float)), float(res.fun),
                         int(res.nfev) + 1, exhausted)


def nelder_mead(objective: Callable[[float, float], float], start: tuple[float, float],
                cfg: SimplexConfig | None = None) -> tuple[float, float, float]:
    """Polish an (alpha, omega) estimate.

    alpha is periodic and wrapped on return; omega outside
    [OMEGA_FLOOR, 1] scores +inf.
    """
    cfg = cfg or SimplexConfig()

    def penalised(x):
        a, w = x
        if not OMEGA_FLOOR <= w <= 1.0:
            return np.inf
        return float(objective(wrap_angle(a), w))

    res = simplex(penalised, start, cfg.initial_step[:2], cfg)
    a, w = res.x
    return wrap_angle(a), float(w), res.fun


def linearized_ls_batch(X: np.ndarray, z: np.ndarray, w: np.ndarray):
    """Row-wise OLS of X on [1, z, w].

    `z` and `w` have shape (k, n); `X` has shape (n,). Returns arrays
    (M, delta, gamma, rss) of shape (k,); degenerate rows get NaN
    coefficients and rss = +inf.
    """
    z = np.atleast_2d(z)
    w = np.atleast_2d(w)
    n = X.shape[0]
    xbar = X.sum() / n
    zbar = z.sum(axis=1) / n
    wbar = w.sum(axis=1) / n
    xc = X - xbar
    zc = z - zbar[:, None]
    wc = w - wbar[:, None]
    # elementwise products + row sums keep each row independent of batch size
    szz = (zc * zc).sum(axis=1)
    sww = (wc * wc).sum(axis=1)
    szw = (zc * wc).sum(axis=1)
    sxz = (zc * xc).sum(axis=1)
    sxw = (wc * xc).sum(axis=1)
    det = szz * sww - szw * szw
    scale = max(n, 1)
    ok = ((szz > _DEGENERACY_TOL * scale) & (sww > _DEGENERACY_TOL * scale)
          & (det > _DEGENERACY_TOL * szz * sww))
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(ok, (sxz * sww - sxw * szw) / det, np.nan)
        gamma = np.where(ok, (sxw * szz - sxz * szw) / det, np.nan)
    resid = xc[None, :] - delta[:, None] * zc - gamma[:, None] * wc
    rss = np.where(ok, (resid * resid).sum(axis=1), np.inf)
    M = xbar - delta * zbar - gamma * wbar
    return M, delta, gamma, rss


def linearized_ls(X, z, w) -> tuple[float, float, float, float]:
    """OLS fit ``X ~ M + delta*z + gamma*w``; returns (M, delta, gamma, RSS)."""
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if X.ndim != 1 or X.shape != z.shape or X.shape != w.shape:
        raise ConfigError("X, z and w must be vectors of equal length")
    if X.size < 3:
        raise ConfigError("need at least 3 observations")
    M, d, g, rss = linearized_ls_batch(X, z[None, :], w[None, :])
    if not np.isfinite(rss[0]):
        raise DegenerateDesignError("design [1, z, w] is rank deficient")
    return float(M[0]), float(d[0]), float(g[0]), float(rss[0])


def recover_wave(M: float, delta: float, gamma: float, alpha: float,
                 omega: float) -> tuple[float, float, float]:
    """Map linear coefficients back to (M, A, beta).

    delta = A*cos(phi), gamma = -A*sin(phi), beta = alpha + phi.
    """
    A = float(np.hypot(delta, gamma))
    phi = np.arctan2(-gamma, delta)
    return float(M), A, wrap_angle(alpha + phi)


def nonneg_joint_ls(X, Phi) -> tuple[float, np.ndarray, float]:
    """Minimise ||X - M - Phi @ A||^2 with A >= 0 and M free.

    The intercept is profiled out by centering, leaving a plain NNLS
    problem in A. Returns (M, A, RSS).
    """
    X = np.asarray(X, dtype=float)
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    n, m = Phi.shape
    if X.shape != (n,):
        raise ConfigError("X and Phi row counts differ")
    if n <= m + 1:
        raise ConfigError(f"need more than {m + 1} observations, got {n}")
    design = np.column_stack([np.ones(n), Phi])
    if np.linalg.matrix_rank(design) < m + 1:
        raise DegenerateDesignError("joint amplitude design is rank deficient")
    xbar = X.mean()
    pbar = Phi.mean(axis=0)
    A, _ = _sciopt.nnls(Phi - pbar, X - xbar)
    M = float(xbar - pbar @ A)
    r = X - M - Phi @ A
    return M, A, float(r @ r)
