"""Fitting pipelines: single wave, backfitting, and shape-restricted fits."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import (FmmModel, PeakReport, WaveParams, mobius_phase, peak_report,
                   wave_value, wrap_angle)
from .errors import (ConfigError, DegenerateDesignError, FitFailedError,
                     UndefinedMeanError, UndefinedVarianceError)
from .optimize import (_DEGENERACY_TOL, OMEGA_FLOOR, GridSpec, SimplexConfig, grid_minimize,
                       linearized_ls_batch, nonneg_joint_ls, recover_wave, simplex)
from .series import TimeSeries

log = logging.getLogger(__name__)

STOP_MAXITER = "maxiter"
STOP_RULE = "stop-rule"


@dataclass(frozen=True)
class FitConfig:
    """Knobs for every fitting pipeline.

    `dif_max=None` is the always-false stop rule (run `maxiter` passes);
    a positive value stops once a pass gains no more than `dif_max` R^2.
    Block labels default to ``1..nback`` (no restriction).
    """

    nback: int = 1
    length_alpha_grid: int = 48
    length_omega_grid: int = 24
    num_reps: int = 3
    maxiter: int | None = None
    dif_max: float | None = None
    beta_blocks: tuple[int, ...] | None = None
    omega_blocks: tuple[int, ...] | None = None
    parallelize: bool = False
    simplex: SimplexConfig | None = None

    def __post_init__(self):
        if self.nback < 1:
            raise ConfigError(f"nback must be at least 1, got {self.nback}")
        if self.length_alpha_grid < 2 or self.length_omega_grid < 2:
            raise ConfigError("grid lengths must be at least 2")
        if self.num_reps < 1:
            raise ConfigError("num_reps must be at least 1")
        if self.maxiter is not None and self.maxiter < 1:
            raise ConfigError("maxiter must be at least 1")
        if self.dif_max is not None and not self.dif_max > 0:
            raise ConfigError("dif_max must be positive")
        for name in ("beta_blocks", "omega_blocks"):
            labels = getattr(self, name)
            if labels is None:
                continue
            labels = tuple(int(x) for x in labels)
            if len(labels) != self.nback:
                raise ConfigError(f"{name} must have {self.nback} labels, got {len(labels)}")
            if min(labels) < 1:
                raise ConfigError(f"{name} labels must be positive integers")
            object.__setattr__(self, name, labels)

    @property
    def iterations(self) -> int:
        return self.maxiter if self.maxiter is not None else self.nback

    @property
    def simplex_config(self) -> SimplexConfig:
        return self.simplex or SimplexConfig(initial_step=(
            2 * np.pi / self.length_alpha_grid,
            (1.0 - OMEGA_FLOOR) / (self.length_omega_grid - 1)))

    def beta_groups(self) -> list[list[int]]:
        return _groups(self.beta_blocks, self.nback)

    def omega_groups(self) -> list[list[int]]:
        return _groups(self.omega_blocks, self.nback)

    @property
    def restricted(self) -> bool:
        return (any(len(g) > 1 for g in self.beta_groups())
                or any(len(g) > 1 for g in self.omega_groups()))


def _groups(labels, m) -> list[list[int]]:
    if labels is None:
        return [[j] for j in range(m)]
    out: dict[int, list[int]] = {}
    for j, lab in enumerate(labels):
        out.setdefault(lab, []).append(j)
    return list(out.values())


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of a fit. Arrays are aligned with `time_points`."""

    model: FmmModel
    time_points: np.ndarray
    data: np.ndarray
    fitted_values: np.ndarray
    residuals: np.ndarray
    sse: float
    r2_per_wave: tuple[float, ...]
    r2_total: float
    n_iter: int
    peaks: PeakReport
    # run metadata, not part of the serialized result
    stop_reason: str = field(default=STOP_MAXITER, compare=False)
    stats: dict = field(default_factory=dict, compare=False)

    def __eq__(self, other):
        if not isinstance(other, FitResult):
            return NotImplemented
        return (self.model == other.model and self.peaks == other.peaks
                and self.sse == other.sse and self.r2_total == other.r2_total
                and self.r2_per_wave == other.r2_per_wave and self.n_iter == other.n_iter
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("time_points", "data", "fitted_values", "residuals")))

    __hash__ = None

    @property
    def components(self) -> np.ndarray:
        """Per-wave contributions (no intercept), shape (m, n)."""
        return self.model.components(self.time_points)


class _Stats:
    def __init__(self):
        self.grid_evaluations = 0
        self.simplex_evaluations = 0
        self._lock = threading.Lock()

    def add(self, grid=0, simplex=0):
        with self._lock:
            self.grid_evaluations += grid
            self.simplex_evaluations += simplex

    def as_dict(self):
        return {"grid_evaluations": self.grid_evaluations,
                "simplex_evaluations": self.simplex_evaluations}


# ---------------------------------------------------------------- R^2

def r_squared(data, fitted) -> float:
    """Proportion of variance explained: ``1 - SSE / TSS``."""
    data = np.asarray(data, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if data.shape != fitted.shape or data.ndim != 1 or data.size < 2:
        raise ConfigError("data and fitted must be equal-length vectors with n >= 2")
    dev = data - data.mean()
    tss = float(dev @ dev)
    if tss <= 0.0:
        raise UndefinedVarianceError("data are constant; R^2 is undefined")
    r = data - fitted
    return 1.0 - float(r @ r) / tss


def _cumulative_r2(X, comps, subset) -> float:
    # intercept refit: center the kept components against centered data
    xc = X - X.mean()
    fit = np.zeros_like(X)
    for j in subset:
        fit = fit + comps[j] - comps[j].mean()
    r = xc - fit
    return 1.0 - float(r @ r) / float(xc @ xc)


def _greedy_attribution(X, comps) -> tuple[list[int], list[float]]:
    m = comps.shape[0]
    order: list[int] = []
    gains: list[float] = []
    current = 0.0
    remaining = list(range(m))
    while remaining:
        scores = [_cumulative_r2(X, comps, order + [j]) for j in remaining]
        k = int(np.argmax(scores))
        order.append(remaining.pop(k))
        gains.append(scores[k] - current)
        current = scores[k]
    return order, gains


def attribute_wave_r2(data: TimeSeries, model: FmmModel) -> np.ndarray:
    """Per-wave share of explained variance, aligned with `model.waves`.

    Waves are added greedily, most explanatory first; each wave is
    credited with the gain in cumulative R^2 (intercept refit) it brings
    when added. The gains sum to the R^2 of the full model with an
    optimal intercept.
    """
    X = data.values
    comps = model.components(data.time_points)
    order, gains = _greedy_attribution(X, comps)
    out = np.empty(model.m)
    out[order] = gains
    return out


# ---------------------------------------------------------------- single wave

def _phase_design(t, alpha, omega):
    h = 0.5 * (t[None, :] - alpha[:, None])
    tstar = alpha[:, None] + 2.0 * np.arctan2(omega[:, None] * np.sin(h), np.cos(h))
    return np.cos(tstar), np.sin(tstar)


def _rss(t, X):
    def objective(alpha, omega):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        omega = np.broadcast_to(np.asarray(omega, dtype=float), alpha.shape)
        z, w = _phase_design(t, alpha, omega)
        return linearized_ls_batch(X, z, w)[3]
    return objective


def _rss_point(t, X):
    """Scalar version of `_rss` for the simplex: same algebra, far less
    array overhead per call."""
    n = X.size
    xc = X - X.sum() / n
    tol = _DEGENERACY_TOL * n

    def objective(alpha, omega):
        h = 0.5 * (t - alpha)
        tstar = alpha + 2.0 * np.arctan2(omega * np.sin(h), np.cos(h))
        z, w = np.cos(tstar), np.sin(tstar)
        zc = z - z.sum() / n
        wc = w - w.sum() / n
        szz, sww, szw = zc @ zc, wc @ wc, zc @ wc
        det = szz * sww - szw * szw
        if not (szz > tol and sww > tol and det > _DEGENERACY_TOL * szz * sww):
            return np.inf
        sxz, sxw = zc @ xc, wc @ xc
        r = xc - ((sxz * sww - sxw * szw) / det) * zc - ((sxw * szz - sxz * szw) / det) * wc
        return float(r @ r)
    return objective


def _fit_wave(t, X, cfg: FitConfig, stats: _Stats, omega_fixed=None, seed=None):
    """Grid search + refinement + Nelder-Mead for one wave.

    `seed` is a previous (alpha, omega) kept when it beats the grid, which
    makes each backfitting update non-worsening.
    Returns (M, WaveParams, rss).
    """
    objective = _rss(t, X)
    if omega_fixed is None:
        spec = GridSpec(cfg.length_alpha_grid, cfg.length_omega_grid)
    else:
        omega_fixed = float(np.clip(omega_fixed, OMEGA_FLOOR, 1.0))
        spec = GridSpec(cfg.length_alpha_grid, 1, omega_range=(omega_fixed, omega_fixed))
    a, w, rss = grid_minimize(objective, spec, cfg.parallelize)
    stats.add(grid=spec.alpha_count * spec.omega_count)
    for _ in range(cfg.num_reps - 1):
        spec = spec.refined(a, w)
        a2, w2, rss2 = grid_minimize(objective, spec, cfg.parallelize)
        stats.add(grid=spec.alpha_count * spec.omega_count)
        if rss2 <= rss:
            a, w, rss = a2, w2, rss2
    if seed is not None:
        sa, sw = seed
        if omega_fixed is not None:
            sw = omega_fixed
        srss = float(objective(sa, sw)[0])
        if srss < rss:
            a, w, rss = sa, sw, srss
    if not np.isfinite(rss):
        raise FitFailedError("every grid cell gave a degenerate design")

    # base-grid steps: refined steps are too small to leave the flat omega = 1 ridge
    sc = cfg.simplex_config
    point = _rss_point(t, X)
    if omega_fixed is None:
        def fun(x):
            if not OMEGA_FLOOR <= x[1] <= 1.0:
                return np.inf
            return point(x[0], x[1])
        x0, steps = (a, w), sc.initial_step[:2]
    else:
        def fun(x):
            return point(x[0], omega_fixed)
        x0, steps = (a,), sc.initial_step[:1]
    starts = [x0]
    if omega_fixed is None and w >= 1.0:
        # at omega = 1 alpha is unidentified; also start from the best alpha
        # on the next omega row down
        below = GridSpec(cfg.length_alpha_grid, cfg.length_omega_grid).omega_values()[-2]
        row = GridSpec(cfg.length_alpha_grid, 1, omega_range=(below, below))
        ra, rw, rr = grid_minimize(objective, row, cfg.parallelize)
        stats.add(grid=row.alpha_count)
        if np.isfinite(rr):
            starts.append((ra, rw))
    best = None
    for x0 in starts:
        for _ in range(2 if omega_fixed is None else 1):
            # one restart from the converged point guards against a simplex
            # collapsed on the omega = 1 ridge; 1-D searches do not need it
            res = simplex(fun, x0, steps, sc)
            stats.add(simplex=res.n_evals)
            x0 = res.x
        if best is None or res.fun < best.fun:
            best = res
    x0 = best.x
    a = x0[0]
    if omega_fixed is None:
        w = x0[1]
    a = wrap_angle(a)

    z, ww = _phase_design(t, np.array([a]), np.array([w]))
    M, d, g, r = linearized_ls_batch(X, z, ww)
    if not np.isfinite(r[0]):
        raise FitFailedError("degenerate design at the optimum")
    M, A, beta = recover_wave(M[0], d[0], g[0], a, w)
    return M, WaveParams(A, a, beta, w), float(r[0])


def _result(ts: TimeSeries, M: float, waves: Sequence[WaveParams], n_iter: int,
            stop_reason: str, stats: _Stats) -> FitResult:
    """Order waves by explained variance and assemble a FitResult."""
    model = FmmModel(M, tuple(waves))
    X = ts.values
    comps = model.components(ts.time_points)
    order, gains = _greedy_attribution(X, comps)
    # stable sort of the greedy order by decreasing gain
    ranked = sorted(range(len(order)), key=lambda i: -gains[i])
    order = [order[i] for i in ranked]
    gains = [gains[i] for i in ranked]
    model = FmmModel(M, tuple(waves[j] for j in order))
    fitted = model_fitted = M + comps[order].sum(axis=0)
    resid = X - model_fitted
    sse = float(resid @ resid)
    return FitResult(
        model=model,
        time_points=ts.time_points,
        data=X,
        fitted_values=fitted,
        residuals=resid,
        sse=sse,
        r2_per_wave=tuple(float(g) for g in gains),
        r2_total=r_squared(X, fitted),
        n_iter=n_iter,
        peaks=peak_report(model),
        stop_reason=stop_reason,
        stats=stats.as_dict(),
    )


def _check_data(ts: TimeSeries, nback: int):
    n = len(ts)
    if n < 4 * nback + 1:
        raise ConfigError(f"{n} observations are too few for {nback} wave(s); "
                          f"need at least {4 * nback + 1}")
    if np.ptp(ts.values) == 0:
        raise UndefinedVarianceError("data are constant; nothing to fit")


def fit_mono(data: TimeSeries, cfg: FitConfig | None = None,
             omega_fixed: float | None = None) -> FitResult:
    """Fit a single FMM wave plus intercept."""
    cfg = replace(cfg, nback=1, beta_blocks=None, omega_blocks=None) if cfg else FitConfig()
    _check_data(data, 1)
    stats = _Stats()
    M, wave, _ = _fit_wave(data.time_points, data.values, cfg, stats, omega_fixed)
    return _result(data, M, [wave], 1, STOP_MAXITER, stats)


# ---------------------------------------------------------------- backfitting

@dataclass
class BackfitState:
    """Per-wave fits before the joint amplitude finish.

    `components[j]` holds wave j's fitted values including that fit's own
    intercept, so ``components.sum(0)`` is the current model.
    """

    waves: list
    intercepts: np.ndarray
    components: np.ndarray
    r2_history: list = field(default_factory=list)
    n_iter: int = 0
    stop_reason: str = STOP_MAXITER

    @property
    def fitted(self) -> np.ndarray:
        return self.components.sum(axis=0)


def _update_wave(state: BackfitState, j: int, t, X, cfg, stats, omega_fixed=None):
    r = X - (state.fitted - state.components[j])
    old = state.waves[j]
    seed = (old.alpha, old.omega) if old is not None else None
    M, wave, _ = _fit_wave(t, r, cfg, stats, omega_fixed, seed)
    state.waves[j] = wave
    state.intercepts[j] = M
    state.components[j] = M + wave_value(t, wave)


def _fit_shared_omega(state: BackfitState, block: list[int], t, X, cfg: FitConfig,
                      stats: _Stats):
    """Search one omega shared by a block of waves.

    Each candidate omega backfits the block's waves (in order) with omega
    fixed and is scored by total RSS. Grid, refinement and a 1-D simplex
    mirror the single-wave schedule.
    """
    def trial(omega):
        trial_state = BackfitState(list(state.waves), state.intercepts.copy(),
                                   state.components.copy())
        for j in block:
            _update_wave(trial_state, j, t, X, cfg, stats, omega_fixed=omega)
        r = X - trial_state.fitted
        return float(r @ r), trial_state

    def score_all(omegas):
        if cfg.parallelize and len(omegas) > 1:
            with ThreadPoolExecutor(max_workers=4) as pool:
                return list(pool.map(trial, omegas))
        return [trial(o) for o in omegas]

    def best_of(omegas, trials):
        rss = np.array([tr[0] for tr in trials])
        k = np.lexsort((omegas, rss))[0]
        return float(omegas[k]), trials[k]

    omegas = np.linspace(OMEGA_FLOOR, 1.0, cfg.length_omega_grid)
    w_best, best = best_of(omegas, score_all(omegas))
    step = omegas[1] - omegas[0]
    for _ in range(cfg.num_reps - 1):
        omegas = np.linspace(max(OMEGA_FLOOR, w_best - step), min(1.0, w_best + step),
                             cfg.length_omega_grid)
        step = omegas[1] - omegas[0]
        w2, cand = best_of(omegas, score_all(omegas))
        if cand[0] <= best[0]:
            w_best, best = w2, cand

    cache = {}

    def fun(x):
        w = float(x[0])
        if not OMEGA_FLOOR <= w <= 1.0:
            return np.inf
        if w not in cache:
            cache[w] = trial(w)
        return cache[w][0]

    res = simplex(fun, (w_best,), (step,), cfg.simplex_config)
    stats.add(simplex=res.n_evals)
    w_nm = float(res.x[0])
    if w_nm != w_best and w_nm in cache and cache[w_nm][0] < best[0]:
        best = cache[w_nm]

    current = X - state.fitted
    if all(state.waves[j] is not None for j in block) and float(current @ current) <= best[0]:
        return
    new = best[1]
    for j in block:
        state.waves[j] = new.waves[j]
        state.intercepts[j] = new.intercepts[j]
        state.components[j] = new.components[j]


def backfit(data: TimeSeries, cfg: FitConfig, stats: _Stats | None = None) -> BackfitState:
    """Backfitting passes over all waves, honoring omega blocks.

    Wave j in pass k is fit to ``X - sum_{i<j} W_i^(k) - sum_{i>j} W_i^(k-1)``.
    Waves sharing an omega label are fitted jointly by `_fit_shared_omega`.
    """
    stats = stats or _Stats()
    t, X = data.time_points, data.values
    m = cfg.nback
    state = BackfitState([None] * m, np.zeros(m), np.zeros((m, X.size)))
    state.r2_history.append(r_squared(X, state.fitted))
    blocks = cfg.omega_groups()
    for k in range(1, cfg.iterations + 1):
        for block in blocks:
            if len(block) == 1:
                _update_wave(state, block[0], t, X, cfg, stats)
            else:
                _fit_shared_omega(state, block, t, X, cfg, stats)
        r2 = r_squared(X, state.fitted)
        state.r2_history.append(r2)
        state.n_iter = k
        log.debug("backfitting pass %d: R2 = %.6f", k, r2)
        if cfg.dif_max is not None and r2 - state.r2_history[-2] <= cfg.dif_max:
            state.stop_reason = STOP_RULE
            break
    return state


def angular_mean(angles) -> float:
    """Direction of the resultant of unit vectors, wrapped to [0, 2*pi)."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise ConfigError("angular mean of an empty list")
    s, c = np.sin(a).mean(), np.cos(a).mean()
    if np.hypot(s, c) < 1e-9:
        raise UndefinedMeanError("resultant length is zero; angular mean undefined")
    return wrap_angle(np.arctan2(s, c))


def _restrict_beta(waves: list, groups: list[list[int]]) -> list:
    out = list(waves)
    for g in groups:
        if len(g) < 2:
            continue
        try:
            b = angular_mean([waves[j].beta for j in g])
        except UndefinedMeanError as exc:
            raise FitFailedError(f"cannot pool beta over waves {g}: {exc}") from exc
        for j in g:
            out[j] = replace(waves[j], beta=b)
    return out


def _finish(data: TimeSeries, waves: list) -> tuple[float, list]:
    """Joint intercept / nonnegative-amplitude refit with phases held fixed."""
    t = data.time_points
    Phi = np.column_stack([np.cos(mobius_phase(t, w.alpha, w.beta, w.omega)) for w in waves])
    try:
        M, A, _ = nonneg_joint_ls(data.values, Phi)
    except DegenerateDesignError as exc:
        raise FitFailedError(str(exc)) from exc
    return M, [replace(w, A=float(a)) for w, a in zip(waves, A)]


def _fit_backfitting(data: TimeSeries, cfg: FitConfig) -> FitResult:
    _check_data(data, cfg.nback)
    stats = _Stats()
    state = backfit(data, cfg, stats)
    waves = _restrict_beta(state.waves, cfg.beta_groups())
    if cfg.nback == 1:
        # the joint refit of one wave is the single-wave solve again; skip it
        # so a one-wave backfit is bit-identical to fit_mono
        M = float(state.intercepts[0])
    else:
        M, waves = _finish(data, waves)
    res = _result(data, M, waves, state.n_iter, state.stop_reason, stats)
    res.stats["r2_history"] = list(state.r2_history)
    return res


def fit_multi(data: TimeSeries, cfg: FitConfig) -> FitResult:
    """Unrestricted backfitting fit of `cfg.nback` waves."""
    return _fit_backfitting(data, replace(cfg, beta_blocks=None, omega_blocks=None))


def fit_restricted(data: TimeSeries, cfg: FitConfig) -> FitResult:
    """Backfitting fit with beta / omega equality blocks.

    beta blocks are pooled by angular mean after backfitting; omega blocks
    share one omega searched outside the per-wave loops.
    """
    return _fit_backfitting(data, cfg)


def fit_fmm(data: TimeSeries, cfg: FitConfig | None = None) -> FitResult:
    """Dispatch to the single-wave, multi-wave or restricted pipeline."""
    cfg = cfg or FitConfig()
    if cfg.restricted:
        return fit_restricted(data, cfg)
    if cfg.nback == 1:
        return fit_mono(data, cfg)
    return fit_multi(data, cfg)
