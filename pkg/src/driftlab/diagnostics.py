"""Monte Carlo diagnostics for the limit behavior of normalized functionals.

Every limit statement exercised here is a double limit (threshold to
infinity, time to infinity) and so is never literally checkable; the
diagnostics compute the finite-sample surrogates:

* tightness coverage: the fraction of replicates whose normalized statistic
  falls in a band, per threshold and checkpoint;
* ratio checks: occupation-integral ratios against their invariant-measure
  prediction;
* uniform local-time error: sup-norm distance of mean normalized local time
  from sigma^2(y) mu(y) over a spatial grid;
* kernel-window limits: normalized kernel occupation integrals against
  psi(x0) mu(x0);
* rate regression: log-log slope of an error quantile over a horizon grid.

Band conventions: statistics that are positive by construction use the
band (1/m, m); signed martingale statistics use (-m, m); scaled estimation
errors use the one-sided band [0, m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import functionals, model as model_mod, sim
from .estimate import adaptive_estimate, bandwidth_and_rate, invariant_g_mass, observable_iaf
from .parallel import replicate_map

BANDS = ("ratio", "symmetric", "upper")


@dataclass
class TightnessCurve:
    """Empirical coverage of a normalized statistic per (threshold, checkpoint)."""

    statistic_name: str
    thresholds: np.ndarray
    checkpoints: np.ndarray
    coverage: np.ndarray  # shape (len(thresholds), len(checkpoints))
    n_reps: int
    band: str


def tightness_curve(samples, thresholds, statistic_name="S", band="ratio", checkpoints=None, n_min=30):
    """Coverage curves from per-replicate, per-checkpoint statistic values."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("samples are empty")
    n_reps, n_cp = samples.shape
    if n_reps < n_min:
        raise ValueError(f"need at least {n_min} replicates, got {n_reps}")
    if band not in BANDS:
        raise ValueError(f"band must be one of {BANDS}")
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(thresholds <= 0.0) or np.any(np.diff(thresholds) <= 0.0):
        raise ValueError("thresholds must be positive and increasing")
    if checkpoints is None:
        checkpoints = np.arange(n_cp, dtype=float)
    coverage = np.empty((thresholds.size, n_cp))
    for i, m in enumerate(thresholds):
        if band == "ratio":
            ok = (samples > 1.0 / m) & (samples < m)
        elif band == "symmetric":
            ok = np.abs(samples) < m
        else:
            ok = samples < m
        ok &= np.isfinite(samples)
        coverage[i] = ok.mean(axis=0)
    return TightnessCurve(statistic_name, thresholds, np.asarray(checkpoints, dtype=float), coverage, n_reps, band)


# -- occupation-ratio check -----------------------------------------------------


@dataclass
class RatioCheck:
    checkpoints: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    theoretical: float
    n_defined: np.ndarray
    n_flagged: np.ndarray
    n_paths: int


class _Indicator:
    """Picklable indicator of [a, b]."""

    def __init__(self, a, b):
        self.a = float(a)
        self.b = float(b)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = ((x >= self.a) & (x <= self.b)).astype(float)
        return out if out.ndim else float(out)


def _ratio_chunk(model, f_interval, g_interval, cfg, lo, hi):
    K = len(cfg.checkpoints)
    F = np.empty((hi - lo, K))
    G = np.empty((hi - lo, K))
    ind_f = _Indicator(*f_interval)
    ind_g = _Indicator(*g_interval)
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        F[i - lo] = functionals.additive_functional(path, ind_f).values
        G[i - lo] = functionals.additive_functional(path, ind_g).values
    return F, G


def chacon_ornstein_check(model, f_interval, g_interval, cfg, n_paths, workers=1):
    """Replicate ratios of two occupation integrals vs. their invariant prediction.

    Replicates whose denominator is still zero at a checkpoint are flagged,
    excluded from the summary there, and counted.
    """
    mass_f = model_mod.invariant_mass(model, f_interval)
    mass_g = model_mod.invariant_mass(model, g_interval)
    if mass_f <= 0.0 or mass_g <= 0.0:
        raise ValueError("both intervals must carry positive invariant mass")
    chunks = replicate_map(partial(_ratio_chunk, model, tuple(f_interval), tuple(g_interval), cfg), n_paths, workers)
    F = np.concatenate([c[0] for c in chunks], axis=0)
    G = np.concatenate([c[1] for c in chunks], axis=0)
    K = F.shape[1]
    med = np.full(K, math.nan)
    q25 = np.full(K, math.nan)
    q75 = np.full(K, math.nan)
    n_def = np.zeros(K, dtype=np.int64)
    for j in range(K):
        defined = G[:, j] > 0.0
        n_def[j] = int(defined.sum())
        if n_def[j]:
            r = F[defined, j] / G[defined, j]
            med[j], q25[j], q75[j] = np.median(r), np.quantile(r, 0.25), np.quantile(r, 0.75)
    return RatioCheck(
        np.asarray(cfg.checkpoints),
        med,
        q25,
        q75,
        mass_f / mass_g,
        n_def,
        n_paths - n_def,
        n_paths,
    )


# -- uniform local-time convergence ---------------------------------------------


@dataclass
class UniformErrorResult:
    checkpoints: np.ndarray
    sup_error: np.ndarray
    errors: np.ndarray  # (grid, checkpoints)
    l_bar: np.ndarray  # mean local time, (grid, checkpoints)
    target: np.ndarray  # sigma^2(y) mu(y) on the grid
    v_hat: np.ndarray
    grid: np.ndarray
    n_paths: int


def _field_chunk(model, spec, cfg, grid, eps, lo, hi):
    K = len(cfg.checkpoints)
    sum_field = np.zeros((len(grid), K))
    sum_V = np.zeros(K)
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        sum_field += functionals.local_time_field(path, grid, eps).values
        sum_V += observable_iaf(path, spec).values
    return sum_field, sum_V


def local_time_uniform_error(model, spec, grid, cfg, n_paths, epsilon=None, workers=1):
    """sup_y |mean L_t^y / v_hat_t - sigma^2(y) mu(y)| over the grid, per checkpoint."""
    grid = np.asarray(grid, dtype=float)
    eps = functionals.default_epsilon(cfg.dt) if epsilon is None else float(epsilon)
    chunks = replicate_map(partial(_field_chunk, model, spec, cfg, grid, eps), n_paths, workers)
    l_bar = sum(c[0] for c in chunks) / n_paths
    v_hat = sum(c[1] for c in chunks) / n_paths
    if np.any(v_hat <= 0.0):
        t_bad = np.asarray(cfg.checkpoints)[int(np.argmin(v_hat))]
        raise ValueError(f"v_hat vanishes at t = {t_bad:g}: checkpoint too early to normalize")
    mu_g = invariant_g_mass(model, spec)
    target = np.array(
        [float(model.sigma2(y)) * model_mod.invariant_density(model, y) / mu_g for y in grid]
    )
    errors = np.abs(l_bar / v_hat[None, :] - target[:, None])
    return UniformErrorResult(
        np.asarray(cfg.checkpoints),
        errors.max(axis=0),
        errors,
        l_bar,
        target,
        v_hat,
        grid,
        n_paths,
    )


# -- kernel occupation limit ------------------------------------------------------


@dataclass(frozen=True)
class PowerLawBandwidth:
    """h(t) = min(c * t^(-p), cap); picklable bandwidth rule for worker pools."""

    c: float = 1.0
    p: float = 1.0 / 3.0
    cap: float = 0.5

    def __call__(self, t):
        return min(self.c * float(t) ** (-self.p), self.cap)


def unit_psi(x):
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    return out if out.ndim else float(out)


@dataclass
class KernelLimitResult:
    checkpoints: np.ndarray
    h: np.ndarray
    value: np.ndarray
    target: float
    v_hat: np.ndarray
    n_paths: int


def _kernel_limit_chunk(model, spec, x0, psi, kernel, cfg, h_per_cp, lo, hi):
    K = len(cfg.checkpoints)
    idx = cfg.checkpoint_indices()
    sum_A = np.zeros(K)
    sum_V = np.zeros(K)
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        for j, n in enumerate(idx):
            xs = path.x[:n]
            w = np.asarray(kernel.phi((xs - x0) / h_per_cp[j]), dtype=float)
            sum_A[j] += float(np.dot(w, np.asarray(psi(xs), dtype=float))) * path.dt
        sum_V += observable_iaf(path, spec).values
    return sum_A, sum_V


def kernel_af_limit_check(model, x0, psi, h_rule, kernel, spec, cfg, n_paths, workers=1):
    """Mean of int_0^t phi((X-x0)/h_t) psi(X) ds over h_t v_hat_t, against psi(x0) mu(x0)."""
    h_per_cp = np.array([float(h_rule(t)) for t in cfg.checkpoints])
    if np.any(h_per_cp <= 0.0):
        raise ValueError("bandwidth rule must be positive at every checkpoint")
    chunks = replicate_map(
        partial(_kernel_limit_chunk, model, spec, x0, psi, kernel, cfg, h_per_cp), n_paths, workers
    )
    a_bar = sum(c[0] for c in chunks) / n_paths
    v_hat = sum(c[1] for c in chunks) / n_paths
    if np.any(v_hat <= 0.0):
        t_bad = np.asarray(cfg.checkpoints)[int(np.argmin(v_hat))]
        raise ValueError(f"v_hat vanishes at t = {t_bad:g}: checkpoint too early to normalize")
    target = (
        float(np.asarray(psi(np.asarray(x0)), dtype=float))
        * model_mod.invariant_density(model, x0)
        / invariant_g_mass(model, spec)
    )
    return KernelLimitResult(
        np.asarray(cfg.checkpoints), h_per_cp, a_bar / (h_per_cp * v_hat), target, v_hat, n_paths
    )


# -- rate regression ---------------------------------------------------------------


@dataclass
class RateFit:
    slope: float
    intercept: float
    stderr_slope: float
    quantile_used: float
    T_grid: np.ndarray


def rate_regression(abs_errors, T_grid, quantile=0.5, min_defined=50):
    """OLS fit of log(error quantile) against log T; the slope is the empirical rate exponent.

    ``abs_errors`` is one array of defined absolute errors per horizon (NaN
    entries are dropped as undefined).
    """
    T_grid = np.asarray(T_grid, dtype=float)
    if T_grid.size < 3:
        raise ValueError("need at least 3 horizons for a rate fit")
    if len(abs_errors) != T_grid.size:
        raise ValueError("abs_errors and T_grid must have equal length")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    qs = np.empty(T_grid.size)
    for j, errs in enumerate(abs_errors):
        errs = np.asarray(errs, dtype=float)
        errs = errs[np.isfinite(errs)]
        if errs.size < min_defined:
            raise ValueError(f"only {errs.size} defined replicates at T = {T_grid[j]:g} (need {min_defined})")
        qs[j] = np.quantile(errs, quantile)
        if qs[j] <= 0.0:
            raise ValueError(f"error quantile is zero at T = {T_grid[j]:g}; log-log fit undefined")
    lx = np.log(T_grid)
    ly = np.log(qs)
    mx = lx.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    slope = float(np.sum((lx - mx) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * mx)
    resid = ly - (intercept + slope * lx)
    dof = T_grid.size - 2
    stderr = math.sqrt(max(float(np.sum(resid**2)), 0.0) / dof / sxx) if dof > 0 else 0.0
    return RateFit(slope, intercept, stderr, quantile, T_grid)


# -- scaled estimation errors -------------------------------------------------------


@dataclass
class ScaledErrors:
    """R_t |b_hat - b(x0)| per replicate and checkpoint, for coverage bands."""

    checkpoints: np.ndarray
    samples: np.ndarray  # NaN where the estimator is undefined
    pre_entry: np.ndarray  # True where V_t = 0 (statistic forced to 0)
    undefined: np.ndarray
    b_true: float


def scaled_drift_errors(traces, b_true):
    """Stack R_t |b_hat - b(x0)| over a list of per-replicate adaptive traces.

    Undefined estimates stay NaN and are reported, never imputed; checkpoints
    before the path first charges the observable window (R_t = 0) contribute
    a zero statistic and are flagged pre-entry.
    """
    if not traces:
        raise ValueError("no traces given")
    cps = traces[0].checkpoints
    R = np.stack([tr.R for tr in traces])
    b_hat = np.stack([tr.b_hat for tr in traces])
    defined = np.stack([tr.defined for tr in traces])
    V = np.stack([tr.V for tr in traces])
    pre_entry = V == 0.0
    samples = np.where(defined, R * np.abs(b_hat - b_true), np.nan)
    samples = np.where(pre_entry, 0.0, samples)
    return ScaledErrors(cps, samples, pre_entry, ~defined & ~pre_entry, float(b_true))


# -- full tightness suite -------------------------------------------------------------


def bandwidth_grid(delta, dt, sigma_x0, n=16):
    """Geometric bandwidth grid from delta down to the resolvable scale.

    The lower endpoint is floored at the one-step displacement
    sigma(x0) sqrt(dt): below that scale a discrete path skips the kernel
    window entirely and the h-curve measures discretization, not the
    diffusion.
    """
    h_floor = max(delta * 2.0 ** (-(n - 1)), sigma_x0 * math.sqrt(dt))
    if h_floor >= delta:
        return np.array([delta])
    return np.geomspace(delta, h_floor, n)


@dataclass
class TightnessSamples:
    """Per-replicate normalized statistics for the whole diagnostic family."""

    checkpoints: np.ndarray
    v_hat: np.ndarray
    h_det: np.ndarray
    stats: dict
    bands: dict
    h_grid: np.ndarray
    n_paths: int


def _kernel_sums(path, x0, h, kernel, n):
    d = path.x[:n] - x0
    sel = np.flatnonzero(np.abs(d) <= h)
    w = np.asarray(kernel.phi(d[sel] / h), dtype=float)
    a = float(np.sum(w)) * path.dt
    m = float(np.dot(w, np.asarray(path.model.sigma(path.x[sel]), dtype=float) * path.dw[sel]))
    return a, m


def _suite_chunk(model, spec, x0, alpha, delta, kernel, cfg, grid, eps, h_grid, lo, hi):
    K = len(cfg.checkpoints)
    idx = cfg.checkpoint_indices()
    n = hi - lo
    V = np.empty((n, K))
    inf_L = np.empty((n, K))
    sup_L = np.empty((n, K))
    inf_A = np.empty((n, K))
    sup_A = np.empty((n, K))
    A_over_H = np.empty((n, K))
    M_H = np.empty((n, K))
    s2_x0 = float(model.sigma2(x0))
    h_max = float(h_grid[0])
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        r = i - lo
        V[r] = observable_iaf(path, spec).values
        field = functionals.local_time_field(path, grid, eps).values
        inf_L[r] = field.min(axis=0)
        sup_L[r] = field.max(axis=0)
        # one support scan at the widest bandwidth serves the whole h-curve
        d = path.x[:-1] - x0
        sel = np.flatnonzero(np.abs(d) <= h_max)
        d_sel = d[sel]
        curve = np.empty((h_grid.size + 1, K))
        for q, h in enumerate(h_grid):
            inner = np.abs(d_sel) <= h
            w = np.asarray(kernel.phi(d_sel[inner] / h), dtype=float)
            curve[q] = functionals._support_prefix(w * path.dt, sel[inner], idx) / float(h)
        curve[-1] = functionals.occupation_local_time(path, x0, eps).values / s2_x0
        inf_A[r] = curve.min(axis=0)
        sup_A[r] = curve.max(axis=0)
        H, _ = bandwidth_and_rate(V[r], alpha, delta)
        for j in range(K):
            a, m = _kernel_sums(path, x0, float(H[j]), kernel, int(idx[j]))
            A_over_H[r, j] = a / float(H[j])
            M_H[r, j] = m
    return V, inf_L, sup_L, inf_A, sup_A, A_over_H, M_H


def tightness_suite(
    model, spec, x0, alpha, delta, kernel, cfg, n_paths, grid, epsilon=None, n_h=16, workers=1
):
    """Simulate replicates once and collect every tightness statistic.

    Statistics (one (n_paths, checkpoints) array each, with its band):

    ==================    =====================================  =========
    iaf_over_v            V_t / v_hat_t                          ratio
    local_time_inf/sup    inf/sup over the grid of L_t^x/v_hat   ratio
    kernel_af_inf/sup     inf/sup over h of A_t^h/(h v_hat)      ratio
    adaptive_kernel_af    A_t^{H_t} / (H_t v_hat)                ratio
    adaptive_martingale   M_t^{H_t} / sqrt(h_t v_hat)            symmetric
    ==================    =====================================  =========

    where h_t is the deterministic bandwidth built from v_hat itself.
    """
    grid = np.asarray(grid, dtype=float)
    eps = functionals.default_epsilon(cfg.dt) if epsilon is None else float(epsilon)
    h_grid = bandwidth_grid(delta, cfg.dt, float(model.sigma(x0)), n_h)
    chunks = replicate_map(
        partial(_suite_chunk, model, spec, x0, alpha, delta, kernel, cfg, grid, eps, h_grid),
        n_paths,
        workers,
    )
    V, inf_L, sup_L, inf_A, sup_A, A_over_H, M_H = (
        np.concatenate([c[k] for c in chunks], axis=0) for k in range(7)
    )
    v_hat = V.mean(axis=0)
    if np.any(v_hat <= 0.0):
        t_bad = np.asarray(cfg.checkpoints)[int(np.argmin(v_hat))]
        raise ValueError(f"v_hat vanishes at t = {t_bad:g}: checkpoint too early to normalize")
    h_det, _ = bandwidth_and_rate(v_hat, alpha, delta)
    stats = {
        "iaf_over_v": V / v_hat,
        "local_time_inf": inf_L / v_hat,
        "local_time_sup": sup_L / v_hat,
        "kernel_af_inf": inf_A / v_hat,
        "kernel_af_sup": sup_A / v_hat,
        "adaptive_kernel_af": A_over_H / v_hat,
        "adaptive_martingale": M_H / np.sqrt(h_det * v_hat),
    }
    bands = {name: ("symmetric" if name == "adaptive_martingale" else "ratio") for name in stats}
    return TightnessSamples(np.asarray(cfg.checkpoints), v_hat, np.asarray(h_det), stats, bands, h_grid, n_paths)


# -- rate study -----------------------------------------------------------------------


@dataclass
class RateStudy:
    T_grid: np.ndarray
    V: np.ndarray
    H: np.ndarray
    R: np.ndarray
    b_hat: np.ndarray
    denom: np.ndarray
    defined: np.ndarray
    b_true: float
    fit: RateFit
    scaled: ScaledErrors
    n_paths: int


def _trace_chunk(model, spec, x0, alpha, delta, kernel, cfg, lo, hi):
    K = len(cfg.checkpoints)
    n = hi - lo
    out = {k: np.empty((n, K)) for k in ("V", "H", "R", "b_hat", "denom")}
    defined = np.empty((n, K), dtype=bool)
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        tr = adaptive_estimate(path, x0, alpha, delta, spec, kernel)
        r = i - lo
        out["V"][r], out["H"][r], out["R"][r] = tr.V, tr.H, tr.R
        out["b_hat"][r], out["denom"][r] = tr.b_hat, tr.denom
        defined[r] = tr.defined
    return out["V"], out["H"], out["R"], out["b_hat"], out["denom"], defined


def rate_study(model, spec, x0, alpha, delta, kernel, cfg, n_paths, quantile=0.5, workers=1, min_defined=50):
    """Adaptive estimation across replicates and a horizon grid, plus the rate fit."""
    from .estimate import AdaptiveTrace

    chunks = replicate_map(
        partial(_trace_chunk, model, spec, x0, alpha, delta, kernel, cfg), n_paths, workers
    )
    V, H, R, b_hat, denom, defined = (np.concatenate([c[k] for c in chunks], axis=0) for k in range(6))
    T_grid = np.asarray(cfg.checkpoints)
    b_true = float(model.drift(x0))
    abs_err = np.where(defined, np.abs(b_hat - b_true), np.nan)
    fit = rate_regression(
        [abs_err[:, j] for j in range(T_grid.size)], T_grid, quantile=quantile, min_defined=min_defined
    )
    traces = [
        AdaptiveTrace(T_grid, V[i], H[i], R[i], b_hat[i], denom[i], defined[i]) for i in range(n_paths)
    ]
    scaled = scaled_drift_errors(traces, b_true)
    return RateStudy(T_grid, V, H, R, b_hat, denom, defined, b_true, fit, scaled, n_paths)
