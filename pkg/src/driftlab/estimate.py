"""Growth normalization and kernel drift estimation.

The normalization curve v_t is the expected occupation integral of a
bounded indicator g supported on a compact interval, scaled so that the
invariant integral of g is one. Every integrable occupation functional of
the diffusion grows at the same rate as v_t, which makes v_t the natural
yardstick: t for ergodic models, sqrt(t) for driftless-type null-recurrent
ones, and in general something in between that has no closed form and is
estimated here by Monte Carlo.

The drift value b(x0) is estimated by the kernel-weighted quotient

    b_hat = sum phi((x_k - x0)/h) (x_{k+1} - x_k) / sum phi((x_k - x0)/h) dt,

which sees only observables (the increments of X, never b or the noise).
The data-driven bandwidth/rate pair built from an observable occupation
functional V_t is

    H_t = V_t^(-1/(2 alpha + 1)) ^ delta,     R_t = V_t^(alpha/(2 alpha + 1)),

with the convention H_t = delta, R_t = 0 before the path first charges the
support of g (V_t = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import functionals, model as model_mod, sim
from .parallel import replicate_map


@dataclass(frozen=True)
class EquivalentSpec:
    """Normalized indicator g = c 1_[a,b] and the (point-mass) initial law."""

    g_interval: tuple
    normalization: float
    pi: float
    normalized: bool = True

    def __post_init__(self):
        a, b = self.g_interval
        if not float(a) < float(b):
            raise ValueError("g_interval must satisfy a < b")
        object.__setattr__(self, "g_interval", (float(a), float(b)))

    def g(self, x):
        a, b = self.g_interval
        x = np.asarray(x, dtype=float)
        out = np.where((x >= a) & (x <= b), self.normalization, 0.0)
        return out if out.ndim else float(out)


def _normalization_constant(model, interval):
    """c such that g = c 1_[a,b] has unit invariant integral.

    Against the plain coefficient density when the total mass is infinite
    (the only canonical choice in the null-recurrent case), and against the
    invariant probability measure when the total mass is finite, so that the
    ergodic law of large numbers gives v_t / t -> 1 exactly. When the tail
    test cannot decide the regime the plain-density convention is kept.
    """
    mass = model_mod.invariant_mass(model, interval)
    try:
        total = model_mod.invariant_mass(model)
    except model_mod.InconclusiveTailError:
        return 1.0 / mass
    if math.isfinite(total):
        return total / mass
    return 1.0 / mass


def make_equivalent_spec(model, interval, x_init, blind=False):
    """Build the normalization record; blind mode keeps the raw occupation time (c = 1)."""
    if blind:
        return EquivalentSpec(tuple(interval), 1.0, float(x_init), normalized=False)
    return EquivalentSpec(tuple(interval), _normalization_constant(model, interval), float(x_init), normalized=True)


def check_spec(model, spec, tol=1e-8):
    """Verify the normalization constant against the invariant measure."""
    if not spec.normalized:
        return spec
    expected = _normalization_constant(model, spec.g_interval)
    if abs(spec.normalization / expected - 1.0) > tol:
        raise ValueError(
            f"normalization {spec.normalization:g} is inconsistent with the invariant measure "
            f"(expected {expected:g}, relative residual {abs(spec.normalization / expected - 1.0):.3e})"
        )
    return spec


def invariant_g_mass(model, spec):
    """Integral of g against the plain coefficient density 2/sigma^2 exp(...).

    Diagnostic targets are invariant-measure quantities divided by this
    value: the limit theorems compare two functionals normalized by the same
    measure, so any constant rescaling of the measure cancels as long as
    both sides use it consistently.
    """
    return spec.normalization * model_mod.invariant_mass(model, spec.g_interval)


def observable_iaf(path, spec, checkpoints=None):
    """V_t: the occupation integral of g along the path."""
    series = functionals.additive_functional(path, spec.g, checkpoints)
    series.kind = "af"
    return series


@dataclass
class EquivalentCurve:
    checkpoints: np.ndarray
    v_hat: np.ndarray
    stderr: np.ndarray
    n_paths: int


def _iaf_chunk(model, spec, cfg, lo, hi):
    out = np.empty((hi - lo, len(cfg.checkpoints)))
    for i in range(lo, hi):
        path = sim.simulate_path(model, cfg.with_replicate(i))
        out[i - lo] = observable_iaf(path, spec).values
    return out


def deterministic_equivalent(model, spec, cfg, n_paths, workers=1):
    """Monte Carlo estimate of v_t = E int_0^t g(X_s) ds over replicates 0..n_paths-1."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    cfg = cfg.with_replicate(0)
    chunks = replicate_map(partial(_iaf_chunk, model, spec, cfg), n_paths, workers)
    vals = np.concatenate(chunks, axis=0)
    v_hat = vals.mean(axis=0)
    if n_paths > 1:
        stderr = vals.std(axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        stderr = np.zeros_like(v_hat)
    return EquivalentCurve(np.asarray(cfg.checkpoints), v_hat, stderr, n_paths)


def bandwidth_and_rate(V, alpha, delta):
    """(H, R) from the observable occupation value V.

    H = min(V^(-1/(2 alpha + 1)), delta) with H = delta when V = 0;
    R = V^(alpha/(2 alpha + 1)) with R = 0 when V = 0.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    V_arr = np.asarray(V, dtype=float)
    if np.any(V_arr < 0.0):
        raise ValueError("V must be nonnegative")
    expo = 1.0 / (2.0 * alpha + 1.0)
    safe = np.where(V_arr > 0.0, V_arr, 1.0)
    H = np.where(V_arr > 0.0, np.minimum(safe ** (-expo), delta), delta)
    R = np.where(V_arr > 0.0, safe ** (alpha * expo), 0.0)
    if V_arr.ndim == 0:
        return float(H), float(R)
    return H, R


@dataclass
class NWResult:
    b_hat: float
    denom: float
    defined: bool


def nadaraya_watson(path, x0, h, kernel, t=None):
    """Kernel quotient estimate of the drift at x0 from the path up to time t.

    Increments of X are used as observed (drift + noise together); when the
    kernel mass in the window is zero the estimate is undefined, which is a
    value, not an error.
    """
    if h <= 0.0:
        raise ValueError("bandwidth h must be positive")
    if t is None:
        n = path.dw.shape[0]
    else:
        n = round(t / path.dt)
        if abs(t - n * path.dt) > 1e-6 * max(1.0, t):
            raise ValueError(f"time {t:g} is not aligned to dt = {path.dt:g}")
        n = int(min(max(n, 0), path.dw.shape[0]))
    d = path.x[:n] - x0
    sel = np.flatnonzero(np.abs(d) <= h)
    w = np.asarray(kernel.phi(d[sel] / h), dtype=float)
    denom = float(np.sum(w) * path.dt)
    if denom <= 0.0:
        return NWResult(math.nan, 0.0, False)
    num = float(np.dot(w, path.x[sel + 1] - path.x[sel]))
    return NWResult(num / denom, denom, True)


@dataclass
class AdaptiveTrace:
    """Per-checkpoint record of the data-driven estimation pipeline."""

    checkpoints: np.ndarray
    V: np.ndarray
    H: np.ndarray
    R: np.ndarray
    b_hat: np.ndarray
    denom: np.ndarray
    defined: np.ndarray


def adaptive_estimate(path, x0, alpha, delta, spec, kernel, checkpoints=None):
    """Estimate b(x0) at each checkpoint with the bandwidth H_t driven by V_t.

    H_t uses only data up to t, so (H_t) is adapted to the observation
    filtration as the tightness results for random bandwidths require.
    """
    V_series = observable_iaf(path, spec, checkpoints)
    times = V_series.checkpoints
    V = V_series.values
    H, R = bandwidth_and_rate(V, alpha, delta)
    K = times.shape[0]
    b_hat = np.full(K, math.nan)
    denom = np.zeros(K)
    defined = np.zeros(K, dtype=bool)
    for j in range(K):
        res = nadaraya_watson(path, x0, float(H[j]), kernel, t=float(times[j]))
        b_hat[j] = res.b_hat
        denom[j] = res.denom
        defined[j] = res.defined
    return AdaptiveTrace(times, V, np.asarray(H), np.asarray(R), b_hat, denom, defined)
