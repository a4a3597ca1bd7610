"""Scalar diffusion models dX = sigma(X) dW + b(X) dt and admissible kernels.

A model is a pair of coefficient functions drawn from small parametric
families, together with the metadata the estimation harness needs: a linear
growth constant for the coefficient bounds, and a local Hölder record
(x0, alpha, gamma, delta) describing the smoothness of the drift near the
estimation point.

The invariant measure of such a diffusion has the explicit density

    mu(x) = 2/sigma^2(x) * exp( int_0^x 2 b / sigma^2 ),

unique up to a constant multiple; this module fixes the normalization above.
Recurrence is decided by divergence of the scale function
s(x) = int_0^x exp(-int_0^y 2 b / sigma^2) in both directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import QuadratureError, adaptive_simpson

DRIFT_KINDS = ("zero", "linear", "constant", "compact_bump", "holder_kink", "tabulated")
SIGMA_KINDS = ("constant", "affine_envelope")

#: truncation for "whole line" quadratures; all shipped models have their
#: tails resolved far inside +-50
DEFAULT_X_MAX = 50.0


class ModelValidationError(ValueError):
    """A coefficient family violates one of its declared bounds."""


class DensityError(RuntimeError):
    """Invariant-density quadrature failed; carries the offending point."""

    def __init__(self, message, x):
        super().__init__(message)
        self.x = x


class InconclusiveTailError(RuntimeError):
    """The tail-decay test could not decide whether mu(R) is finite."""


@dataclass(frozen=True)
class HolderSpec:
    """Local drift smoothness: |b(x) - b(x0)| <= gamma |x - x0|^alpha on [x0-delta, x0+delta]."""

    x0: float = 0.0
    alpha: float = 1.0
    gamma: float = 1.0
    delta: float = 0.5

    def check(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ModelValidationError(f"holder alpha must lie in (0, 1], got {self.alpha}")
        if self.gamma <= 0.0 or self.delta <= 0.0:
            raise ModelValidationError("holder gamma and delta must be positive")


@dataclass(frozen=True)
class DiffusionModel:
    """Coefficient specification for dX = sigma(X) dW + b(X) dt.

    drift_kind / sigma_kind select the parametric family; the parameter
    tuples are interpreted per family:

    ==============  =============================================
    zero            b = 0
    linear          (theta,)          b(x) = theta * x
    constant        (c,)              b(x) = c
    compact_bump    (c,)              b(x) = c (1-x^2)^2 on |x| <= 1
    holder_kink     (alpha_b,)        b(x) = -sign(x) min(|x|^alpha_b, 1)
    tabulated       (xs, bs)          linear interpolation, clamped ends
    constant        (s,)              sigma(x) = s
    affine_envelope (s0, s1)          sigma(x) = s0 + s1 |x|
    ==============  =============================================
    """

    drift_kind: str
    drift_params: tuple = ()
    sigma_kind: str = "constant"
    sigma_params: tuple = (1.0,)
    growth_constant: float = 1.0
    holder: HolderSpec = field(default_factory=HolderSpec)
    model_id: str = ""

    def __post_init__(self):
        if self.drift_kind not in DRIFT_KINDS:
            raise ModelValidationError(f"unknown drift family {self.drift_kind!r}")
        if self.sigma_kind not in SIGMA_KINDS:
            raise ModelValidationError(f"unknown sigma family {self.sigma_kind!r}")
        if not self.model_id:
            object.__setattr__(self, "model_id", f"{self.drift_kind}-{self.sigma_kind}")
        if self.drift_kind == "tabulated":
            xs, bs = self.drift_params
            xs = tuple(float(v) for v in xs)
            bs = tuple(float(v) for v in bs)
            if len(xs) != len(bs) or len(xs) < 2:
                raise ModelValidationError("tabulated drift needs >= 2 (x, b) pairs")
            if any(b >= a for a, b in zip(xs[1:], xs[:-1])):
                raise ModelValidationError("tabulated drift abscissae must be strictly increasing")
            object.__setattr__(self, "drift_params", (xs, bs))

    # -- coefficient evaluation (vectorized over numpy arrays) --------------

    def drift(self, x):
        x = np.asarray(x, dtype=float)
        kind = self.drift_kind
        if kind == "zero":
            b = np.zeros_like(x)
        elif kind == "linear":
            b = self.drift_params[0] * x
        elif kind == "constant":
            b = np.full_like(x, self.drift_params[0])
        elif kind == "compact_bump":
            c = self.drift_params[0]
            inside = np.abs(x) <= 1.0
            b = np.where(inside, c * (1.0 - x * x) ** 2, 0.0)
        elif kind == "holder_kink":
            a = self.drift_params[0]
            b = -np.sign(x) * np.minimum(np.abs(x) ** a, 1.0)
        else:  # tabulated
            xs, bs = self.drift_params
            b = np.interp(x, np.asarray(xs), np.asarray(bs))
        return b if b.ndim else float(b)

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma_kind == "constant":
            s = np.full_like(x, self.sigma_params[0])
        else:
            s0, s1 = self.sigma_params
            s = s0 + s1 * np.abs(x)
        return s if s.ndim else float(s)

    def sigma2(self, x):
        s = self.sigma(x)
        return s * s

    # -- validation ----------------------------------------------------------

    def validate(self, x_max=DEFAULT_X_MAX, n_grid=10001, holder_grid=2001):
        """Check positivity, growth bounds, and the local Hölder condition.

        All three analytic hypotheses are verified on finite grids:
        sigma > 0 and the linear-growth bounds on ``n_grid`` equispaced
        points of [-x_max, x_max], the Hölder ratio on ``holder_grid``
        points of [x0-delta, x0+delta] excluding x0 itself.
        """
        self.holder.check()
        if self.growth_constant <= 0.0:
            raise ModelValidationError("growth_constant must be positive")
        xs = np.linspace(-x_max, x_max, n_grid)
        sig = np.asarray(self.sigma(xs))
        if np.min(sig) <= 0.0:
            bad = xs[int(np.argmin(sig))]
            raise ModelValidationError(f"sigma is not strictly positive (sigma({bad:g}) = {np.min(sig):g})")
        C = self.growth_constant
        if np.any(sig * sig > C * (1.0 + xs * xs) * (1.0 + 1e-12)):
            bad = xs[int(np.argmax(sig * sig - C * (1.0 + xs * xs)))]
            raise ModelValidationError(f"sigma^2 exceeds C(1+x^2) at x = {bad:g} with C = {C:g}")
        b = np.abs(np.asarray(self.drift(xs)))
        if np.any(b > C * (1.0 + np.abs(xs)) * (1.0 + 1e-12)):
            bad = xs[int(np.argmax(b - C * (1.0 + np.abs(xs))))]
            raise ModelValidationError(f"|b| exceeds C(1+|x|) at x = {bad:g} with C = {C:g}")
        h = self.holder
        ys = np.linspace(h.x0 - h.delta, h.x0 + h.delta, holder_grid)
        ys = ys[ys != h.x0]
        ratio = np.abs(np.asarray(self.drift(ys)) - float(self.drift(h.x0))) / np.abs(ys - h.x0) ** h.alpha
        worst = float(np.max(ratio))
        if worst > h.gamma * (1.0 + 1e-9):
            bad = ys[int(np.argmax(ratio))]
            raise ModelValidationError(
                f"Hölder ratio {worst:g} exceeds gamma = {h.gamma:g} at x = {bad:g} "
                f"(alpha = {h.alpha:g}, window +-{h.delta:g} around {h.x0:g})"
            )
        return self


# -- factory helpers ----------------------------------------------------------


def zero_drift(s=1.0, model_id="bm"):
    """Driftless diffusion; s = 1 is standard Brownian motion."""
    return DiffusionModel("zero", (), "constant", (float(s),), max(1.0, s * s), HolderSpec(gamma=1.0), model_id)


def linear_drift(theta, s=1.0, x0=0.0, delta=0.5, model_id=""):
    """b(x) = theta x; theta = -1, s = 1 is the standard mean-reverting case."""
    holder = HolderSpec(x0=x0, alpha=1.0, gamma=max(abs(theta), 1e-12), delta=delta)
    C = max(abs(theta), s * s, 1.0)
    return DiffusionModel("linear", (float(theta),), "constant", (float(s),), C, holder, model_id or f"linear{theta:g}")


def constant_drift(c, s=1.0, model_id=""):
    holder = HolderSpec(gamma=1e-6 if c == 0 else 1.0)
    C = max(abs(c), s * s, 1.0)
    return DiffusionModel("constant", (float(c),), "constant", (float(s),), C, holder, model_id or f"const{c:g}")


def compact_bump(c=1.0, s=1.0, delta=0.5, model_id="bump"):
    """b(x) = c (1-x^2)^2 inside [-1, 1], zero outside; null-recurrent for s = 1."""
    gamma = abs(c) * 2.0 * delta * (1.0 + 1e-9) if delta <= 1.0 else abs(c) * 2.0
    holder = HolderSpec(x0=0.0, alpha=1.0, gamma=max(gamma, 1e-12), delta=delta)
    C = max(abs(c), s * s, 1.0)
    return DiffusionModel("compact_bump", (float(c),), "constant", (float(s),), C, holder, model_id)


def holder_kink(alpha_b, s=1.0, delta=0.5, model_id=""):
    """b(x) = -sign(x) min(|x|^alpha_b, 1): drift exactly Hölder of order alpha_b at 0."""
    holder = HolderSpec(x0=0.0, alpha=float(alpha_b), gamma=1.0, delta=min(delta, 1.0))
    C = max(1.0, s * s)
    return DiffusionModel("holder_kink", (float(alpha_b),), "constant", (float(s),), C, holder, model_id or f"kink{alpha_b:g}")


def tabulated_drift(xs, bs, s=1.0, holder=None, model_id="tabulated"):
    table_max = max(abs(float(v)) for v in bs)
    C = max(table_max, s * s, 1.0)
    return DiffusionModel("tabulated", (tuple(xs), tuple(bs)), "constant", (float(s),), C, holder or HolderSpec(), model_id)


# -- invariant measure ---------------------------------------------------------


def _log_density_exponent(model, x, tol=1e-9):
    """int_0^x 2 b / sigma^2, by adaptive Simpson."""
    if x == 0.0:
        return 0.0

    def integrand(v):
        return 2.0 * float(model.drift(v)) / float(model.sigma2(v))

    return adaptive_simpson(integrand, 0.0, x, tol=tol)


def invariant_density(model, x):
    """Density 2/sigma^2(x) exp(int_0^x 2b/sigma^2) of the invariant measure."""
    x = float(x)
    try:
        expo = _log_density_exponent(model, x)
    except QuadratureError as exc:
        raise DensityError(f"invariant-density quadrature failed at x = {x:g}: {exc}", x) from exc
    if expo > 700.0:
        return math.inf
    return 2.0 / float(model.sigma2(x)) * math.exp(expo)


def invariant_mass(model, interval=None, x_max=DEFAULT_X_MAX, tol=1e-9):
    """mu-mass of an interval, or of the whole line when ``interval`` is None.

    Total mode integrates over [-x_max, x_max] and applies a geometric decay
    test to mu on [x_max, 2 x_max] (both sides, sampled at quarter-doubling
    points): if each step decays by at least a factor 2 the tail is summable
    and the truncated integral is returned; if some step fails to decay by at
    least 10% the mass is declared infinite (math.inf); anything in between
    raises InconclusiveTailError rather than guessing.
    """
    if interval is not None:
        a, b = float(interval[0]), float(interval[1])
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got [{a:g}, {b:g}]")
        return adaptive_simpson(lambda v: invariant_density(model, v), a, b, tol=tol)

    decayed = []
    for side in (+1.0, -1.0):
        pts = [side * x_max * 2.0 ** (j / 4.0) for j in range(5)]
        vals = [invariant_density(model, p) for p in pts]
        ratios = []
        for lo, hi in zip(vals[:-1], vals[1:]):
            if lo <= 0.0:
                ratios.append(0.0)
            else:
                ratios.append(hi / lo)
        if all(r <= 0.5 for r in ratios):
            decayed.append(True)
        elif any(r >= 0.9 for r in ratios) and vals[-1] > 1e-300:
            return math.inf
        else:
            raise InconclusiveTailError(
                f"tail of mu on [{x_max:g}, {2 * x_max:g}] (side {side:+g}) decays too slowly "
                f"to certify a finite mass but is not flat either (ratios {ratios})"
            )
    return adaptive_simpson(lambda v: invariant_density(model, v), -x_max, x_max, tol=tol)


def scale_function(model, x, tol=1e-9):
    """s(x) = int_0^x exp(-int_0^y 2b/sigma^2) dy (exponent clipped at 500)."""

    def integrand(y):
        return math.exp(min(-_log_density_exponent(model, y), 500.0))

    return adaptive_simpson(integrand, 0.0, float(x), tol=tol)


def classify_recurrence(model, divergence_threshold=1e6, rel_tol=1e-6, x_cap=None):
    """Classify by divergence of the scale function in each direction.

    Marches outward on a geometric grid (doubling from 1) until either |s|
    exceeds ``divergence_threshold`` (divergent direction) or successive
    doublings change s by less than ``rel_tol`` relative (convergent
    direction). Hitting the march cap ``x_cap`` (default 1024 times the
    threshold, enough headroom for scale densities down to ~1e-3) with
    neither criterion met gives "inconclusive".
    """
    if x_cap is None:
        x_cap = 1024.0 * divergence_threshold
    verdict = {}
    for side in (+1.0, -1.0):
        s = 0.0
        expo_base = 0.0  # int_0^{side*prev_x} 2b/sigma^2, accumulated over segments
        prev_x = 0.0
        x = 1.0
        state = "inconclusive"
        while x <= x_cap:
            seg_lo = side * prev_x
            seg_hi = side * x

            def seg_exponent(y):
                return expo_base + adaptive_simpson(
                    lambda v: 2.0 * float(model.drift(v)) / float(model.sigma2(v)),
                    seg_lo,
                    y,
                    tol=1e-9,
                )

            def integrand(y):
                return math.exp(min(-seg_exponent(y), 500.0))

            probe = max(integrand(0.5 * (seg_lo + seg_hi)), integrand(seg_hi))
            if probe * (x - prev_x) > 10.0 * divergence_threshold:
                state = "divergent"
                break
            seg_tol = 1e-9 * (1.0 + abs(s))
            prev_s = s
            s += adaptive_simpson(integrand, seg_lo, seg_hi, tol=seg_tol)
            expo_base = seg_exponent(seg_hi)
            if abs(s) > divergence_threshold:
                state = "divergent"
                break
            if prev_x > 0.0 and abs(s - prev_s) < rel_tol * abs(s):
                state = "convergent"
                break
            prev_x = x
            x *= 2.0
        verdict[side] = state
    if verdict[+1.0] == "inconclusive" or verdict[-1.0] == "inconclusive":
        return "inconclusive"
    if verdict[+1.0] == "divergent" and verdict[-1.0] == "divergent":
        return "recurrent"
    if verdict[+1.0] == "convergent" and verdict[-1.0] == "convergent":
        return "transient_both"
    if verdict[+1.0] == "convergent":
        return "transient_plus"
    return "transient_minus"


# -- kernels -------------------------------------------------------------------


def _quartic(x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, (15.0 / 16.0) * (1.0 - x * x) ** 2, 0.0)
    return out if out.ndim else float(out)


def _quartic_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, -(15.0 / 4.0) * x * (1.0 - x * x), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelSpec:
    """C^1 weight function with support in [-1, 1] and unit integral."""

    name: str
    phi: Callable
    phi_prime: Callable


#: minimal-degree polynomial kernel meeting the C^1 / support / unit-mass
#: requirements: phi(x) = (15/16)(1-x^2)^2 on [-1, 1]
QUARTIC = KernelSpec("quartic", _quartic, _quartic_prime)

KERNELS = {"quartic": QUARTIC}


@dataclass(frozen=True)
class KernelCheck:
    name: str
    passed: bool
    residual: float
    location: float | None = None


@dataclass(frozen=True)
class KernelReport:
    kernel: str
    checks: tuple

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = [f"kernel {self.kernel!r}:"]
        for c in self.checks:
            where = "" if c.location is None else f" at x = {c.location:g}"
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: residual {c.residual:.3e}{where}")
        return "\n".join(lines)


def kernel_validate(kernel, n_grid=2001, fd_step=1e-4):
    """Grid-check the kernel contract; failures are reported, not raised."""
    xs = np.linspace(-1.0, 1.0, n_grid)
    phi = np.asarray(kernel.phi(xs), dtype=float)
    phip = np.asarray(kernel.phi_prime(xs), dtype=float)
    checks = []

    neg = float(np.min(phi))
    loc = float(xs[int(np.argmin(phi))])
    checks.append(KernelCheck("nonnegative", neg >= -1e-12, max(0.0, -neg), loc))

    outside = np.concatenate([np.linspace(1.0, 3.0, 101), -np.linspace(1.0, 3.0, 101)])
    out_res = float(np.max(np.abs(np.asarray(kernel.phi(outside), dtype=float))))
    checks.append(KernelCheck("supported_in_unit_interval", out_res <= 1e-12, out_res, None))

    mass = adaptive_simpson(lambda v: float(kernel.phi(v)), -1.0, 1.0, tol=1e-12)
    checks.append(KernelCheck("unit_integral", abs(mass - 1.0) <= 1e-10, abs(mass - 1.0), None))

    end_res = max(abs(float(kernel.phi_prime(-1.0))), abs(float(kernel.phi_prime(1.0))))
    checks.append(KernelCheck("zero_derivative_at_support_edge", end_res <= 1e-10, end_res, None))

    interior = xs[(np.abs(xs) < 1.0 - 2 * fd_step)]
    fd = (np.asarray(kernel.phi(interior + fd_step)) - np.asarray(kernel.phi(interior - fd_step))) / (2 * fd_step)
    fd_err = np.abs(fd - np.asarray(kernel.phi_prime(interior), dtype=float))
    res = float(np.max(fd_err))
    loc = float(interior[int(np.argmax(fd_err))])
    checks.append(KernelCheck("phi_prime_matches_finite_difference", res <= 1e-2, res, loc))

    jumps = np.abs(np.diff(phip))
    dx = xs[1] - xs[0]
    thresh = 10.0 * (1.0 + float(np.max(np.abs(phip)))) * dx
    res = float(np.max(jumps))
    loc = float(0.5 * (xs[int(np.argmax(jumps))] + xs[int(np.argmax(jumps)) + 1]))
    checks.append(KernelCheck("phi_prime_continuous", res <= thresh, res, loc))

    return KernelReport(kernel.name, tuple(checks))
