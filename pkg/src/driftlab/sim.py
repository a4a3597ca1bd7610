"""Euler path generation with a reproducible parallel replication contract.

The driving-noise stream for replicate ``i`` of a run seeded with ``seed``
is Philox (counter-based) keyed by ``SeedSequence(seed, spawn_key=(i,))``:
a pure function of ``(seed, i)``. Replicates can therefore be farmed out to
any number of workers, in any order, and the resulting paths are
bit-identical to a serial run.

Noise increments are stored on the path (not re-derivable from X alone):
stochastic integrals against W must integrate against exactly the noise
that drove the path.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


class SimulationError(RuntimeError):
    """Path generation failed; carries the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


def default_dt(t_max):
    """Step-size rule: 1e-3 up to horizon 1e3, 1e-2 beyond."""
    return 1e-3 if t_max <= 1e3 else 1e-2


def log_checkpoints(t_max, dt, count, t_min=None):
    """``count`` log-spaced times in [t_min, t_max] rounded down to multiples of dt.

    Default t_min spans three decades below t_max (floored at dt).
    Rounding collisions are deduplicated, so fewer than ``count`` times may
    come back.
    """
    if count < 1:
        raise ValueError("checkpoint count must be >= 1")
    if t_min is None:
        t_min = max(dt, t_max / 1e3)
    t_min = max(t_min, dt)
    if count == 1:
        raw = np.array([t_max])
    else:
        raw = np.geomspace(t_min, t_max, count)
    steps = np.floor(raw / dt + 1e-9).astype(np.int64)
    steps = np.unique(steps[steps >= 1])
    return tuple(float(n) * dt for n in steps)


@dataclass(frozen=True)
class PathConfig:
    """Discretization, horizon, checkpoints, and noise-stream coordinates."""

    x_init: float
    t_max: float
    dt: float
    checkpoints: tuple
    seed: int
    replicate_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "checkpoints", tuple(float(t) for t in self.checkpoints))

    def validate(self):
        if self.dt <= 0.0 or self.t_max <= 0.0:
            raise ValueError("dt and t_max must be positive")
        if self.dt > self.t_max:
            raise ValueError("dt must not exceed t_max")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be nonnegative")
        if not self.checkpoints:
            raise ValueError("at least one checkpoint is required")
        prev = 0.0
        for t in self.checkpoints:
            if not prev < t:
                raise ValueError(f"checkpoints must be strictly increasing and positive, got {t:g}")
            if t > self.t_max * (1.0 + 1e-12):
                raise ValueError(f"checkpoint {t:g} exceeds t_max = {self.t_max:g}")
            n = t / self.dt
            if abs(n - round(n)) > 1e-6:
                raise ValueError(f"checkpoint {t!r} is not a multiple of dt = {self.dt:g}")
            prev = t
        return self

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))

    def checkpoint_indices(self):
        return np.array([int(round(t / self.dt)) for t in self.checkpoints], dtype=np.int64)

    def with_replicate(self, i):
        return replace(self, replicate_index=int(i))


@dataclass
class Path:
    """A realized trajectory together with the noise that drove it."""

    dt: float
    x: np.ndarray
    dw: np.ndarray
    model: object
    config: PathConfig

    @property
    def model_id(self):
        return self.model.model_id

    def checkpoint_indices(self):
        return self.config.checkpoint_indices()

    def __post_init__(self):
        if self.x.shape[0] != self.dw.shape[0] + 1:
            raise ValueError("x must have exactly one more entry than dw")


def noise_stream(seed, replicate_index):
    """Philox generator for replicate ``replicate_index`` of run ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate_index),))
    return np.random.Generator(np.random.Philox(ss))


# drift family codes for the compiled stepper
_DRIFT_CODE = {"zero": 0, "linear": 1, "constant": 2, "compact_bump": 3, "holder_kink": 4, "tabulated": 5}
_SIGMA_CODE = {"constant": 0, "affine_envelope": 1}


def _coefficient_codes(model):
    dk = _DRIFT_CODE[model.drift_kind]
    if model.drift_kind == "tabulated":
        xs, bs = model.drift_params
        dp = np.empty(0, dtype=np.float64)
        tab_x = np.asarray(xs, dtype=np.float64)
        tab_b = np.asarray(bs, dtype=np.float64)
    else:
        dp = np.asarray(model.drift_params, dtype=np.float64)
        tab_x = np.empty(0, dtype=np.float64)
        tab_b = np.empty(0, dtype=np.float64)
    sk = _SIGMA_CODE[model.sigma_kind]
    sp = np.asarray(model.sigma_params, dtype=np.float64)
    return dk, dp, sk, sp, tab_x, tab_b


@njit(cache=True)
def _interp_clamped(x, xs, bs):
    if x <= xs[0]:
        return bs[0]
    if x >= xs[-1]:
        return bs[-1]
    lo = 0
    hi = xs.size - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    w = (x - xs[lo]) / (xs[hi] - xs[lo])
    return bs[lo] * (1.0 - w) + bs[hi] * w


@njit(cache=True)
def _euler_loop(x0, dw, dt, dk, dp, sk, sp, tab_x, tab_b):
    n = dw.shape[0]
    x = np.empty(n + 1, dtype=np.float64)
    x[0] = x0
    for k in range(n):
        xk = x[k]
        if dk == 0:
            b = 0.0
        elif dk == 1:
            b = dp[0] * xk
        elif dk == 2:
            b = dp[0]
        elif dk == 3:
            if -1.0 <= xk <= 1.0:
                u = 1.0 - xk * xk
                b = dp[0] * u * u
            else:
                b = 0.0
        elif dk == 4:
            a = abs(xk) ** dp[0]
            if a > 1.0:
                a = 1.0
            b = -a if xk > 0.0 else (a if xk < 0.0 else 0.0)
        else:
            b = _interp_clamped(xk, tab_x, tab_b)
        if sk == 0:
            s = sp[0]
        else:
            s = sp[0] + sp[1] * abs(xk)
        xn = xk + b * dt + s * dw[k]
        if not np.isfinite(xn):
            return x, k
        x[k + 1] = xn
    return x, -1


def _euler_py(x0, dw, dt, model):
    n = dw.shape[0]
    x = np.empty(n + 1, dtype=np.float64)
    x[0] = x0
    for k in range(n):
        xk = x[k]
        xn = xk + float(model.drift(xk)) * dt + float(model.sigma(xk)) * dw[k]
        if not math.isfinite(xn):
            return x, k
        x[k + 1] = xn
    return x, -1


def simulate_path(model, cfg: PathConfig) -> Path:
    """Euler path x[k+1] = x[k] + b(x[k]) dt + sigma(x[k]) dw[k].

    dw[k] = sqrt(dt) * xi_k with xi_k standard normal from the replicate's
    own Philox stream; output is bit-identical for identical (model, cfg)
    regardless of how many worker processes are running.
    """
    cfg.validate()
    n = cfg.n_steps
    rng = noise_stream(cfg.seed, cfg.replicate_index)
    dw = rng.standard_normal(n) * math.sqrt(cfg.dt)
    if _HAVE_NUMBA:
        dk, dp, sk, sp, tab_x, tab_b = _coefficient_codes(model)
        x, bad = _euler_loop(cfg.x_init, dw, cfg.dt, dk, dp, sk, sp, tab_x, tab_b)
    else:  # pragma: no cover
        x, bad = _euler_py(cfg.x_init, dw, cfg.dt, model)
    if bad >= 0:
        raise SimulationError(
            f"state became non-finite at step {bad} (t = {bad * cfg.dt:g}) "
            f"for model {model.model_id!r}, replicate {cfg.replicate_index}",
            step=bad,
        )
    return Path(dt=cfg.dt, x=x, dw=dw, model=model, config=cfg)


def warmup():
    """Force JIT compilation before forking a worker pool."""
    if _HAVE_NUMBA:
        dw = np.zeros(2)
        _euler_loop(0.0, dw, 0.5, 1, np.array([-1.0]), 0, np.array([1.0]), np.empty(0), np.empty(0))
        _interp_clamped(0.5, np.array([0.0, 1.0]), np.array([0.0, 1.0]))


# -- binary path dump ----------------------------------------------------------

_DUMP_MAGIC_LEN = 8


def dump_path(path: Path, fileobj):
    """Binary dump: 8-byte model tag, then seed, replicate, dt, N as
    little-endian 64-bit fields, then N+1 doubles of x and N doubles of dw."""
    tag = path.model_id.encode("utf-8")[:_DUMP_MAGIC_LEN].ljust(_DUMP_MAGIC_LEN, b"\x00")
    n = path.dw.shape[0]
    header = tag + struct.pack("<QQdQ", path.config.seed, path.config.replicate_index, path.dt, n)
    fileobj.write(header)
    fileobj.write(path.x.astype("<f8").tobytes())
    fileobj.write(path.dw.astype("<f8").tobytes())


def load_dump(fileobj):
    """Inverse of dump_path; returns (model_tag, seed, replicate, dt, x, dw)."""
    tag = fileobj.read(_DUMP_MAGIC_LEN).rstrip(b"\x00").decode("utf-8")
    seed, replicate, dt, n = struct.unpack("<QQdQ", fileobj.read(8 * 4))
    x = np.frombuffer(fileobj.read(8 * (n + 1)), dtype="<f8")
    dw = np.frombuffer(fileobj.read(8 * n), dtype="<f8")
    return tag, seed, replicate, dt, x, dw
