"""Run-configuration files: a strict TOML schema with echoed defaults.

Unknown keys are errors, never silently ignored; every default the run will
use is materialized into the resolved configuration so that two runs with
the same digest are guaranteed to have seen the same parameters.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import tomli

from . import diagnostics, estimate, model as model_mod, sim


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "model": {
        "kind", "theta", "c", "alpha_b", "table_x", "table_b",
        "sigma", "s", "s0", "s1", "growth_constant", "holder", "id",
    },
    "sim": {"x_init", "t_max", "dt", "checkpoints", "t_min", "seed", "replications"},
    "estimate": {"x0", "alpha", "delta", "g_interval", "kernel", "blind_mode"},
    "diagnostics": {
        "thresholds", "quantile", "grid", "epsilon", "T_grid",
        "f_interval", "psi", "h_rule_c", "h_rule_p", "n_h",
    },
    "output": {"directory"},
}
_HOLDER_KEYS = {"x0", "alpha", "gamma", "delta"}

_DRIFT_PARAM_KEYS = {
    "zero": set(),
    "linear": {"theta"},
    "constant": {"c"},
    "compact_bump": {"c"},
    "holder_kink": {"alpha_b"},
    "tabulated": {"table_x", "table_b"},
}
_SIGMA_PARAM_KEYS = {"constant": {"s"}, "affine_envelope": {"s0", "s1"}}


def _reject_unknown(section, data, allowed):
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")


def _num(data, section, key, default=None, required=False):
    if key not in data:
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    return float(v)


def _build_model(sec):
    _reject_unknown("model", sec, _SECTIONS["model"])
    kind = sec.get("kind")
    if kind not in model_mod.DRIFT_KINDS:
        raise ConfigError(f"model.kind must be one of {model_mod.DRIFT_KINDS}, got {kind!r}")
    for key in _DRIFT_PARAM_KEYS[kind] - set(sec):
        if kind != "compact_bump":
            raise ConfigError(f"missing required key model.{key} for drift family {kind!r}")
    for other_kind, keys in _DRIFT_PARAM_KEYS.items():
        if other_kind != kind:
            stray = (keys - _DRIFT_PARAM_KEYS[kind]) & set(sec)
            if stray:
                raise ConfigError(
                    f"key model.{sorted(stray)[0]} does not belong to drift family {kind!r}"
                )

    sigma_kind = sec.get("sigma", "constant")
    if sigma_kind not in model_mod.SIGMA_KINDS:
        raise ConfigError(f"model.sigma must be one of {model_mod.SIGMA_KINDS}, got {sigma_kind!r}")
    if sigma_kind == "constant":
        s = _num(sec, "model", "s", default=1.0)
        sigma_params = (s,)
        s_bound = s * s
    else:
        s0 = _num(sec, "model", "s0", required=True)
        s1 = _num(sec, "model", "s1", required=True)
        sigma_params = (s0, s1)
        s_bound = (abs(s0) + abs(s1)) ** 2
    if "s" in sec and sigma_kind != "constant":
        raise ConfigError("key model.s does not belong to sigma family 'affine_envelope'")

    if kind == "zero":
        drift_params = ()
        b_bound = 0.0
        holder_defaults = dict(x0=0.0, alpha=1.0, gamma=1.0, delta=0.5)
    elif kind == "linear":
        theta = _num(sec, "model", "theta", required=True)
        drift_params = (theta,)
        b_bound = abs(theta)
        holder_defaults = dict(x0=0.0, alpha=1.0, gamma=max(abs(theta), 1e-12), delta=0.5)
    elif kind == "constant":
        c = _num(sec, "model", "c", required=True)
        drift_params = (c,)
        b_bound = abs(c)
        holder_defaults = dict(x0=0.0, alpha=1.0, gamma=max(abs(c), 1e-6), delta=0.5)
    elif kind == "compact_bump":
        c = _num(sec, "model", "c", default=1.0)
        drift_params = (c,)
        b_bound = abs(c)
        holder_defaults = dict(x0=0.0, alpha=1.0, gamma=max(abs(c) * 1.0000001, 1e-12), delta=0.5)
    elif kind == "holder_kink":
        alpha_b = _num(sec, "model", "alpha_b", required=True)
        drift_params = (alpha_b,)
        b_bound = 1.0
        holder_defaults = dict(x0=0.0, alpha=alpha_b, gamma=1.0, delta=0.5)
    else:
        xs = tuple(float(v) for v in sec["table_x"])
        bs = tuple(float(v) for v in sec["table_b"])
        drift_params = (xs, bs)
        b_bound = max(abs(v) for v in bs)
        holder_defaults = dict(x0=0.0, alpha=1.0, gamma=1.0, delta=0.5)

    holder_sec = dict(sec.get("holder", {}))
    _reject_unknown("model.holder", holder_sec, _HOLDER_KEYS)
    holder_vals = dict(holder_defaults)
    for key in _HOLDER_KEYS & set(holder_sec):
        holder_vals[key] = _num(holder_sec, "model.holder", key, required=True)
    holder = model_mod.HolderSpec(**holder_vals)
    if not 0.0 < holder.alpha <= 1.0:
        raise ConfigError(f"model.holder.alpha must lie in (0, 1], got {holder.alpha:g}")

    growth = _num(sec, "model", "growth_constant", default=max(1.0, b_bound, s_bound))
    model_id = sec.get("id", "")
    m = model_mod.DiffusionModel(kind, drift_params, sigma_kind, sigma_params, growth, holder, model_id)
    try:
        m.validate()
    except model_mod.ModelValidationError as exc:
        raise ConfigError(f"model: {exc}") from exc
    return m


@dataclass
class RunConfig:
    model: model_mod.DiffusionModel
    sim_template: sim.PathConfig
    replications: int
    x0: float
    alpha: float
    delta: float
    g_interval: tuple
    kernel_name: str
    kernel: model_mod.KernelSpec
    blind_mode: bool
    spec: estimate.EquivalentSpec
    thresholds: tuple
    quantile: float
    grid: tuple  # (lo, hi, points)
    epsilon: float
    T_grid: tuple
    f_interval: tuple
    psi_name: str
    h_rule: diagnostics.PowerLawBandwidth
    n_h: int
    out_dir: str
    resolved: dict

    def grid_points(self):
        import numpy as np

        lo, hi, n = self.grid
        return np.linspace(lo, hi, int(n))

    def psi(self):
        return self.model.sigma2 if self.psi_name == "sigma2" else diagnostics.unit_psi

    def flat_lines(self):
        lines = []

        def fmt(v):
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return f"{v:.17g}"
            if isinstance(v, (list, tuple)):
                return "[" + ", ".join(fmt(x) for x in v) + "]"
            return str(v)

        for section, data in sorted(self.resolved.items()):
            for key, value in sorted(data.items()):
                lines.append(f"{section}.{key} = {fmt(value)}")
        return lines

    def digest(self):
        return hashlib.sha256("\n".join(self.flat_lines()).encode("utf-8")).hexdigest()


def load_config(src):
    """Parse and fully validate a run configuration.

    ``src`` may be a path to a TOML file or TOML text itself.
    """
    text = None
    if isinstance(src, (str, os.PathLike)) and os.path.exists(str(src)):
        with open(src, "rb") as fh:
            raw = tomli.load(fh)
    else:
        text = str(src)
        if "[" not in text and "=" not in text:
            raise ConfigError(f"no such config file: {src!r}")
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config does not parse as TOML: {exc}") from exc

    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    for required in ("model", "sim"):
        if required not in raw:
            raise ConfigError(f"missing required section [{required}]")

    model = _build_model(dict(raw["model"]))

    sim_sec = dict(raw["sim"])
    _reject_unknown("sim", sim_sec, _SECTIONS["sim"])
    x_init = _num(sim_sec, "sim", "x_init", default=0.0)
    t_max = _num(sim_sec, "sim", "t_max", required=True)
    if t_max <= 0.0:
        raise ConfigError("sim.t_max must be positive")
    dt = _num(sim_sec, "sim", "dt", default=None)
    if dt is None:
        dt = sim.default_dt(t_max)
    if dt <= 0.0:
        raise ConfigError("sim.dt must be positive")
    if "seed" not in sim_sec or isinstance(sim_sec["seed"], bool) or not isinstance(sim_sec["seed"], int):
        raise ConfigError("sim.seed is required and must be an integer")
    seed = int(sim_sec["seed"])
    if seed < 0:
        raise ConfigError("sim.seed must be nonnegative")
    replications = sim_sec.get("replications")
    if not isinstance(replications, int) or isinstance(replications, bool) or replications < 1:
        raise ConfigError("sim.replications is required and must be an integer >= 1")
    t_min = _num(sim_sec, "sim", "t_min", default=None)
    cp_raw = sim_sec.get("checkpoints", 12)
    if isinstance(cp_raw, int) and not isinstance(cp_raw, bool):
        checkpoints = sim.log_checkpoints(t_max, dt, cp_raw, t_min)
    elif isinstance(cp_raw, (list, tuple)):
        checkpoints = tuple(float(t) for t in cp_raw)
    else:
        raise ConfigError("sim.checkpoints must be a count or a list of times")
    template = sim.PathConfig(x_init, t_max, dt, checkpoints, seed, 0)
    try:
        template.validate()
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    est_sec = dict(raw.get("estimate", {}))
    _reject_unknown("estimate", est_sec, _SECTIONS["estimate"])
    x0 = _num(est_sec, "estimate", "x0", default=model.holder.x0)
    alpha = _num(est_sec, "estimate", "alpha", default=model.holder.alpha)
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"estimate.alpha must lie in (0, 1], got {alpha:g}")
    delta = _num(est_sec, "estimate", "delta", default=0.5)
    if delta <= 0.0:
        raise ConfigError("estimate.delta must be positive")
    g_interval = tuple(float(v) for v in est_sec.get("g_interval", [0.0, 1.0]))
    if len(g_interval) != 2 or not g_interval[0] < g_interval[1]:
        raise ConfigError("estimate.g_interval must be [a, b] with a < b")
    kernel_name = est_sec.get("kernel", "quartic")
    if kernel_name not in model_mod.KERNELS:
        raise ConfigError(f"estimate.kernel must be one of {sorted(model_mod.KERNELS)}, got {kernel_name!r}")
    kernel = model_mod.KERNELS[kernel_name]
    blind_mode = est_sec.get("blind_mode", False)
    if not isinstance(blind_mode, bool):
        raise ConfigError("estimate.blind_mode must be a boolean")
    try:
        spec = estimate.make_equivalent_spec(model, g_interval, x_init, blind=blind_mode)
    except model_mod.InconclusiveTailError as exc:  # pragma: no cover - interval mode never hits this
        raise ConfigError(str(exc)) from exc

    diag_sec = dict(raw.get("diagnostics", {}))
    _reject_unknown("diagnostics", diag_sec, _SECTIONS["diagnostics"])
    thresholds = tuple(float(m) for m in diag_sec.get("thresholds", [2.0, 5.0, 10.0, 20.0]))
    if any(m <= 0 for m in thresholds) or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("diagnostics.thresholds must be positive and increasing")
    quantile = _num(diag_sec, "diagnostics", "quantile", default=0.5)
    if not 0.0 < quantile < 1.0:
        raise ConfigError("diagnostics.quantile must lie in (0, 1)")
    grid_raw = diag_sec.get("grid", [-1.0, 1.0, 21])
    if len(grid_raw) != 3 or int(grid_raw[2]) < 1 or not float(grid_raw[0]) < float(grid_raw[1]):
        raise ConfigError("diagnostics.grid must be [lo, hi, points] with lo < hi and points >= 1")
    grid = (float(grid_raw[0]), float(grid_raw[1]), int(grid_raw[2]))
    epsilon = _num(diag_sec, "diagnostics", "epsilon", default=None)
    if epsilon is None:
        epsilon = 5.0 * math.sqrt(dt)
    if epsilon <= 0.0:
        raise ConfigError("diagnostics.epsilon must be positive")
    default_T = [t_max / 100.0, t_max / 10.0, t_max]
    T_grid = tuple(float(t) for t in diag_sec.get("T_grid", default_T))
    for t in T_grid:
        n = t / dt
        if abs(n - round(n)) > 1e-6:
            raise ConfigError(f"diagnostics.T_grid entry {t!r} is not a multiple of dt = {dt:g}")
        if not 0.0 < t <= t_max:
            raise ConfigError(f"diagnostics.T_grid entry {t:g} outside (0, t_max]")
    f_interval = tuple(float(v) for v in diag_sec.get("f_interval", [0.0, 2.0]))
    if len(f_interval) != 2 or not f_interval[0] < f_interval[1]:
        raise ConfigError("diagnostics.f_interval must be [a, b] with a < b")
    psi_name = diag_sec.get("psi", "one")
    if psi_name not in ("one", "sigma2"):
        raise ConfigError(f"diagnostics.psi must be 'one' or 'sigma2', got {psi_name!r}")
    h_rule = diagnostics.PowerLawBandwidth(
        c=_num(diag_sec, "diagnostics", "h_rule_c", default=1.0),
        p=_num(diag_sec, "diagnostics", "h_rule_p", default=1.0 / 3.0),
        cap=delta,
    )
    n_h = diag_sec.get("n_h", 16)
    if not isinstance(n_h, int) or isinstance(n_h, bool) or n_h < 1:
        raise ConfigError("diagnostics.n_h must be an integer >= 1")

    out_sec = dict(raw.get("output", {}))
    _reject_unknown("output", out_sec, _SECTIONS["output"])
    out_dir = out_sec.get("directory", "runs")
    if not isinstance(out_dir, str):
        raise ConfigError("output.directory must be a string")

    resolved = {
        "model": {
            "kind": model.drift_kind,
            "drift_params": _flatten_params(model.drift_params),
            "sigma": model.sigma_kind,
            "sigma_params": list(model.sigma_params),
            "growth_constant": model.growth_constant,
            "holder_x0": model.holder.x0,
            "holder_alpha": model.holder.alpha,
            "holder_gamma": model.holder.gamma,
            "holder_delta": model.holder.delta,
            "id": model.model_id,
        },
        "sim": {
            "x_init": x_init,
            "t_max": t_max,
            "dt": dt,
            "checkpoints": list(checkpoints),
            "seed": seed,
            "replications": replications,
        },
        "estimate": {
            "x0": x0,
            "alpha": alpha,
            "delta": delta,
            "g_interval": list(g_interval),
            "kernel": kernel_name,
            "blind_mode": blind_mode,
            "normalization": spec.normalization,
        },
        "diagnostics": {
            "thresholds": list(thresholds),
            "quantile": quantile,
            "grid": list(grid),
            "epsilon": epsilon,
            "T_grid": list(T_grid),
            "f_interval": list(f_interval),
            "psi": psi_name,
            "h_rule_c": h_rule.c,
            "h_rule_p": h_rule.p,
            "n_h": n_h,
        },
        "output": {"directory": out_dir},
    }
    return RunConfig(
        model=model,
        sim_template=template,
        replications=replications,
        x0=x0,
        alpha=alpha,
        delta=delta,
        g_interval=g_interval,
        kernel_name=kernel_name,
        kernel=kernel,
        blind_mode=blind_mode,
        spec=spec,
        thresholds=thresholds,
        quantile=quantile,
        grid=grid,
        epsilon=epsilon,
        T_grid=T_grid,
        f_interval=f_interval,
        psi_name=psi_name,
        h_rule=h_rule,
        n_h=n_h,
        out_dir=out_dir,
        resolved=resolved,
    )


def _flatten_params(params):
    out = []
    for p in params:
        if isinstance(p, (list, tuple)):
            out.extend(float(v) for v in p)
        else:
            out.append(float(p))
    return out
