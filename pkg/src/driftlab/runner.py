"""Experiment orchestration and persistence.

Every command fans replicates out to a worker pool, assembles results in
replicate order, and writes CSV data files plus a plain-text manifest. Data
files are byte-identical across worker counts and repeat runs: floats are
rendered with 17 significant digits and all randomness flows from
(seed, replicate_index).
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from functools import partial

import numpy as np

from . import __version__, diagnostics, model as model_mod, sim
from .config import RunConfig, load_config
from .parallel import available_workers, replicate_map

COMMANDS = (
    "validate",
    "simulate",
    "estimate",
    "diagnose:chacon-ornstein",
    "diagnose:local-time",
    "diagnose:tightness",
    "diagnose:kernel-af",
    "rate-study",
    "report",
)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        count = 0
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
            count += 1
    return count


class RunError(RuntimeError):
    pass


def _horizon_label(t):
    return f"{int(round(t))}" if abs(t - round(t)) < 1e-9 else f"{t:g}"


def _simulate_cmd(cfg: RunConfig, out_dir, workers, dump):
    rows = replicate_map(
        partial(_summary_chunk, cfg.model, cfg.sim_template), cfg.replications, workers
    )
    rows = [r for chunk in rows for r in chunk]
    counts = {}
    counts["paths.csv"] = write_csv(
        os.path.join(out_dir, "paths.csv"),
        ["replicate", "n_steps", "x_final", "x_min", "x_max"],
        rows,
    )
    if dump:
        for i in range(cfg.replications):
            path = sim.simulate_path(cfg.model, cfg.sim_template.with_replicate(i))
            with open(os.path.join(out_dir, f"path_{i:06d}.bin"), "wb") as fh:
                sim.dump_path(path, fh)
    return counts


def _summary_chunk(model, template, lo, hi):
    out = []
    for i in range(lo, hi):
        path = sim.simulate_path(model, template.with_replicate(i))
        out.append((i, path.dw.shape[0], path.x[-1], path.x.min(), path.x.max()))
    return out


def _estimate_cmd(cfg: RunConfig, out_dir, workers):
    study_cfg = dataclasses.replace(cfg.sim_template)
    chunks = replicate_map(
        partial(
            diagnostics._trace_chunk,
            cfg.model,
            cfg.spec,
            cfg.x0,
            cfg.alpha,
            cfg.delta,
            cfg.kernel,
            study_cfg,
        ),
        cfg.replications,
        workers,
    )
    V, H, R, b_hat, denom, defined = (np.concatenate([c[k] for c in chunks], axis=0) for k in range(6))
    rows = []
    for i in range(cfg.replications):
        for j, t in enumerate(study_cfg.checkpoints):
            rows.append((i, t, V[i, j], H[i, j], R[i, j], b_hat[i, j], denom[i, j], bool(defined[i, j])))
    return {
        "trace.csv": write_csv(
            os.path.join(out_dir, "trace.csv"),
            ["replicate", "t", "V", "H", "R", "b_hat", "denom", "defined"],
            rows,
        )
    }


def _chacon_cmd(cfg: RunConfig, out_dir, workers):
    res = diagnostics.chacon_ornstein_check(
        cfg.model, cfg.f_interval, cfg.g_interval, cfg.sim_template, cfg.replications, workers
    )
    rows = [
        (t, res.median[j], res.q25[j], res.q75[j], res.theoretical, res.n_defined[j], res.n_flagged[j])
        for j, t in enumerate(res.checkpoints)
    ]
    return {
        "ratios.csv": write_csv(
            os.path.join(out_dir, "ratios.csv"),
            ["t", "median", "q25", "q75", "theoretical", "n_defined", "n_flagged"],
            rows,
        )
    }


def _local_time_cmd(cfg: RunConfig, out_dir, workers):
    res = diagnostics.local_time_uniform_error(
        cfg.model, cfg.spec, cfg.grid_points(), cfg.sim_template, cfg.replications, cfg.epsilon, workers
    )
    counts = {}
    counts["local_time_error.csv"] = write_csv(
        os.path.join(out_dir, "local_time_error.csv"),
        ["t", "sup_error", "v_hat"],
        [(t, res.sup_error[j], res.v_hat[j]) for j, t in enumerate(res.checkpoints)],
    )
    rows = []
    for gi, y in enumerate(res.grid):
        for j, t in enumerate(res.checkpoints):
            rows.append((y, t, res.l_bar[gi, j], res.l_bar[gi, j] / res.v_hat[j], res.target[gi], res.errors[gi, j]))
    counts["field.csv"] = write_csv(
        os.path.join(out_dir, "field.csv"),
        ["y", "t", "l_bar", "normalized", "target", "abs_error"],
        rows,
    )
    return counts


def _tightness_cmd(cfg: RunConfig, out_dir, workers):
    suite = diagnostics.tightness_suite(
        cfg.model,
        cfg.spec,
        cfg.x0,
        cfg.alpha,
        cfg.delta,
        cfg.kernel,
        cfg.sim_template,
        cfg.replications,
        cfg.grid_points(),
        cfg.epsilon,
        cfg.n_h,
        workers,
    )
    rows = []
    for name in sorted(suite.stats):
        curve = diagnostics.tightness_curve(
            suite.stats[name], cfg.thresholds, name, suite.bands[name], suite.checkpoints
        )
        for mi, m in enumerate(curve.thresholds):
            for j, t in enumerate(curve.checkpoints):
                rows.append((name, curve.band, m, t, curve.coverage[mi, j]))
    counts = {}
    counts["tightness.csv"] = write_csv(
        os.path.join(out_dir, "tightness.csv"),
        ["statistic", "band", "m", "t", "coverage"],
        rows,
    )
    counts["normalization.csv"] = write_csv(
        os.path.join(out_dir, "normalization.csv"),
        ["t", "v_hat", "h_det"],
        [(t, suite.v_hat[j], suite.h_det[j]) for j, t in enumerate(suite.checkpoints)],
    )
    return counts


def _kernel_af_cmd(cfg: RunConfig, out_dir, workers):
    res = diagnostics.kernel_af_limit_check(
        cfg.model,
        cfg.x0,
        cfg.psi(),
        cfg.h_rule,
        cfg.kernel,
        cfg.spec,
        cfg.sim_template,
        cfg.replications,
        workers,
    )
    return {
        "kernel_af.csv": write_csv(
            os.path.join(out_dir, "kernel_af.csv"),
            ["t", "h", "value", "target", "v_hat"],
            [
                (t, res.h[j], res.value[j], res.target, res.v_hat[j])
                for j, t in enumerate(res.checkpoints)
            ],
        )
    }


def _rate_cmd(cfg: RunConfig, out_dir, workers):
    study_cfg = dataclasses.replace(cfg.sim_template, checkpoints=cfg.T_grid)
    study_cfg.validate()
    study = diagnostics.rate_study(
        cfg.model,
        cfg.spec,
        cfg.x0,
        cfg.alpha,
        cfg.delta,
        cfg.kernel,
        study_cfg,
        cfg.replications,
        cfg.quantile,
        workers,
    )
    counts = {}
    for j, T in enumerate(study.T_grid):
        rows = []
        for i in range(study.n_paths):
            rows.append(
                (
                    i,
                    study.V[i, j],
                    study.H[i, j],
                    study.R[i, j],
                    study.b_hat[i, j],
                    abs(study.b_hat[i, j] - study.b_true) if study.defined[i, j] else math.nan,
                    study.scaled.samples[i, j],
                    bool(study.defined[i, j]),
                    bool(study.scaled.pre_entry[i, j]),
                )
            )
        name = f"errors_T{_horizon_label(T)}.csv"
        counts[name] = write_csv(
            os.path.join(out_dir, name),
            ["replicate", "V", "H", "R", "b_hat", "abs_error", "scaled_error", "defined", "pre_entry"],
            rows,
        )
    fit = study.fit
    counts["ratefit.csv"] = write_csv(
        os.path.join(out_dir, "ratefit.csv"),
        ["slope", "intercept", "stderr_slope", "quantile", "n_horizons"],
        [(fit.slope, fit.intercept, fit.stderr_slope, fit.quantile_used, len(fit.T_grid))],
    )
    return counts


def run_experiment(cfg, command, out_dir=None, seed=None, workers=None, dump=False, config_text=None):
    """Execute one command of a run configuration; returns the manifest dict.

    ``seed`` overrides the config seed; ``workers`` defaults to the
    available parallelism. The output directory receives the data files,
    a copy of the configuration (config.toml when the source text is
    provided, plus the resolved echo config_resolved.txt), and manifest.txt.
    """
    if isinstance(cfg, (str, os.PathLike)):
        if config_text is None:
            with open(cfg, "r") as fh:
                config_text = fh.read()
        cfg = load_config(cfg)
    if command not in COMMANDS or command == "report":
        raise RunError(f"unknown command {command!r}; expected one of {COMMANDS[:-1]}")
    if seed is not None:
        cfg = _reseed(cfg, int(seed))
    if workers is None:
        workers = available_workers()
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise RunError(f"output directory {out_dir!r} is not writable")

    start = time.monotonic()
    if command == "validate":
        counts = {}
    elif command == "simulate":
        counts = _simulate_cmd(cfg, out_dir, workers, dump)
    elif command == "estimate":
        counts = _estimate_cmd(cfg, out_dir, workers)
    elif command == "diagnose:chacon-ornstein":
        counts = _chacon_cmd(cfg, out_dir, workers)
    elif command == "diagnose:local-time":
        counts = _local_time_cmd(cfg, out_dir, workers)
    elif command == "diagnose:tightness":
        counts = _tightness_cmd(cfg, out_dir, workers)
    elif command == "diagnose:kernel-af":
        counts = _kernel_af_cmd(cfg, out_dir, workers)
    else:
        counts = _rate_cmd(cfg, out_dir, workers)
    elapsed = time.monotonic() - start

    if config_text is not None:
        with open(os.path.join(out_dir, "config.toml"), "w") as fh:
            fh.write(config_text)
    with open(os.path.join(out_dir, "config_resolved.txt"), "w") as fh:
        fh.write("\n".join(cfg.flat_lines()) + "\n")

    manifest = {
        "artifact": "driftlab",
        "version": __version__,
        "command": command,
        "config_digest": cfg.digest(),
        "seed": cfg.sim_template.seed,
        "workers": workers,
        "wall_clock_seconds": f"{elapsed:.3f}",
    }
    for name in sorted(counts):
        manifest[f"rows_{name}"] = counts[name]
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        for key, value in manifest.items():
            fh.write(f"{key} = {value}\n")
    return manifest


def _reseed(cfg: RunConfig, seed):
    template = dataclasses.replace(cfg.sim_template, seed=seed)
    resolved = {k: dict(v) for k, v in cfg.resolved.items()}
    resolved["sim"]["seed"] = seed
    return dataclasses.replace(cfg, sim_template=template, resolved=resolved)


def read_manifest(run_dir):
    path = os.path.join(run_dir, "manifest.txt")
    if not os.path.exists(path):
        raise RunError(f"no manifest in {run_dir!r}")
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if " = " not in line:
                raise RunError(f"corrupt manifest line: {line!r}")
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def _read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def target_exponent(model, alpha):
    """Rate exponent the regime predicts: -alpha/(2 alpha + 1) when mu(R) is
    finite, -alpha/(4 alpha + 2) for the sqrt(t)-type null-recurrent case."""
    try:
        mass = model_mod.invariant_mass(model)
    except model_mod.InconclusiveTailError:
        return None
    if math.isfinite(mass):
        return -alpha / (2.0 * alpha + 1.0)
    return -alpha / (4.0 * alpha + 2.0)


def emit_report(run_dir):
    """One-page plain-text summary of a completed run directory."""
    manifest = read_manifest(run_dir)
    cfg_path = os.path.join(run_dir, "config.toml")
    if not os.path.exists(cfg_path):
        raise RunError(f"no config.toml in {run_dir!r}")
    cfg = load_config(cfg_path)
    lines = []
    lines.append(f"run: {manifest.get('command', '?')}  (driftlab {manifest.get('version', '?')})")
    lines.append(
        f"model: {cfg.model.model_id}  drift={cfg.model.drift_kind}{cfg.model.drift_params}"
        f"  sigma={cfg.model.sigma_kind}{cfg.model.sigma_params}"
    )
    lines.append(f"seed: {manifest.get('seed')}  digest: {manifest.get('config_digest', '')[:16]}…")
    lines.append(f"recurrence classification: {model_mod.classify_recurrence(cfg.model)}")
    try:
        mass = model_mod.invariant_mass(cfg.model)
        regime = "ergodic" if math.isfinite(mass) else "null-recurrent"
        lines.append(f"invariant total mass: {'infinite' if math.isinf(mass) else f'{mass:.6g}'} ({regime})")
    except model_mod.InconclusiveTailError:
        lines.append("invariant total mass: inconclusive")

    tight_path = os.path.join(run_dir, "tightness.csv")
    if os.path.exists(tight_path):
        header, rows = _read_csv(tight_path)
        t_col = header.index("t")
        t_max = max(float(r[t_col]) for r in rows)
        lines.append(f"coverage at t = {t_max:g}:")
        lines.append("  statistic                band        m    coverage")
        for r in rows:
            if float(r[t_col]) == t_max:
                lines.append(f"  {r[0]:<24} {r[1]:<9} {float(r[2]):>5g}   {float(r[4]):.4f}")

    fit_path = os.path.join(run_dir, "ratefit.csv")
    if os.path.exists(fit_path):
        header, rows = _read_csv(fit_path)
        row = dict(zip(header, rows[0]))
        lines.append(
            f"rate slope: {float(row['slope']):.4f}  (stderr {float(row['stderr_slope']):.4f}, "
            f"quantile {float(row['quantile']):g})"
        )
        target = target_exponent(cfg.model, cfg.alpha)
        if target is None:
            lines.append("target exponent unavailable (inconclusive regime)")
        else:
            lines.append(f"target exponent {target:.4f}")

    ratio_path = os.path.join(run_dir, "ratios.csv")
    if os.path.exists(ratio_path):
        header, rows = _read_csv(ratio_path)
        last = dict(zip(header, rows[-1]))
        lines.append(
            f"occupation-ratio check at t = {float(last['t']):g}: median {float(last['median']):.4f} "
            f"vs theoretical {float(last['theoretical']):.4f} "
            f"({last['n_flagged']} of {cfg.replications} replicates undefined)"
        )

    err_path = os.path.join(run_dir, "local_time_error.csv")
    if os.path.exists(err_path):
        header, rows = _read_csv(err_path)
        last = rows[-1]
        lines.append(f"local-time sup error at t = {float(last[0]):g}: {float(last[1]):.4f}")

    for key, value in sorted(manifest.items()):
        if key.startswith("rows_"):
            lines.append(f"{key[5:]}: {value} rows")
    return "\n".join(lines)
