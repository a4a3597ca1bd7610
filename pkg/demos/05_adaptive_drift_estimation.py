"""Drift estimation with a data-driven random bandwidth.

The estimator is the kernel quotient b_hat = int phi_h dX / int phi_h dt.
Its bandwidth is not tuned by hand: the observable occupation integral V_t
of a reference interval sets H_t = V_t^(-1/(2a+1)) ^ delta, and the same
quantity sets the claimed accuracy R_t = V_t^(a/(2a+1)). The pair adapts
automatically to how recurrent the process is: more visits, smaller window,
faster rate.
"""

import dataclasses

import numpy as np

import driftlab as dl

WORKERS = 2

ou = dl.linear_drift(-1.0, model_id="ou")
spec = dl.make_equivalent_spec(ou, (0.0, 1.0), 0.0)

print("one path, the whole adaptive trace (true b(0) = 0):")
cfg = dl.PathConfig(0.0, 1000.0, 1e-2, checkpoints=(10.0, 100.0, 1000.0), seed=5)
path = dl.simulate_path(ou, cfg)
trace = dl.adaptive_estimate(path, 0.0, 1.0, 0.5, spec, dl.QUARTIC)
print(f"  {'t':>6} {'V_t':>9} {'H_t':>7} {'R_t':>7} {'b_hat':>8} {'R|err|':>7}")
for j, t in enumerate(trace.checkpoints):
    scaled = trace.R[j] * abs(trace.b_hat[j] - 0.0)
    print(
        f"  {t:>6.0f} {trace.V[j]:>9.2f} {trace.H[j]:>7.3f} {trace.R[j]:>7.2f}"
        f" {trace.b_hat[j]:>+8.4f} {scaled:>7.3f}"
    )

print("\nrate study over 100 replicates (expect log-log slope near -1/3):")
study_cfg = dataclasses.replace(cfg, checkpoints=(10.0, 100.0, 1000.0))
study = dl.rate_study(ou, spec, 0.0, 1.0, 0.5, dl.QUARTIC, study_cfg, 100, workers=WORKERS, min_defined=50)
for j, T in enumerate(study.T_grid):
    med = np.nanmedian(np.where(study.defined[:, j], np.abs(study.b_hat[:, j]), np.nan))
    print(f"  T={T:>6.0f}: median |b_hat - b(0)| = {med:.4f}")
print(f"  fitted exponent {study.fit.slope:+.4f} (stderr {study.fit.stderr_slope:.4f})")
print("  null-recurrent models instead approach -1/6: run the bump_rate config to see it")
