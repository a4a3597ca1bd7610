"""The growth normalization v_t and occupation-ratio limits.

v_t is the expected occupation integral of a normalized indicator:
the universal yardstick against which every integrable occupation
functional of the same diffusion is tight. Ergodic models give v_t ~ t,
the driftless model gives v_t ~ sqrt(t); the point of the normalization is
that nothing downstream needs to know which case it is in.

The occupation-ratio (Chacon-Ornstein) limit is the second workhorse: the
ratio of two occupation integrals converges to the ratio of their
invariant-measure weights, deterministically identifiable from data.
"""

import math

import driftlab as dl

WORKERS = 2

bm = dl.zero_drift()
ou = dl.linear_drift(-1.0, model_id="ou")

print("growth of v_t, 200 replicates each:")
cfg = dl.PathConfig(0.0, 400.0, 1e-2, checkpoints=(100.0, 200.0, 400.0), seed=11)
spec_bm = dl.make_equivalent_spec(bm, (0.0, 1.0), 0.0)
curve = dl.deterministic_equivalent(bm, spec_bm, cfg, 200, workers=WORKERS)
print(f"  driftless: v_hat = {[f'{v:.2f}' for v in curve.v_hat]}")
print(f"             sqrt(t/2pi) = {[f'{math.sqrt(t / (2 * math.pi)):.2f}' for t in cfg.checkpoints]}")

spec_ou = dl.make_equivalent_spec(ou, (0.0, 1.0), 0.0)
curve = dl.deterministic_equivalent(ou, spec_ou, cfg, 200, workers=WORKERS)
print(f"  ergodic:   v_hat / t = {[f'{v / t:.3f}' for v, t in zip(curve.v_hat, cfg.checkpoints)]} (tends to 1)")

print("\noccupation ratio time-in-[0,2] / time-in-[0,1] for the driftless model:")
res = dl.chacon_ornstein_check(bm, (0.0, 2.0), (0.0, 1.0), cfg, 200, workers=WORKERS)
for j, t in enumerate(res.checkpoints):
    print(
        f"  t={t:>5.0f}: median {res.median[j]:.3f}  IQR [{res.q25[j]:.3f}, {res.q75[j]:.3f}]"
        f"  (invariant prediction {res.theoretical:.1f}, {res.n_flagged[j]} undefined)"
    )
