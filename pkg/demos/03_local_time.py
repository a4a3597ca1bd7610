"""Two local-time estimators and the spatial local-time field.

The local time at a level y measures how much of the path's quadratic
variation is spent there. The Tanaka estimator reconstructs it from the
path's upcrossing bookkeeping; the occupation estimator counts time in a
shrinking window. For driftless unit-noise motion the mean at the origin is
known in closed form, E L_t^0 = sqrt(2 t / pi), which makes a clean oracle.
"""

import math

import numpy as np

import driftlab as dl

bm = dl.zero_drift()
T = 100.0
cfg = dl.PathConfig(0.0, T, 1e-3, checkpoints=(25.0, 50.0, 100.0), seed=7)

n_rep = 300
tanaka = np.zeros(3)
occup = np.zeros(3)
for i in range(n_rep):
    path = dl.simulate_path(bm, cfg.with_replicate(i))
    tanaka += dl.tanaka_local_time(path, 0.0).values
    occup += dl.occupation_local_time(path, 0.0).values
tanaka /= n_rep
occup /= n_rep

print(f"{'t':>6} {'E L (oracle)':>14} {'tanaka mean':>12} {'occupation mean':>16}")
for j, t in enumerate(cfg.checkpoints):
    oracle = math.sqrt(2.0 * t / math.pi)
    print(f"{t:>6.0f} {oracle:>14.4f} {tanaka[j]:>12.4f} {occup[j]:>16.4f}")

# the field estimator shares one pass over the path for a whole grid
grid = np.linspace(-1.0, 1.0, 9)
path = dl.simulate_path(bm, cfg.with_replicate(0))
field = dl.local_time_field(path, grid, epsilon=0.05)
print("\nsingle-path local-time field at t = 100 (window 0.05):")
for gi, y in enumerate(grid):
    bar = "#" * int(round(field.values[gi, -1]))
    print(f"  y={y:+.2f}  L={field.values[gi, -1]:7.3f}  {bar}")
print("(one realization is rough; replicate means smooth it out)")
