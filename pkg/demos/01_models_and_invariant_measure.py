"""Tour of the model layer: coefficient families, invariant measure, recurrence.

Every diffusion here is dX = sigma(X) dW + b(X) dt with an explicit invariant
density mu(x) = 2/sigma^2(x) * exp(int_0^x 2b/sigma^2). Whether mu has finite
total mass splits the recurrent world into ergodic and null-recurrent halves,
and that split drives everything downstream: how fast occupation integrals
grow, and what convergence rate the drift estimator can achieve.
"""

import math

import driftlab as dl
from driftlab.model import InconclusiveTailError

models = {
    "driftless (bm)": dl.zero_drift(),
    "mean-reverting (ou)": dl.linear_drift(-1.0, model_id="ou"),
    "compact bump": dl.compact_bump(1.0),
    "holder kink a=0.5": dl.holder_kink(0.5),
    "constant drift +1": dl.constant_drift(1.0),
}

print(f"{'model':<22} {'mu(0)':>8} {'mu[0,1]':>9} {'mu(R)':>10} {'classification':>16}")
for name, model in models.items():
    model.validate()
    mu0 = dl.invariant_density(model, 0.0)
    part = dl.invariant_mass(model, (0.0, 1.0))
    try:
        total = dl.invariant_mass(model)
        total_s = "infinite" if math.isinf(total) else f"{total:.4f}"
    except InconclusiveTailError:
        total_s = "inconclusive"
    print(f"{name:<22} {mu0:>8.4f} {part:>9.4f} {total_s:>10} {dl.classify_recurrence(model):>16}")

print()
print("The mean-reverting model is ergodic: mu(R) = 2*sqrt(pi) =", f"{2 * math.sqrt(math.pi):.6f}")
print("Driftless and bump models keep infinite mass: null-recurrent.")
print()
print("Kernel used by all estimators (compactly supported, C^1, unit mass):")
print(dl.kernel_validate(dl.QUARTIC))
