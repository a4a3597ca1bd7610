"""driftlab: a Monte Carlo laboratory for one-dimensional recurrent diffusions.

Simulates dX = sigma(X) dW + b(X) dt, estimates local times and normalized
additive functionals, runs the adaptive kernel drift estimator with a
data-driven random bandwidth, and checks the distributional tightness and
convergence-rate behavior of all of these against their theoretical targets.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    DiffusionModel,
    HolderSpec,
    KernelSpec,
    QUARTIC,
    classify_recurrence,
    compact_bump,
    constant_drift,
    holder_kink,
    invariant_density,
    invariant_mass,
    kernel_validate,
    linear_drift,
    tabulated_drift,
    zero_drift,
)
from .sim import Path, PathConfig, default_dt, log_checkpoints, noise_stream, simulate_path  # noqa: F401
from .functionals import (  # noqa: F401
    FunctionalSeries,
    LocalTimeField,
    additive_functional,
    default_epsilon,
    kernel_af,
    kernel_martingale,
    local_time_field,
    occupation_local_time,
    tanaka_local_time,
)
from .estimate import (  # noqa: F401
    AdaptiveTrace,
    EquivalentCurve,
    EquivalentSpec,
    adaptive_estimate,
    bandwidth_and_rate,
    check_spec,
    deterministic_equivalent,
    invariant_g_mass,
    make_equivalent_spec,
    nadaraya_watson,
    observable_iaf,
)
from .diagnostics import (  # noqa: F401
    PowerLawBandwidth,
    RateFit,
    TightnessCurve,
    bandwidth_grid,
    chacon_ornstein_check,
    kernel_af_limit_check,
    local_time_uniform_error,
    rate_regression,
    rate_study,
    scaled_drift_errors,
    tightness_curve,
    tightness_suite,
)
from .config import ConfigError, RunConfig, load_config  # noqa: F401
from .runner import emit_report, run_experiment  # noqa: F401
