"""Projective integration for slow-fast SDEs driven by symmetric stable noise.

The package covers the full pipeline: exact stable sampling and densities
(:mod:`levypim.stable`), the direct stiff solver (:mod:`levypim.direct`), the
projective integrator (:mod:`levypim.pim`), the averaged dynamics
(:mod:`levypim.effective`), strong/weak error studies (:mod:`levypim.analysis`)
and a reproduction-oriented CLI (:mod:`levypim.cli`).
"""

from .analysis import (
    ErrorReport,
    LevelResult,
    WeakTestSuite,
    convergence_study,
    fit_log2_slope,
    lp_path_error,
    pim_error_bound,
    schedule_levels,
    strong_error_ensemble,
    weak_error_ensemble,
)
from .direct import em_step, probe_contraction, simulate_full
from .effective import (
    EffectiveDrift,
    abar_formulas,
    compute_abar_quadrature,
    draw_slow_noise,
    effective_drift,
    ou_time_average_exp_square,
    run_effective,
)
from .errors import (
    BudgetError,
    ConfigError,
    EnsembleFailure,
    LevyPimError,
    NumericalError,
    ParameterError,
    PathOverflowError,
)
from .pim import MicroBatch, PimSchedule, macro_step, micro_solve, run_pim
from .rng import RngStream, pack_stream_id
from .stable import (
    StableSpec,
    empirical_cf,
    sample_standard_stable,
    stable_density,
    stable_increment,
)
from .systems import DRIFT_REGISTRY, SlowFastSystem, Trajectory, make_system

__version__ = "0.1.0"
