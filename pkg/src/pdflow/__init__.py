"""Primal-dual flow engine for linearly constrained convex problems."""

from .integrator import (
    IntegrationError,
    IntegratorSettings,
    NonFiniteField,
    StepBudgetExceeded,
    StepUnderflow,
    Trajectory,
    fixed_step_order_probe,
    integrate,
)
from .problem import (
    CallableObjective,
    ProblemInstance,
    QuadraticObjective,
    SaddlePoint,
    augmented_lagrangian,
    grad_x_lagrangian,
    kkt_saddle_point,
    lipschitz_constant,
    load_problem,
    minimal_norm_multiplier,
    minimal_norm_solution,
    save_problem,
    spectral_norm,
)
from .rng import SplitMix64
from .schedule import (
    CoefficientSchedule,
    ConditionReport,
    DampingFamily,
    ScalingFamily,
    TikhonovFamily,
    audit_conditions,
    closed_form_fast_integral,
    closed_form_slow_integral,
    eval_schedule,
)
from .dynamics import (
    DynamicsConfig,
    SystemState,
    flat_field,
    local_lipschitz_bound,
    pack,
    rhs,
    unpack,
)
from .analysis import (
    DecayAudit,
    METRIC_COLUMNS,
    RateFit,
    audit_decay_inequality,
    compute_metrics,
    fit_rate,
    lyapunov_G,
    lyapunov_Ghat,
    lyapunov_Gtilde,
    tikhonov_point,
)
from .fastpath import can_fast_path, integrate_fast, warm_up
from .experiments import (
    ExperimentSpec,
    ProblemReferences,
    RunReport,
    build_random_qp,
    build_toy,
    run_experiment,
    run_sweep,
)

__version__ = "0.1.0"
