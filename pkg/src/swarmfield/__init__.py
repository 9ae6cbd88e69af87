"""Closed-loop density control of swarms on box domains.

A continuum swarm is a density rho transported by a velocity the swarm
computes for itself, pointwise, from local derivatives of rho and of a
target density mu. The package provides the conservative transport
solver, the controller catalog, transport metrics with certified
bounds, flow-based analysis of the linearized loop, a finite-agent
bridge, and a scenario-driven experiment runner.
"""

from .analysis import (
    DecayFit,
    FlowMap,
    Lambda1Estimate,
    MixingReport,
    Rotation,
    Translation,
    WeakConvergenceProfile,
    cat_map_correlation,
    equivariance_residual,
    fit_decay,
    flow_map,
    heat_reference,
    jacobian_along_flow,
    linearize_pointwise,
    mixing_correlation,
    neumann_lambda1,
    transport_linear,
    weak_convergence_probe,
)
from .catalog import (
    AnalyticVectorField,
    density_catalog,
    make_density,
    make_error_field,
    make_vector_field,
    scalar_function,
    scalar_function_catalog,
    vector_field_catalog,
)
from .controllers import (
    Controller,
    ErrorGradientController,
    PointwiseController,
    apply,
    constant_direction,
    controller_catalog,
    error_feedback_field,
    error_gradient,
    make_controller,
    pointwise,
    transport_field,
    zero,
)
from .dynamics import (
    IntegratorConfig,
    Trajectory,
    cfl_dt,
    select_dt,
    simulate,
    step_continuity,
)
from .errors import (
    CrossCheckFailureError,
    DensityFloorError,
    FlowEscapeError,
    InitializerUnknownError,
    MassMismatchError,
    NoConvergenceError,
    NonFiniteStateError,
    NotAFixedPointError,
    NotInvariantError,
    NotZeroMeanError,
    PositivityLossWarning,
    SchemaError,
    SolverDivergedError,
    SolverStallError,
    SwarmfieldError,
    UnsupportedTransformError,
    ViolationError,
    WindowEmptyError,
)
from .grid import (
    GridSpec,
    Jet,
    ScalarField,
    VectorField,
    as_density,
    build_grid,
    divergence,
    dot,
    gradient,
    integrate,
    is_admissible,
    jet_at,
    laplacian,
    lp_norm,
    project_admissible,
)
from .io import dump_json, load_field, save_field
from .metrics import (
    BoundReport,
    MetricReport,
    TransportPlan,
    check_w2_h1_sandwich,
    check_w2_lp_bound,
    h_minus1_norm,
    lp_distance,
    poisson_zero_mean,
    w2_1d,
    w2_exact_small,
    w2_sinkhorn,
)
from .particles import (
    AgentSet,
    AgentTrajectory,
    KdeConfig,
    empirical_vs_continuum,
    kde_density,
    sample_density,
    simulate_agents,
    step_agents,
)
from .runner import RunReport, list_catalog, run_scenario
from .scenario import Scenario, parse_scenario, scenario_from_dict

__version__ = "0.1.0"
