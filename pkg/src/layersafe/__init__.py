"""Layered safe control with recurrence-based tracking certificates.

A reduced-order planner (single integrator) commands a full-order plant
(double integrator) through a closed-form safety filter; tracking error is
certified by a recurrence condition rather than monotone decay, and the
combined recurrent barrier h_V = -V + alpha_e h yields a certified initial
set whose rollouts keep the true barrier h nonnegative, including under
bounded disturbances.
"""

from .barrier import (
    BarrierFn,
    ObstacleField,
    ValidityReport,
    check_cbf_condition,
    estimate_grad_bound,
    min_distance_barrier,
)
from .certify import (
    VERDICTS,
    CertificateReport,
    Grid,
    PointRecord,
    brute_force_containment_oracle,
    certify_initial_set,
    containment_gap,
    estimate_lipschitz,
    find_unsafe_initial_states,
)
from .controller import (
    ClosedLoopLaw,
    Gains,
    LawIntermediates,
    TrackingEnvelope,
    assemble_closed_loop,
    desired_velocity,
    linear_tracking_constants,
    safe_velocity,
    tracking_control,
)
from .dynamics import (
    BatchRollout,
    IntegratorConfig,
    ModelPair,
    ReachableTube,
    Trajectory,
    TrajectorySample,
    double_integrator_pair,
    integrate,
    integrate_batch,
    reachable_tube_estimate,
    relative_degree_residual,
    rk4_step,
)
from .errors import (
    ConfigurationError,
    DivergenceError,
    HypothesisViolationError,
    NoCertificateError,
    ScenarioError,
    SingularGradientError,
)
from .harness import (
    RunArtifacts,
    default_out_dir,
    effective_disturbance_bound,
    evaluate_expectations,
    negative_intervals,
    run_case_study,
    run_iss,
    run_recurrence_demo,
    run_simulate,
    write_plot_script,
)
from .recurrence import (
    ChainReport,
    ContainmentTimes,
    EnvelopeVerdict,
    RcbfVerdict,
    RecurrenceVerdict,
    RecurrentCbf,
    Rtf,
    build_rcbf,
    check_exponential_envelope,
    check_rcbf_recurrence,
    check_rtf_recurrence,
    check_safety_chain,
    containment_times,
    in_recurrent_set,
    norm_rtf,
)
from .robustness import (
    Disturbance,
    IssEnvelope,
    IssVerdict,
    build_iss_envelope,
    check_iss_envelope,
    check_practical_rtf,
    estimate_mu_gain,
    in_robust_set,
    make_disturbance,
)
from .scenario import (
    DisturbanceSpec,
    Expectation,
    RtfConstants,
    Scenario,
    build_barrier,
    build_disturbance,
    build_law,
    build_pair,
    build_rtf,
    build_scenario_rcbf,
    bundled_scenario_path,
    initial_state,
    initial_states,
    load_scenario,
    parse_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierFn",
    "BatchRollout",
    "CertificateReport",
    "ChainReport",
    "ClosedLoopLaw",
    "ConfigurationError",
    "ContainmentTimes",
    "Disturbance",
    "DisturbanceSpec",
    "DivergenceError",
    "EnvelopeVerdict",
    "Expectation",
    "Gains",
    "Grid",
    "HypothesisViolationError",
    "IntegratorConfig",
    "IssEnvelope",
    "IssVerdict",
    "LawIntermediates",
    "ModelPair",
    "NoCertificateError",
    "ObstacleField",
    "PointRecord",
    "RcbfVerdict",
    "ReachableTube",
    "RecurrenceVerdict",
    "RecurrentCbf",
    "Rtf",
    "RtfConstants",
    "RunArtifacts",
    "Scenario",
    "ScenarioError",
    "SingularGradientError",
    "TrackingEnvelope",
    "Trajectory",
    "TrajectorySample",
    "VERDICTS",
    "ValidityReport",
    "assemble_closed_loop",
    "brute_force_containment_oracle",
    "build_barrier",
    "build_disturbance",
    "build_iss_envelope",
    "build_law",
    "build_pair",
    "build_rcbf",
    "build_rtf",
    "build_scenario_rcbf",
    "bundled_scenario_path",
    "certify_initial_set",
    "check_cbf_condition",
    "check_exponential_envelope",
    "check_iss_envelope",
    "check_practical_rtf",
    "check_rcbf_recurrence",
    "check_rtf_recurrence",
    "check_safety_chain",
    "containment_gap",
    "containment_times",
    "default_out_dir",
    "desired_velocity",
    "double_integrator_pair",
    "effective_disturbance_bound",
    "estimate_grad_bound",
    "estimate_lipschitz",
    "estimate_mu_gain",
    "evaluate_expectations",
    "find_unsafe_initial_states",
    "in_recurrent_set",
    "in_robust_set",
    "initial_state",
    "initial_states",
    "integrate",
    "integrate_batch",
    "linear_tracking_constants",
    "load_scenario",
    "make_disturbance",
    "min_distance_barrier",
    "negative_intervals",
    "norm_rtf",
    "parse_scenario",
    "reachable_tube_estimate",
    "relative_degree_residual",
    "rk4_step",
    "run_case_study",
    "run_iss",
    "run_recurrence_demo",
    "run_simulate",
    "safe_velocity",
    "tracking_control",
    "write_plot_script",
]
