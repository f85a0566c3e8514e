"""Sampled stochastic optimal control with barrier-certified safety filtering.

The pieces fit together in one pipeline: passive-dynamics Monte Carlo
rollouts estimate the desirability function and the optimal control of a
first-exit problem (lsoc), a chain of barrier functions turns state
constraints into half-space conditions on the control (zcbf), a small exact
projection reconciles the two (safety_filter), and solved tasks can be
reused for new targets by mixing their controllers with similarity and
desirability weights (compose).  Multi-vehicle problems factor into
overlapping subsystems so each agent solves a small joint problem (mas).
"""

from .compose import (
    ComponentTask,
    CompositionWeights,
    composite_control,
    composite_final_cost,
    composition_weights,
    safe_composite_control,
    state_weights,
)
from .harness import (
    AgentRecord,
    RunResult,
    SweepRow,
    compute_metrics,
    export_run,
    margin_sweep,
    metrics_from_trajectory_csv,
    run_generalization,
    run_seeds,
    run_task,
    write_metrics_json,
    write_sweep_csv,
    write_trajectories_csv,
)
from .hjb import GridSolution, GridSpec, grid_hjb_oracle
from .lsoc import (
    BallBoundary,
    BoxBoundary,
    ControlEstimate,
    DesirabilityUnderflow,
    FirstExitDomain,
    LsocProblem,
    PiConfig,
    PiPolicy,
    RolloutBatch,
    UnionDomain,
    estimate_desirability,
    estimate_log_desirability,
    estimate_optimal_control,
    pi_policy,
    rollout_batch,
)
from .mas import (
    AgentGraph,
    FactorialSubsystem,
    assemble_joint,
    build_subsystems,
    extract_local_control,
    joint_dynamics,
)
from .scenarios import (
    Obstacle,
    Scenario,
    ScenarioError,
    UavState,
    bundled_scenario_path,
    final_cost,
    list_bundled_scenarios,
    load_scenario,
    obstacle_chain,
    running_cost_coop,
    running_cost_single,
    uav_dynamics,
    uav_drift,
)
from .sde import (
    EXIT_INFEASIBLE,
    EXIT_MAX_TIME,
    EXIT_TARGET,
    ControlAffineDynamics,
    NoiseStream,
    SafetyInfeasible,
    SimulationError,
    Trajectory,
    em_step,
    sample_increments,
    simulate,
    validate_lambda_condition,
)
from .zcbf import (
    AffineConstraint,
    BarrierFunction,
    ZcbfChain,
    build_chain,
    constraint_coeffs,
    detect_relative_degree,
    in_safe_set,
    lower_degree_terms,
    safety_filter,
)

__version__ = "0.1.0"

__all__ = [
    "AffineConstraint",
    "AgentGraph",
    "AgentRecord",
    "BallBoundary",
    "BarrierFunction",
    "BoxBoundary",
    "ComponentTask",
    "CompositionWeights",
    "ControlAffineDynamics",
    "ControlEstimate",
    "DesirabilityUnderflow",
    "EXIT_INFEASIBLE",
    "EXIT_MAX_TIME",
    "EXIT_TARGET",
    "FactorialSubsystem",
    "FirstExitDomain",
    "GridSolution",
    "GridSpec",
    "LsocProblem",
    "NoiseStream",
    "Obstacle",
    "PiConfig",
    "PiPolicy",
    "RolloutBatch",
    "RunResult",
    "SafetyInfeasible",
    "Scenario",
    "ScenarioError",
    "SimulationError",
    "SweepRow",
    "Trajectory",
    "UavState",
    "ZcbfChain",
    "assemble_joint",
    "build_chain",
    "build_subsystems",
    "bundled_scenario_path",
    "composite_control",
    "composite_final_cost",
    "composition_weights",
    "compute_metrics",
    "constraint_coeffs",
    "detect_relative_degree",
    "em_step",
    "estimate_desirability",
    "estimate_log_desirability",
    "estimate_optimal_control",
    "export_run",
    "extract_local_control",
    "final_cost",
    "grid_hjb_oracle",
    "in_safe_set",
    "joint_dynamics",
    "list_bundled_scenarios",
    "load_scenario",
    "lower_degree_terms",
    "margin_sweep",
    "metrics_from_trajectory_csv",
    "obstacle_chain",
    "pi_policy",
    "rollout_batch",
    "run_generalization",
    "run_seeds",
    "run_task",
    "running_cost_coop",
    "running_cost_single",
    "safe_composite_control",
    "safety_filter",
    "sample_increments",
    "simulate",
    "state_weights",
    "uav_drift",
    "uav_dynamics",
    "validate_lambda_condition",
    "write_metrics_json",
    "write_sweep_csv",
    "write_trajectories_csv",
]
