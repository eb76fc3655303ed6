//! Multi-agent driving decisions from a predictor-corrector potential game.

pub mod baselines;
pub mod corrector;
pub mod costs;
pub mod error;
pub mod game;
pub mod harness;
pub mod model;
pub mod safety;
pub mod scenarios;
pub mod verify;

pub use baselines::{cbf_row, nominal_controller, pcca_solve, CbfParams, QpProblem};
pub use corrector::{
    compute_deviation, corrected_prediction, corrector_step, error_bound, estimate_k2, CorrectorOutput, DeviationState,
    ErrorBoundParams,
};
pub use costs::{agent_cost, pair_cost, potential_value, self_cost, CostConfig, GameContext};
pub use error::{Error, Result};
pub use game::{best_response, solve_br_dynamics, solve_potential, verify_psne, NashResult, SolverConfig};
pub use harness::{run_episode, run_study, Controller, EpisodeConfig, EpisodeLog, StudySummary};
pub use model::{
    rollout, rollout_sequences, step_dynamics, Action, AgentParams, Axis, Bounds, JointStrategy, Strategy, VehicleState,
};
pub use safety::{detect_collision, is_safe_strategy, reachable_boxes, safe_set_probe, ReachBox, SafetySpec};
pub use scenarios::{build_intersection, build_oncoming, Family, Scenario, ScenarioSampler};
