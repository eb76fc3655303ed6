//! The Corrector: feeds the last observed action deviation of every surrounding
//! agent back into the Predictor's output and lets the ego best-respond to the
//! shifted prediction.
//!
//! With `a⁺` the Predictor's first actions and `a*` the realized ones, the
//! deviation `ω(t−1) = a*(t−1) − a⁺(t−1)` is added to every step of the new
//! prediction. If the true actions and the predictions both change at bounded
//! rates `k1`, `k2`, the error of the corrected prediction `τ−t+1` steps ahead is
//! at most `(k1+k2)·(τ−t+1)·dt`.

use serde::{Deserialize, Serialize};

use crate::costs::GameContext;
use crate::error::{Error, Result};
use crate::game::{best_response, solve_potential, NashResult, SolverConfig};
use crate::harness::{run_episode, Controller, EpisodeConfig};
use crate::model::{Action, AgentParams, JointStrategy, Strategy};
use crate::scenarios::{Family, ScenarioSampler};

/// Last observed deviation of each agent's realized action from its prediction.
/// Indexed by agent; the ego's own entry stays zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationState {
    pub omega: Vec<Action>,
    /// False until one full predict/observe cycle has happened.
    pub valid: bool,
}

impl DeviationState {
    pub fn initial(num_agents: usize) -> Self {
        Self {
            omega: vec![Action::ZERO; num_agents],
            valid: false,
        }
    }

    /// Deviation actually applied: zero until valid.
    pub fn effective(&self, agent: usize) -> Action {
        if self.valid {
            self.omega[agent]
        } else {
            Action::ZERO
        }
    }
}

/// Rate constants of the realized (`k1`) and predicted (`k2`) actions (m/s³).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundParams {
    pub k1: f64,
    pub k2: f64,
}

impl Default for ErrorBoundParams {
    fn default() -> Self {
        // k1: a full swing across [-3, 3] m/s² within one second.
        Self { k1: 6.0, k2: 0.0 }
    }
}

impl ErrorBoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k2 >= 0.0 && self.k1.is_finite() && self.k2.is_finite()) {
            return Err(Error::config("error-bound constants must be non-negative"));
        }
        Ok(())
    }
}

/// Radius of the prediction-error ball `step_offset = τ−t+1` steps ahead.
pub fn error_bound(params: &ErrorBoundParams, step_offset: usize, dt: f64) -> f64 {
    (params.k1 + params.k2) * step_offset as f64 * dt
}

/// Element-wise `actual − predicted`.
pub fn compute_deviation(actual: &[Action], predicted: &[Action]) -> Result<Vec<Action>> {
    if actual.len() != predicted.len() {
        return Err(Error::config(format!(
            "{} actual actions vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| *a - *p).collect())
}

/// Shifts every surrounding agent's predicted action by its last deviation and
/// clips to that agent's action set. The ego's entry is passed through.
pub fn corrected_prediction(
    pg_prediction: &JointStrategy,
    deviation: &DeviationState,
    params: &[AgentParams],
    ego: usize,
) -> Result<JointStrategy> {
    if pg_prediction.len() != params.len() || deviation.omega.len() != params.len() {
        return Err(Error::config(
            "prediction, deviation and params must cover the same agents",
        ));
    }
    let strategies = pg_prediction
        .strategies
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if j == ego {
                *s
            } else {
                Strategy::new(
                    params[j].clamp_action(s.action + deviation.effective(j)),
                    s.horizon_steps,
                )
            }
        })
        .collect();
    Ok(JointStrategy { strategies })
}

/// Realized and predicted actions from the previous decision step.
#[derive(Clone, Copy, Debug)]
pub struct PreviousStep<'a> {
    pub actual: &'a [Action],
    pub predicted: &'a [Action],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorOutput {
    pub ego: Strategy,
    /// Predictor output `a⁺(t)` under the assumed costs.
    pub prediction: NashResult,
    pub corrected: JointStrategy,
    pub deviation: DeviationState,
}

/// One Predictor + Corrector decision for the ego.
///
/// `ctx` must carry the ego's *assumed* view of the game: typical costs for the
/// surrounding agents and the ego's own true cost at index `ego`.
pub fn corrector_step(
    ctx: &GameContext<'_>,
    ego: usize,
    previous: Option<PreviousStep<'_>>,
    solver: &SolverConfig,
) -> Result<CorrectorOutput> {
    let n = ctx.num_agents();
    if ego >= n {
        return Err(Error::config(format!("ego index {ego} out of range")));
    }
    let prediction = solve_potential(ctx, solver)?;
    let deviation = match previous {
        Some(prev) => {
            if prev.actual.len() != n {
                return Err(Error::config("previous actions must cover every agent"));
            }
            let mut omega = compute_deviation(prev.actual, prev.predicted)?;
            omega[ego] = Action::ZERO;
            DeviationState { omega, valid: true }
        }
        None => DeviationState::initial(n),
    };
    let corrected = corrected_prediction(&prediction.joint, &deviation, ctx.params, ego)?;
    let ego_strategy = best_response(ctx, ego, &corrected, solver)?;
    Ok(CorrectorOutput {
        ego: ego_strategy,
        prediction,
        corrected,
        deviation,
    })
}

/// Largest per-step rate of change of the Predictor's actions for the surrounding
/// agents, `max ‖a⁺_{-i}(τ) − a⁺_{-i}(τ−1)‖ / dt`, over closed-loop episodes of the
/// family run with the predictor-corrector ego.
pub fn estimate_k2(family: Family, config: &EpisodeConfig, num_rollouts: usize, seed: u64) -> Result<f64> {
    if num_rollouts == 0 {
        return Err(Error::config("estimate_k2 needs at least one rollout"));
    }
    let sampler = ScenarioSampler::new(family, seed);
    let mut k2: f64 = 0.0;
    for idx in 0..num_rollouts {
        let scenario = sampler.scenario(idx as u64)?;
        let log = run_episode(&scenario, Controller::Pcpg, config)?;
        k2 = k2.max(log.prediction_rate_max(scenario.ego_index));
    }
    Ok(k2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::CostConfig;
    use crate::model::{Axis, Bounds, VehicleState};

    fn free_driver(vd: [f64; 2]) -> AgentParams {
        AgentParams {
            theta: 1.0,
            q_weights: [0.0; 2],
            r_weights: [1.0; 2],
            desired_position: None,
            desired_velocity: vd,
            action_bounds: [Bounds::symmetric(3.0); 2],
            longitudinal_axis: Axis::Y,
            lateral_locked: false,
        }
    }

    #[test]
    fn deviation_examples() {
        let a = [Action::new(0.5, -1.0), Action::new(1.0, 2.0)];
        assert_eq!(compute_deviation(&a, &a).unwrap(), vec![Action::ZERO; 2]);
        let w = compute_deviation(&[Action::new(0.0, -1.0)], &[Action::new(0.0, -2.0)]).unwrap();
        assert_eq!(w, vec![Action::new(0.0, 1.0)]);
        assert!(compute_deviation(&a, &a[..1]).is_err());
    }

    #[test]
    fn corrected_prediction_examples() {
        let params = vec![free_driver([0.0, 5.0]), free_driver([0.0, -5.0])];
        let pg = JointStrategy::from_actions(&[Action::ZERO, Action::new(1.0, 1.0)], 4);

        let zero = DeviationState {
            omega: vec![Action::ZERO; 2],
            valid: true,
        };
        assert_eq!(corrected_prediction(&pg, &zero, &params, 0).unwrap(), pg);

        let dev = DeviationState {
            omega: vec![Action::ZERO, Action::new(0.5, 0.0)],
            valid: true,
        };
        let c = corrected_prediction(&pg, &dev, &params, 0).unwrap();
        assert!(c.strategies[1].actions().all(|a| a == Action::new(1.5, 1.0)));
        assert_eq!(c.strategies[1].horizon_steps, 4);

        let pg = JointStrategy::from_actions(&[Action::ZERO, Action::new(2.8, 0.0)], 4);
        let c = corrected_prediction(&pg, &dev, &params, 0).unwrap();
        assert_eq!(c.action(1), Action::new(3.0, 0.0));

        // invalid state means "no information yet"
        let stale = DeviationState { valid: false, ..dev };
        assert_eq!(corrected_prediction(&pg, &stale, &params, 0).unwrap(), pg);
    }

    #[test]
    fn error_bound_examples() {
        let zero = ErrorBoundParams { k1: 0.0, k2: 0.0 };
        assert_eq!(error_bound(&zero, 3, 0.5), 0.0);
        let p = ErrorBoundParams { k1: 2.0, k2: 1.0 };
        assert_eq!(error_bound(&p, 3, 0.5), 4.5);
        assert!((1..10).all(|k| error_bound(&p, k + 1, 0.5) > error_bound(&p, k, 0.5)));
    }

    #[test]
    fn first_step_equals_predictor() {
        let states = [
            VehicleState::new(0.0, 0.0, 0.0, 4.0),
            VehicleState::new(1.0, 30.0, 0.0, -4.0),
        ];
        let params = [free_driver([0.0, 5.0]), free_driver([0.0, -5.0])];
        let cfg = CostConfig::default();
        let ctx = GameContext::new(&states, &params, &cfg, 0.5, 4).unwrap();
        let solver = SolverConfig::default();
        let out = corrector_step(&ctx, 0, None, &solver).unwrap();
        assert!(!out.deviation.valid);
        assert_eq!(out.corrected, out.prediction.joint);
        // The ego's own Predictor action is its best response to a⁺_{-i}.
        let pg_ego = out.prediction.joint.action(0);
        assert!(
            (out.ego.action - pg_ego).norm() < 1e-3,
            "{:?} vs {:?}",
            out.ego.action,
            pg_ego
        );
    }

    #[test]
    fn exact_prediction_gives_zero_deviation() {
        let states = [
            VehicleState::new(0.0, 0.0, 0.0, 4.0),
            VehicleState::new(1.0, 30.0, 0.0, -4.0),
        ];
        let params = [free_driver([0.0, 5.0]), free_driver([0.0, -5.0])];
        let cfg = CostConfig::default();
        let ctx = GameContext::new(&states, &params, &cfg, 0.5, 4).unwrap();
        let solver = SolverConfig::default();
        let prev = [Action::new(0.1, 0.2), Action::new(-0.3, 0.4)];
        let out = corrector_step(
            &ctx,
            0,
            Some(PreviousStep {
                actual: &prev,
                predicted: &prev,
            }),
            &solver,
        )
        .unwrap();
        assert!(out.deviation.valid);
        assert!(out.deviation.omega.iter().all(|w| *w == Action::ZERO));
        assert_eq!(out.corrected, out.prediction.joint);
    }
}
