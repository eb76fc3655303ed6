use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{nominal_controller, pcca_solve, CbfParams, PccaNeighbor};
use crate::corrector::{corrector_step, PreviousStep};
use crate::costs::{agent_cost, GameContext};
use crate::error::{Error, Result};
use crate::game::{solve_potential, SolverConfig};
use crate::model::{Action, VehicleState};
use crate::safety::{certify_response, reachable_boxes, safe_set_probe, Collision};
use crate::scenarios::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    /// Potential-game Predictor alone.
    Pg,
    /// Predictor plus Corrector.
    Pcpg,
    /// Predictor plus Corrector with the reachability safety filter.
    PcpgCertified,
    Pcca,
    /// PCCA with the ego action clipped to its bounds.
    PccaSaturated,
}

impl Controller {
    pub const ALL: [Controller; 5] = [
        Controller::Pg,
        Controller::Pcpg,
        Controller::PcpgCertified,
        Controller::Pcca,
        Controller::PccaSaturated,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Controller::Pg => "pg",
            Controller::Pcpg => "pcpg",
            Controller::PcpgCertified => "pcpg-certified",
            Controller::Pcca => "pcca",
            Controller::PccaSaturated => "pcca-saturated",
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Controller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Controller::ALL
            .into_iter()
            .find(|c| c.tag() == key)
            .ok_or_else(|| Error::config(format!("unknown controller `{s}`")))
    }
}

/// Everything besides the scenario that shapes an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub solver: SolverConfig,
    pub cbf: CbfParams,
    /// Grid points per action axis for the safety filter.
    pub certify_resolution: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            cbf: CbfParams::default(),
            certify_resolution: 21,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.cbf.validate()?;
        if self.certify_resolution < 2 {
            return Err(Error::config("certify_resolution must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationRecord {
    pub probe_nonempty: bool,
    pub certified: bool,
    pub replaced: bool,
}

/// One decision step: the state it started from and everything decided in it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub states: Vec<VehicleState>,
    /// Actions applied by every agent.
    pub actions: Vec<Action>,
    /// The ego's Predictor output for every agent.
    pub predicted: Option<Vec<Action>>,
    pub corrected: Option<Vec<Action>>,
    /// Deviation fed into the correction (zero on the first step).
    pub deviation: Option<Vec<Action>>,
    /// PCCA copies of the other agents' actions.
    pub copies: Option<Vec<Action>>,
    /// True cost of each agent for the realized constant-action joint strategy.
    pub costs: Vec<f64>,
    /// Wall-clock time of the ego's decision (s).
    pub solve_time: f64,
    pub certification: Option<CertificationRecord>,
    pub qp_infeasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub controller: Controller,
    pub scenario: String,
    pub ego_index: usize,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    /// State after the last executed step.
    pub final_states: Vec<VehicleState>,
    pub collision: Option<Collision>,
    /// Diagnostic of a solver failure that ended the episode early.
    pub failure: Option<String>,
}

impl EpisodeLog {
    /// States at times `0, dt, …`, ending with the final state.
    pub fn state_sequence(&self) -> Vec<&[VehicleState]> {
        self.steps
            .iter()
            .map(|s| s.states.as_slice())
            .chain(std::iter::once(self.final_states.as_slice()))
            .collect()
    }

    pub fn trajectories(&self) -> Vec<Vec<VehicleState>> {
        let seq = self.state_sequence();
        let n = self.final_states.len();
        (0..n).map(|j| seq.iter().map(|s| s[j]).collect()).collect()
    }

    pub fn collided(&self) -> bool {
        self.collision.is_some()
    }

    pub fn collision_time(&self) -> Option<f64> {
        self.collision.map(|c| c.step as f64 * self.dt)
    }

    /// Smallest ego-to-other distance over all logged states.
    pub fn min_ego_distance(&self) -> f64 {
        self.state_sequence()
            .iter()
            .map(|s| ego_distance(s, self.ego_index))
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_τ ‖a⁺_{-i}(τ) − a⁺_{-i}(τ−1)‖ / dt` over the logged predictions.
    pub fn prediction_rate_max(&self, ego: usize) -> f64 {
        let preds: Vec<&Vec<Action>> = self.steps.iter().filter_map(|s| s.predicted.as_ref()).collect();
        rate_max(&preds, ego, self.dt)
    }

    /// `max_τ ‖a*_{-i}(τ) − a*_{-i}(τ−1)‖ / dt` over the realized actions.
    pub fn action_rate_max(&self, ego: usize) -> f64 {
        let acts: Vec<&Vec<Action>> = self.steps.iter().map(|s| &s.actions).collect();
        rate_max(&acts, ego, self.dt)
    }
}

/// Euclidean norm of the stacked differences over every agent except `ego`.
pub fn others_norm(a: &[Action], b: &[Action], ego: usize) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(j, _)| *j != ego)
        .map(|(_, (x, y))| {
            let d = *x - *y;
            d.ax * d.ax + d.ay * d.ay
        })
        .sum::<f64>()
        .sqrt()
}

fn rate_max(seq: &[&Vec<Action>], ego: usize, dt: f64) -> f64 {
    seq.windows(2)
        .map(|w| others_norm(w[1], w[0], ego) / dt)
        .fold(0.0, f64::max)
}

fn ego_distance(states: &[VehicleState], ego: usize) -> f64 {
    states
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ego)
        .map(|(_, s)| s.distance_to(&states[ego]))
        .fold(f64::INFINITY, f64::min)
}

/// First other agent (lowest index) closer to the ego than `d_safe`.
fn ego_collision(states: &[VehicleState], ego: usize, d_safe: f64, step: usize) -> Option<Collision> {
    states
        .iter()
        .enumerate()
        .find(|(j, s)| *j != ego && s.distance_to(&states[ego]) < d_safe)
        .map(|(j, _)| Collision {
            step,
            agents: (ego.min(j), ego.max(j)),
        })
}

struct EgoDecision {
    action: Action,
    predicted: Option<Vec<Action>>,
    corrected: Option<Vec<Action>>,
    deviation: Option<Vec<Action>>,
    copies: Option<Vec<Action>>,
    certification: Option<CertificationRecord>,
    qp_infeasible: bool,
}

/// Closed-loop receding-horizon episode. The ego decides with `controller` on
/// its assumed view of the game; every other agent plays its part of the
/// potential-game equilibrium of the true game. The episode ends after
/// `duration_steps` or at the first ego collision.
pub fn run_episode(scenario: &Scenario, controller: Controller, config: &EpisodeConfig) -> Result<EpisodeLog> {
    scenario.validate()?;
    config.validate()?;
    let n = scenario.num_agents();
    let ego = scenario.ego_index;
    let dt = scenario.dt;
    let horizon = scenario.horizon_steps;
    let d_safe = scenario.safety_spec.d_safe;

    let mut log = EpisodeLog {
        controller,
        scenario: scenario.name.clone(),
        ego_index: ego,
        dt,
        steps: Vec::with_capacity(scenario.duration_steps),
        final_states: scenario.initial_states.clone(),
        collision: None,
        failure: None,
    };
    let mut states = scenario.initial_states.clone();
    let mut prev_actions: Option<Vec<Action>> = None;
    let mut prev_predicted: Option<Vec<Action>> = None;
    let mut copies = vec![Action::ZERO; n];

    for step in 0..scenario.duration_steps {
        let started = Instant::now();
        let decision = match decide(
            scenario,
            controller,
            config,
            &states,
            prev_actions.as_deref(),
            prev_predicted.as_deref(),
            &mut copies,
        ) {
            Ok(d) => d,
            Err(e) => {
                log.failure = Some(format!("step {step}: {e}"));
                break;
            }
        };
        let solve_time = started.elapsed().as_secs_f64();

        let true_ctx = GameContext::new(&states, &scenario.true_params, &scenario.cost_cfg, dt, horizon)?;
        let others = match solve_potential(&true_ctx, &config.solver) {
            Ok(r) => r.joint.actions(),
            Err(e) => {
                log.failure = Some(format!("step {step}: {e}"));
                break;
            }
        };
        let mut actions = others;
        actions[ego] = decision.action;
        let joint = true_ctx.joint(&actions);
        let costs = (0..n).map(|j| agent_cost(&true_ctx, j, &joint)).collect();

        let next: Vec<VehicleState> = states.iter().zip(&actions).map(|(s, a)| s.advance(*a, dt)).collect();
        if let Some(s) = next.iter().find(|s| !s.is_finite()) {
            log.failure = Some(format!("step {step}: non-finite state {s:?}"));
            break;
        }
        log.steps.push(StepRecord {
            step,
            states: std::mem::replace(&mut states, next),
            actions: actions.clone(),
            predicted: decision.predicted.clone(),
            corrected: decision.corrected,
            deviation: decision.deviation,
            copies: decision.copies,
            costs,
            solve_time,
            certification: decision.certification,
            qp_infeasible: decision.qp_infeasible,
        });
        log.final_states.clone_from(&states);
        prev_actions = Some(actions);
        prev_predicted = decision.predicted;
        if let Some(c) = ego_collision(&states, ego, d_safe, step + 1) {
            log.collision = Some(c);
            break;
        }
    }
    Ok(log)
}

fn decide(
    scenario: &Scenario,
    controller: Controller,
    config: &EpisodeConfig,
    states: &[VehicleState],
    prev_actions: Option<&[Action]>,
    prev_predicted: Option<&[Action]>,
    copies: &mut [Action],
) -> Result<EgoDecision> {
    let ego = scenario.ego_index;
    let ctx = GameContext::new(
        states,
        &scenario.assumed_params,
        &scenario.cost_cfg,
        scenario.dt,
        scenario.horizon_steps,
    )?;
    let mut out = EgoDecision {
        action: Action::ZERO,
        predicted: None,
        corrected: None,
        deviation: None,
        copies: None,
        certification: None,
        qp_infeasible: false,
    };
    match controller {
        Controller::Pg => {
            let pred = solve_potential(&ctx, &config.solver)?;
            out.action = pred.joint.action(ego);
            out.predicted = Some(pred.joint.actions());
        }
        Controller::Pcpg | Controller::PcpgCertified => {
            let previous = match (prev_actions, prev_predicted) {
                (Some(actual), Some(predicted)) => Some(PreviousStep { actual, predicted }),
                _ => None,
            };
            let step = corrector_step(&ctx, ego, previous, &config.solver)?;
            out.action = step.ego.action;
            if controller == Controller::PcpgCertified {
                let spec = &scenario.safety_spec;
                let boxes = reachable_boxes(
                    states,
                    &step.corrected,
                    &scenario.assumed_params,
                    ego,
                    spec,
                    scenario.dt,
                )?;
                let choice = certify_response(
                    &ctx,
                    ego,
                    &step.corrected,
                    step.ego,
                    &boxes,
                    spec,
                    config.certify_resolution,
                );
                let probe_nonempty = choice.probe_nonempty
                    || safe_set_probe(
                        &states[ego],
                        &boxes,
                        &scenario.assumed_params[ego],
                        spec,
                        scenario.dt,
                        config.certify_resolution,
                    )
                    .nonempty;
                out.action = choice.strategy.action;
                out.certification = Some(CertificationRecord {
                    probe_nonempty,
                    certified: choice.certified,
                    replaced: choice.replaced,
                });
            }
            out.predicted = Some(step.prediction.joint.actions());
            out.corrected = Some(step.corrected.actions());
            out.deviation = Some(
                step.deviation
                    .omega
                    .iter()
                    .enumerate()
                    .map(|(j, _)| step.deviation.effective(j))
                    .collect(),
            );
        }
        Controller::Pcca | Controller::PccaSaturated => {
            let cbf = CbfParams {
                saturate: controller == Controller::PccaSaturated,
                ..config.cbf.clone()
            };
            let ego_params = &scenario.true_params[ego];
            let nominal = nominal_controller(&states[ego], ego_params, scenario.dt);
            let others: Vec<usize> = (0..states.len()).filter(|&j| j != ego).collect();
            let neighbors: Vec<PccaNeighbor<'_>> = others
                .iter()
                .map(|&j| PccaNeighbor {
                    state: states[j],
                    params: &scenario.assumed_params[j],
                    // with no history the robustifying term is zero
                    previous_action: prev_actions.map_or(copies[j], |a| a[j]),
                    previous_copy: copies[j],
                })
                .collect();
            let solved = pcca_solve(&states[ego], ego_params, &neighbors, nominal, &cbf)?;
            for (k, &j) in others.iter().enumerate() {
                copies[j] = solved.copies[k];
            }
            out.action = solved.ego;
            out.copies = Some(copies.to_vec());
            out.qp_infeasible = solved.infeasible;
        }
    }
    Ok(out)
}
