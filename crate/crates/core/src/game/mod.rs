//! The Predictor: pure-strategy Nash equilibria of the interaction game.
//!
//! Two routes are provided. [`solve_potential`] minimizes the potential over
//! the joint action box, which yields an equilibrium that is also a minimizer
//! of the social cost. [`solve_br_dynamics`] runs sequential best responses
//! until nobody can improve, which on a potential game always terminates but
//! may stop at any equilibrium. [`verify_psne`] certifies a joint strategy on
//! a grid of unilateral deviations.

pub mod search;

use serde::{Deserialize, Serialize};

use crate::costs::{agent_cost, potential_value, GameContext, PotentialEvaluator, ResponseEvaluator};
use crate::error::{Error, Result};
use crate::model::{Action, Bounds, JointStrategy, Strategy};
use search::{cross_entropy, grid_minimum, refine, CemSettings, Minimum};

/// Tuning of the population optimizer and the best-response search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Initial sampling deviation (m/s²).
    pub init_stddev: f64,
    pub seed: u64,
    /// Largest cost decrease still counted as "no improvement" by best-response dynamics.
    pub convergence_tol: f64,
    pub max_br_sweeps: usize,
    /// Grid points per action axis for best responses and certificates.
    pub br_grid_resolution: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.25,
            iterations: 30,
            init_stddev: 3.0,
            seed: 0x5eed,
            convergence_tol: 1e-6,
            max_br_sweeps: 20,
            br_grid_resolution: 21,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || self.iterations == 0 || self.max_br_sweeps == 0 || self.br_grid_resolution == 0 {
            return Err(Error::config("solver counts must be positive"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::config("elite_fraction must lie in (0, 1)"));
        }
        if self.elite_count() < 2 {
            return Err(Error::config("elite_fraction * population must be at least 2"));
        }
        if !(self.init_stddev > 0.0 && self.init_stddev.is_finite()) {
            return Err(Error::config("init_stddev must be positive"));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::config("convergence_tol must be positive"));
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        (self.elite_fraction * self.population as f64).round() as usize
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn cem(&self) -> CemSettings {
        CemSettings {
            population: self.population,
            elite_count: self.elite_count(),
            iterations: self.iterations,
            init_stddev: self.init_stddev,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashResult {
    pub joint: JointStrategy,
    pub potential: f64,
    pub converged: bool,
    pub iterations_used: usize,
    /// Largest unilateral cost decrease found on the certificate grid.
    pub psne_certificate: f64,
}

/// Scale-aware tolerance for equilibrium certificates: `1e-3·(1+|J_i|)`.
pub fn psne_tolerance(cost: f64) -> f64 {
    1e-3 * (1.0 + cost.abs())
}

/// Maps the flat decision vector of all agents onto actions.
struct Layout {
    offsets: Vec<usize>,
    bounds: Vec<Bounds>,
}

impl Layout {
    fn new(ctx: &GameContext<'_>) -> Self {
        let mut offsets = Vec::with_capacity(ctx.num_agents() + 1);
        let mut bounds = Vec::new();
        offsets.push(0);
        for p in ctx.params {
            bounds.extend(p.decision_bounds());
            offsets.push(bounds.len());
        }
        Self { offsets, bounds }
    }

    fn decode_into(&self, ctx: &GameContext<'_>, z: &[f64], out: &mut [Action]) {
        for (j, p) in ctx.params.iter().enumerate() {
            out[j] = p.action_from_decision(&z[self.offsets[j]..self.offsets[j + 1]]);
        }
    }

    fn encode(&self, ctx: &GameContext<'_>, actions: &[Action]) -> Vec<f64> {
        ctx.params
            .iter()
            .zip(actions)
            .flat_map(|(p, a)| p.decision_from_action(*a))
            .collect()
    }
}

fn check_joint(ctx: &GameContext<'_>, joint: &JointStrategy) -> Result<()> {
    if joint.len() != ctx.num_agents() {
        return Err(Error::config(format!(
            "joint strategy has {} entries for {} agents",
            joint.len(),
            ctx.num_agents()
        )));
    }
    Ok(())
}

/// Minimizer of `J_agent(·, a_{-agent})` found by a dense grid and pattern refinement.
fn response_minimum(ctx: &GameContext<'_>, agent: usize, fixed: &[Action], resolution: usize) -> (Action, f64) {
    let params = &ctx.params[agent];
    let bounds = params.decision_bounds();
    let mut ev = ResponseEvaluator::new(*ctx, agent, fixed);
    let mut f = |z: &[f64]| ev.eval(params.action_from_decision(z));
    let coarse = grid_minimum(&bounds, resolution, &mut f);
    let spacing = bounds
        .iter()
        .map(|b| b.width() / (resolution.max(2) - 1) as f64)
        .fold(0.0, f64::max);
    let fine = refine(&bounds, coarse, spacing, &mut f);
    (params.action_from_decision(&fine.point), fine.value)
}

/// Agent `agent`'s best response to the other entries of `fixed_others`.
pub fn best_response(
    ctx: &GameContext<'_>,
    agent: usize,
    fixed_others: &JointStrategy,
    solver: &SolverConfig,
) -> Result<Strategy> {
    check_joint(ctx, fixed_others)?;
    if agent >= ctx.num_agents() {
        return Err(Error::config(format!("agent index {agent} out of range")));
    }
    let (a, _) = response_minimum(ctx, agent, &fixed_others.actions(), solver.br_grid_resolution);
    Ok(ctx.strategy(a))
}

/// Sequential grid best responses from `actions` until nobody improves by more
/// than the tolerance. Each accepted move lowers the potential by the same amount
/// it lowers the mover's cost. Returns whether the Nash condition was reached and
/// the number of sweeps used.
fn best_response_sweeps(ctx: &GameContext<'_>, actions: &mut [Action], solver: &SolverConfig) -> (bool, usize) {
    let n = ctx.num_agents();
    let res = solver.br_grid_resolution;
    let mut sweeps = 0;
    while sweeps < solver.max_br_sweeps {
        sweeps += 1;
        for j in 0..n {
            let current = ResponseEvaluator::new(*ctx, j, actions).eval(actions[j]);
            let (a, v) = response_minimum(ctx, j, actions, res);
            if current - v > solver.convergence_tol {
                actions[j] = a;
            }
        }
        // Nash condition: every agent already plays an (approximate) best response.
        let converged = (0..n).all(|j| {
            let current = ResponseEvaluator::new(*ctx, j, actions).eval(actions[j]);
            let (_, v) = response_minimum(ctx, j, actions, res);
            current - v <= solver.convergence_tol
        });
        if converged {
            return (true, sweeps);
        }
    }
    (false, sweeps)
}

/// Sequential best-response dynamics from the zero action.
pub fn solve_br_dynamics(ctx: &GameContext<'_>, solver: &SolverConfig) -> Result<NashResult> {
    solver.validate()?;
    let mut actions: Vec<Action> = ctx.params.iter().map(|p| p.clamp_action(Action::ZERO)).collect();
    let (converged, sweeps) = best_response_sweeps(ctx, &mut actions, solver);
    let joint = ctx.joint(&actions);
    Ok(NashResult {
        potential: potential_value(ctx, &joint),
        psne_certificate: verify_psne(ctx, &joint, solver.br_grid_resolution)?,
        joint,
        converged,
        iterations_used: sweeps,
    })
}

/// Global minimization of the potential. The cross-entropy method and a
/// best-response descent from the zero action each give a candidate, both are
/// polished by coordinate refinement and the lower one is kept. The second
/// start guards against the population collapsing into the wrong basin when
/// braking and passing are both locally optimal.
pub fn solve_potential(ctx: &GameContext<'_>, solver: &SolverConfig) -> Result<NashResult> {
    solver.validate()?;
    let layout = Layout::new(ctx);
    let mut ev = PotentialEvaluator::new(*ctx);
    let mut scratch = vec![Action::ZERO; ctx.num_agents()];
    let mut f = |z: &[f64]| {
        layout.decode_into(ctx, z, &mut scratch);
        ev.eval(&scratch)
    };
    let coarse = cross_entropy(&layout.bounds, &solver.cem(), &mut f);
    let from_cem: Minimum = refine(&layout.bounds, coarse, 0.25, &mut f);

    let mut descent: Vec<Action> = ctx.params.iter().map(|p| p.clamp_action(Action::ZERO)).collect();
    best_response_sweeps(ctx, &mut descent, solver);
    let point = layout.encode(ctx, &descent);
    let start = Minimum {
        value: f(&point),
        point,
        evaluations: 1,
    };
    let from_descent = refine(&layout.bounds, start, 0.25, &mut f);
    let fine = if from_descent.value < from_cem.value {
        from_descent
    } else {
        from_cem
    };

    let mut best = vec![Action::ZERO; ctx.num_agents()];
    layout.decode_into(ctx, &fine.point, &mut best);
    debug_assert_eq!(layout.encode(ctx, &best), fine.point);
    let joint = ctx.joint(&best);
    let gains = unilateral_gains(ctx, &joint, solver.br_grid_resolution)?;
    let certificate = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let converged = within_tolerance(ctx, &joint, &gains);
    Ok(NashResult {
        potential: fine.value,
        joint,
        converged,
        iterations_used: solver.iterations,
        psne_certificate: certificate,
    })
}

/// Per-agent largest gain `J_i(joint) − J_i(g, joint_{-i})` over grid deviations `g`.
pub fn unilateral_gains(ctx: &GameContext<'_>, joint: &JointStrategy, grid_resolution: usize) -> Result<Vec<f64>> {
    check_joint(ctx, joint)?;
    let actions = joint.actions();
    Ok((0..ctx.num_agents())
        .map(|i| {
            let params = &ctx.params[i];
            let mut ev = ResponseEvaluator::new(*ctx, i, &actions);
            let current = ev.eval(actions[i]);
            let best = grid_minimum(&params.decision_bounds(), grid_resolution, |z| {
                ev.eval(params.action_from_decision(z))
            });
            current - best.value
        })
        .collect())
}

/// Largest unilateral improvement available to any agent on the grid; at most a
/// small tolerance for an (approximate) equilibrium.
pub fn verify_psne(ctx: &GameContext<'_>, joint: &JointStrategy, grid_resolution: usize) -> Result<f64> {
    Ok(unilateral_gains(ctx, joint, grid_resolution)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True when every agent's grid gain is within [`psne_tolerance`] of its own cost.
pub fn certifies_psne(ctx: &GameContext<'_>, joint: &JointStrategy, grid_resolution: usize) -> Result<bool> {
    let gains = unilateral_gains(ctx, joint, grid_resolution)?;
    Ok(within_tolerance(ctx, joint, &gains))
}

fn within_tolerance(ctx: &GameContext<'_>, joint: &JointStrategy, gains: &[f64]) -> bool {
    gains
        .iter()
        .enumerate()
        .all(|(i, g)| *g <= psne_tolerance(agent_cost(ctx, i, joint)))
}
