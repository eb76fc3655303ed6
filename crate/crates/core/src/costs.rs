//! Agent costs and the exact potential of the interaction game.
//!
//! Agent `i` pays `θ_i·J_i^self + β·Σ_{j≠i} J_ij`, where the self term tracks
//! desired position/velocity and the symmetric pair term
//! `Σ_τ d_d² / (d_ij(τ)² + δ)` penalizes proximity. Because every self term
//! depends on one agent only and the pair term is symmetric, the function
//! `F = Σ_j θ_j·J_j^self + β·Σ_{k<j} J_jk` changes by exactly the same amount
//! as `J_i` whenever agent `i` alone changes its strategy.
//!
//! All sums run over the `T` states `τ = t, …, t+T−1` of the rollout, the
//! first of which is the current state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fill_trajectory, Action, AgentParams, JointStrategy, Strategy, VehicleState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Comfortable inter-vehicle distance `d_d` (m).
    pub d_desired: f64,
    /// Regularizer `δ` in the pair-cost denominator (m²).
    pub delta: f64,
    /// Common weight `β` on the pair terms. Each agent's `θ` weights its own self term.
    #[serde(default = "one")]
    pub interaction_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            d_desired: 8.0,
            delta: 1e-6,
            interaction_weight: 1.0,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_desired > 0.0 && self.d_desired.is_finite()) {
            return Err(Error::config("d_desired must be positive"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::config("delta must be positive"));
        }
        if !(self.interaction_weight >= 0.0 && self.interaction_weight.is_finite()) {
            return Err(Error::config("interaction_weight must be non-negative"));
        }
        Ok(())
    }

    #[inline]
    fn proximity(&self, a: &VehicleState, b: &VehicleState) -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        self.d_desired * self.d_desired / (dx * dx + dy * dy + self.delta)
    }
}

/// Everything needed to price a joint strategy at one decision time.
#[derive(Clone, Copy, Debug)]
pub struct GameContext<'a> {
    pub states: &'a [VehicleState],
    pub params: &'a [AgentParams],
    pub costs: &'a CostConfig,
    pub dt: f64,
    pub horizon: usize,
}

impl<'a> GameContext<'a> {
    pub fn new(
        states: &'a [VehicleState],
        params: &'a [AgentParams],
        costs: &'a CostConfig,
        dt: f64,
        horizon: usize,
    ) -> Result<Self> {
        if states.len() != params.len() {
            return Err(Error::config(format!(
                "{} states but {} parameter sets",
                states.len(),
                params.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::config("game needs at least one agent"));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be at least one step"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if let Some(s) = states.iter().find(|s| !s.is_finite()) {
            return Err(Error::CorruptedState(format!("{s:?}")));
        }
        costs.validate()?;
        Ok(Self {
            states,
            params,
            costs,
            dt,
            horizon,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.states.len()
    }

    pub fn strategy(&self, action: Action) -> Strategy {
        Strategy::new(action, self.horizon)
    }

    pub fn joint(&self, actions: &[Action]) -> JointStrategy {
        JointStrategy::from_actions(actions, self.horizon)
    }
}

pub(crate) fn self_cost_traj(params: &AgentParams, traj: &[VehicleState]) -> f64 {
    let [qx, qy] = params.q_weights;
    let [rx, ry] = params.r_weights;
    let [vxd, vyd] = params.desired_velocity;
    traj.iter()
        .map(|s| {
            let pos = match params.desired_position {
                Some([xd, yd]) => qx * (s.x - xd) * (s.x - xd) + qy * (s.y - yd) * (s.y - yd),
                None => 0.0,
            };
            pos + rx * (s.vx - vxd) * (s.vx - vxd) + ry * (s.vy - vyd) * (s.vy - vyd)
        })
        .sum()
}

pub(crate) fn pair_cost_traj(cfg: &CostConfig, a: &[VehicleState], b: &[VehicleState]) -> f64 {
    a.iter().zip(b).map(|(p, q)| cfg.proximity(p, q)).sum()
}

fn trajectory(initial: &VehicleState, strategy: &Strategy, dt: f64) -> Vec<VehicleState> {
    let mut out = vec![VehicleState::default(); strategy.horizon_steps];
    fill_trajectory(*initial, strategy.action, dt, &mut out);
    out
}

/// Tracking cost `Σ ΔXᵀQΔX + ΔvᵀRΔv` along the rollout.
pub fn self_cost(params: &AgentParams, strategy: &Strategy, initial: &VehicleState, dt: f64) -> f64 {
    self_cost_traj(params, &trajectory(initial, strategy, dt))
}

/// Proximity cost `Σ d_d² / (d_ij² + δ)`; symmetric in its two agents.
pub fn pair_cost(
    strategy_i: &Strategy,
    strategy_j: &Strategy,
    init_i: &VehicleState,
    init_j: &VehicleState,
    cfg: &CostConfig,
    dt: f64,
) -> f64 {
    pair_cost_traj(
        cfg,
        &trajectory(init_i, strategy_i, dt),
        &trajectory(init_j, strategy_j, dt),
    )
}

/// `J_i(a_i, a_{-i})`.
pub fn agent_cost(ctx: &GameContext<'_>, agent: usize, joint: &JointStrategy) -> f64 {
    let trajs = all_trajectories(ctx, joint);
    agent_cost_from(ctx, agent, &trajs)
}

/// `F(a)`; each unordered pair is counted once.
pub fn potential_value(ctx: &GameContext<'_>, joint: &JointStrategy) -> f64 {
    let trajs = all_trajectories(ctx, joint);
    potential_from(ctx, &trajs)
}

fn all_trajectories(ctx: &GameContext<'_>, joint: &JointStrategy) -> Vec<Vec<VehicleState>> {
    debug_assert_eq!(joint.len(), ctx.num_agents());
    ctx.states
        .iter()
        .zip(&joint.strategies)
        .map(|(s, st)| trajectory(s, st, ctx.dt))
        .collect()
}

fn agent_cost_from(ctx: &GameContext<'_>, agent: usize, trajs: &[Vec<VehicleState>]) -> f64 {
    let own = ctx.params[agent].theta * self_cost_traj(&ctx.params[agent], &trajs[agent]);
    let coupling: f64 = (0..trajs.len())
        .filter(|&j| j != agent)
        .map(|j| pair_cost_traj(ctx.costs, &trajs[agent], &trajs[j]))
        .sum();
    own + ctx.costs.interaction_weight * coupling
}

fn potential_from(ctx: &GameContext<'_>, trajs: &[Vec<VehicleState>]) -> f64 {
    let own: f64 = trajs
        .iter()
        .zip(ctx.params)
        .map(|(t, p)| p.theta * self_cost_traj(p, t))
        .sum();
    let mut coupling = 0.0;
    for j in 0..trajs.len() {
        for k in 0..j {
            coupling += pair_cost_traj(ctx.costs, &trajs[j], &trajs[k]);
        }
    }
    own + ctx.costs.interaction_weight * coupling
}

/// Reusable evaluator of `F` over flat action lists, used by the population optimizers.
pub(crate) struct PotentialEvaluator<'a> {
    ctx: GameContext<'a>,
    buf: Vec<VehicleState>,
}

impl<'a> PotentialEvaluator<'a> {
    pub fn new(ctx: GameContext<'a>) -> Self {
        Self {
            buf: vec![VehicleState::default(); ctx.num_agents() * ctx.horizon],
            ctx,
        }
    }

    pub fn eval(&mut self, actions: &[Action]) -> f64 {
        let t = self.ctx.horizon;
        for (k, (s, a)) in self.ctx.states.iter().zip(actions).enumerate() {
            fill_trajectory(*s, *a, self.ctx.dt, &mut self.buf[k * t..(k + 1) * t]);
        }
        let n = self.ctx.num_agents();
        let traj = |k: usize| &self.buf[k * t..(k + 1) * t];
        let mut own = 0.0;
        for (k, p) in self.ctx.params.iter().enumerate() {
            own += p.theta * self_cost_traj(p, traj(k));
        }
        let mut coupling = 0.0;
        for j in 0..n {
            for k in 0..j {
                coupling += pair_cost_traj(self.ctx.costs, traj(j), traj(k));
            }
        }
        own + self.ctx.costs.interaction_weight * coupling
    }
}

/// `J_i(·, a_{-i})` with the other agents' trajectories cached.
pub(crate) struct ResponseEvaluator<'a> {
    ctx: GameContext<'a>,
    agent: usize,
    others: Vec<Vec<VehicleState>>,
    own: Vec<VehicleState>,
}

impl<'a> ResponseEvaluator<'a> {
    pub fn new(ctx: GameContext<'a>, agent: usize, fixed: &[Action]) -> Self {
        let t = ctx.horizon;
        let others = (0..ctx.num_agents())
            .filter(|&j| j != agent)
            .map(|j| {
                let mut traj = vec![VehicleState::default(); t];
                fill_trajectory(ctx.states[j], fixed[j], ctx.dt, &mut traj);
                traj
            })
            .collect();
        Self {
            ctx,
            agent,
            others,
            own: vec![VehicleState::default(); t],
        }
    }

    pub fn eval(&mut self, action: Action) -> f64 {
        fill_trajectory(self.ctx.states[self.agent], action, self.ctx.dt, &mut self.own);
        let p = &self.ctx.params[self.agent];
        let coupling: f64 = self
            .others
            .iter()
            .map(|o| pair_cost_traj(self.ctx.costs, &self.own, o))
            .sum();
        p.theta * self_cost_traj(p, &self.own) + self.ctx.costs.interaction_weight * coupling
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Axis, Bounds};

    fn params(theta: f64) -> AgentParams {
        AgentParams {
            theta,
            q_weights: [1.0, 1.0],
            r_weights: [1.0, 1.0],
            desired_position: Some([0.0, 0.0]),
            desired_velocity: [0.0, 0.0],
            action_bounds: [Bounds::symmetric(3.0); 2],
            longitudinal_axis: Axis::Y,
            lateral_locked: false,
        }
    }

    #[test]
    fn exact_tracking_costs_nothing() {
        let p = params(1.0);
        let c = self_cost(&p, &Strategy::new(Action::ZERO, 4), &VehicleState::default(), 0.5);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn single_step_quadratic_form() {
        let p = AgentParams {
            desired_position: Some([-1.0, 0.0]),
            desired_velocity: [0.0, -2.0],
            ..params(1.0)
        };
        let c = self_cost(
            &p,
            &Strategy::new(Action::new(1.0, 1.0), 1),
            &VehicleState::default(),
            0.5,
        );
        assert_eq!(c, 5.0);
    }

    #[test]
    fn constant_offsets_hand_summed() {
        // Stationary at x=2 with target x=0 and target speed 1 along y: per step 4 + 1.
        let p = AgentParams {
            desired_velocity: [0.0, 1.0],
            ..params(1.0)
        };
        let s0 = VehicleState::new(2.0, 0.0, 0.0, 0.0);
        // Zero action keeps the state fixed, so four identical terms.
        let c = self_cost(&p, &Strategy::new(Action::ZERO, 4), &s0, 0.5);
        assert_eq!(c, 4.0 * (4.0 + 1.0));
        // With ay = 2: v_y = 0,1,2,3 and y = 0,0,0.5,1.5 along the rollout.
        let c = self_cost(&p, &Strategy::new(Action::new(0.0, 2.0), 4), &s0, 0.5);
        let expected = (4.0 + 0.0 + 1.0) + (4.0 + 0.0 + 0.0) + (4.0 + 0.25 + 1.0) + (4.0 + 2.25 + 4.0);
        assert!((c - expected).abs() < 1e-12);
    }

    #[test]
    fn missing_desired_position_drops_position_terms() {
        let p = AgentParams {
            desired_position: None,
            ..params(1.0)
        };
        let c = self_cost(
            &p,
            &Strategy::new(Action::ZERO, 3),
            &VehicleState::new(100.0, -7.0, 0.0, 0.0),
            0.5,
        );
        assert_eq!(c, 0.0);
    }

    #[test]
    fn pair_cost_at_comfort_distance() {
        let cfg = CostConfig::default();
        let a = VehicleState::new(0.0, 0.0, 1.0, 0.0);
        let b = VehicleState::new(0.0, 8.0, 1.0, 0.0);
        let s = Strategy::new(Action::ZERO, 4);
        let c = pair_cost(&s, &s, &a, &b, &cfg, 0.5);
        assert!((c - 4.0).abs() <= 4.0 * cfg.delta / 64.0);
    }

    #[test]
    fn coincident_agents_hit_the_regularizer() {
        let cfg = CostConfig {
            d_desired: 4.0,
            delta: 1e-6,
            interaction_weight: 1.0,
        };
        let s = Strategy::new(Action::ZERO, 1);
        let a = VehicleState::default();
        let c = pair_cost(&s, &s, &a, &a, &cfg, 0.5);
        assert!((c - 1.6e7).abs() < 1e-6 * 1.6e7);
    }

    #[test]
    fn pair_cost_symmetric() {
        let cfg = CostConfig::default();
        let a = VehicleState::new(0.3, -2.0, 1.0, 4.0);
        let b = VehicleState::new(1.7, 12.0, -0.5, -3.0);
        let sa = Strategy::new(Action::new(1.0, -0.3), 4);
        let sb = Strategy::new(Action::new(-2.0, 0.8), 4);
        assert_eq!(
            pair_cost(&sa, &sb, &a, &b, &cfg, 0.5),
            pair_cost(&sb, &sa, &b, &a, &cfg, 0.5)
        );
    }

    #[test]
    fn pair_cost_decreases_with_distance() {
        let cfg = CostConfig::default();
        let s = Strategy::new(Action::ZERO, 4);
        let a = VehicleState::default();
        let mut last = f64::INFINITY;
        for d in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let c = pair_cost(&s, &s, &a, &VehicleState::new(d, 0.0, 0.0, 0.0), &cfg, 0.5);
            assert!(c < last);
            last = c;
        }
    }

    fn ctx_fixture(states: &[VehicleState], ps: &[AgentParams], cfg: &CostConfig) -> GameContext<'static> {
        let states: &'static [VehicleState] = Box::leak(states.to_vec().into_boxed_slice());
        let ps: &'static [AgentParams] = Box::leak(ps.to_vec().into_boxed_slice());
        let cfg: &'static CostConfig = Box::leak(Box::new(cfg.clone()));
        GameContext::new(states, ps, cfg, 0.5, 4).unwrap()
    }

    #[test]
    fn single_agent_cost_is_weighted_self_cost() {
        let p = params(2.5);
        let s0 = VehicleState::new(1.0, 0.0, 0.0, 3.0);
        let ctx = ctx_fixture(&[s0], std::slice::from_ref(&p), &CostConfig::default());
        let joint = ctx.joint(&[Action::new(-1.0, 0.5)]);
        let expected = 2.5 * self_cost(&p, &joint.strategies[0], &s0, 0.5);
        assert_eq!(agent_cost(&ctx, 0, &joint), expected);
        assert_eq!(potential_value(&ctx, &joint), expected);
    }

    #[test]
    fn zero_theta_leaves_only_interaction() {
        let a = VehicleState::new(0.0, 0.0, 0.0, 5.0);
        let b = VehicleState::new(1.0, 20.0, 0.0, -5.0);
        let cfg = CostConfig::default();
        let ctx = ctx_fixture(&[a, b], &[params(0.0), params(1.0)], &cfg);
        let joint = ctx.joint(&[Action::new(0.5, 0.0), Action::ZERO]);
        let pc = pair_cost(&joint.strategies[0], &joint.strategies[1], &a, &b, &cfg, 0.5);
        assert_eq!(agent_cost(&ctx, 0, &joint), pc);
    }

    #[test]
    fn two_agent_potential_counts_pair_once() {
        let a = VehicleState::new(0.0, 0.0, 0.0, 5.0);
        let b = VehicleState::new(1.0, 20.0, 0.0, -5.0);
        let cfg = CostConfig::default();
        let (pa, pb) = (params(1.0), params(3.0));
        let ctx = ctx_fixture(&[a, b], &[pa.clone(), pb.clone()], &cfg);
        let joint = ctx.joint(&[Action::new(0.5, 0.0), Action::new(-1.0, 0.2)]);
        let (sa, sb) = (&joint.strategies[0], &joint.strategies[1]);
        let expected = 1.0 * self_cost(&pa, sa, &a, 0.5)
            + 3.0 * self_cost(&pb, sb, &b, 0.5)
            + pair_cost(sa, sb, &a, &b, &cfg, 0.5);
        assert!((potential_value(&ctx, &joint) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn symmetric_triangle_costs_equal() {
        // Equilateral triangle, velocities pointing at the centroid, params rotated with the frame
        // only through the shared zero targets so the configuration is symmetric.
        let r = 10.0;
        let states: Vec<VehicleState> = (0..3)
            .map(|k| {
                let ang = std::f64::consts::TAU * k as f64 / 3.0;
                VehicleState::new(r * ang.cos(), r * ang.sin(), -2.0 * ang.cos(), -2.0 * ang.sin())
            })
            .collect();
        let p = AgentParams {
            q_weights: [0.0; 2],
            desired_velocity: [0.0; 2],
            ..params(1.0)
        };
        let ctx = ctx_fixture(&states, &[p.clone(), p.clone(), p], &CostConfig::default());
        let joint = ctx.joint(&[Action::ZERO; 3]);
        let c: Vec<f64> = (0..3).map(|i| agent_cost(&ctx, i, &joint)).collect();
        assert!((c[0] - c[1]).abs() < 1e-12 * c[0]);
        assert!((c[0] - c[2]).abs() < 1e-12 * c[0]);
    }

    #[test]
    fn evaluators_match_reference_functions() {
        let states = [
            VehicleState::new(0.0, 0.0, 0.2, 5.0),
            VehicleState::new(1.0, 25.0, 0.0, -5.0),
            VehicleState::new(-8.0, 10.0, 4.0, 0.0),
        ];
        let ps = [params(1.0), params(4.0), params(0.5)];
        let ctx = ctx_fixture(&states, &ps, &CostConfig::default());
        let acts = [Action::new(0.3, -1.0), Action::new(-2.0, 0.5), Action::new(1.0, 1.0)];
        let joint = ctx.joint(&acts);
        let f = potential_value(&ctx, &joint);
        assert!((PotentialEvaluator::new(ctx).eval(&acts) - f).abs() <= 1e-12 * f);
        for i in 0..3 {
            let j = agent_cost(&ctx, i, &joint);
            let mut ev = ResponseEvaluator::new(ctx, i, &acts);
            assert!((ev.eval(acts[i]) - j).abs() <= 1e-12 * j);
        }
    }
}
