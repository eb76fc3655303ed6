//! Domain types and the discrete-time double-integrator shared by every planner.
//!
//! Positions and velocities advance with the explicit Euler update
//! `X' = X + v·dt`, `v' = v + a·dt`, where the position step uses the
//! pre-update velocity. A strategy is a single acceleration held over the
//! whole planning horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sampling time (s).
pub const DEFAULT_DT: f64 = 0.5;
/// Default planning horizon in steps (2 s at the default sampling time).
pub const DEFAULT_HORIZON: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl VehicleState {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.vx, self.vy]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Reflects the state about the vertical line `x = axis_x`.
    pub fn mirrored_x(&self, axis_x: f64) -> Self {
        Self::new(2.0 * axis_x - self.x, self.y, -self.vx, self.vy)
    }

    /// One Euler step without input validation; the hot path of every cost evaluation.
    #[inline]
    pub(crate) fn advance(&self, action: Action, dt: f64) -> Self {
        Self {
            x: self.x + self.vx * dt,
            y: self.y + self.vy * dt,
            vx: self.vx + action.ax * dt,
            vy: self.vy + action.ay * dt,
        }
    }
}

/// Acceleration command (m/s²).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub ax: f64,
    pub ay: f64,
}

impl Action {
    pub const ZERO: Action = Action { ax: 0.0, ay: 0.0 };

    pub const fn new(ax: f64, ay: f64) -> Self {
        Self { ax, ay }
    }

    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.ax,
            Axis::Y => self.ay,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.ax.hypot(self.ay)
    }

    pub fn mirrored_x(&self) -> Self {
        Self::new(-self.ax, self.ay)
    }
}

impl std::ops::Add for Action {
    type Output = Action;
    fn add(self, rhs: Action) -> Action {
        Action::new(self.ax + rhs.ax, self.ay + rhs.ay)
    }
}

impl std::ops::Sub for Action {
    type Output = Action;
    fn sub(self, rhs: Action) -> Action {
        Action::new(self.ax - rhs.ax, self.ay - rhs.ay)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(r: f64) -> Self {
        Self::new(-r, r)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    /// `n` evenly spaced points covering the interval, endpoints included.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(1);
        (0..n).map(move |k| {
            if n == 1 {
                0.5 * (self.lo + self.hi)
            } else {
                self.lo + self.width() * k as f64 / (n - 1) as f64
            }
        })
    }
}

/// An agent's plan: one acceleration held for `horizon_steps` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub action: Action,
    pub horizon_steps: usize,
}

impl Strategy {
    pub fn new(action: Action, horizon_steps: usize) -> Self {
        Self { action, horizon_steps }
    }

    /// The action sequence `a(t), …, a(t+T−1)`.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        std::iter::repeat_n(self.action, self.horizon_steps)
    }
}

/// Per-agent cost weights, targets and actuation limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// Weight on the self-interest tracking term; large means safety-agnostic.
    pub theta: f64,
    pub q_weights: [f64; 2],
    pub r_weights: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_position: Option<[f64; 2]>,
    pub desired_velocity: [f64; 2],
    /// Acceleration limits for the x and y axes.
    pub action_bounds: [Bounds; 2],
    /// Direction of travel. Lateral means the other axis.
    pub longitudinal_axis: Axis,
    /// Lateral acceleration pinned to zero (no lane changes).
    #[serde(default)]
    pub lateral_locked: bool,
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::config(format!("theta must be positive, got {}", self.theta)));
        }
        if self.q_weights.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
            return Err(Error::config("q_weights must be non-negative"));
        }
        if self.r_weights.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::config("r_weights must be positive"));
        }
        if self.action_bounds.iter().any(|b| !b.is_valid()) {
            return Err(Error::config("action bounds must be non-empty finite intervals"));
        }
        if self.lateral_locked && !self.action_bounds[self.longitudinal_axis.other().index()].contains(0.0) {
            return Err(Error::config(
                "a lateral-locked agent needs 0 inside its lateral bounds",
            ));
        }
        if self.desired_velocity.iter().any(|v| !v.is_finite())
            || self.desired_position.is_some_and(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::config("desired position/velocity must be finite"));
        }
        Ok(())
    }

    /// Number of free acceleration components.
    pub fn decision_dim(&self) -> usize {
        if self.lateral_locked {
            1
        } else {
            2
        }
    }

    /// Bounds of each free component, in the order used by [`Self::action_from_decision`].
    pub fn decision_bounds(&self) -> Vec<Bounds> {
        if self.lateral_locked {
            vec![self.action_bounds[self.longitudinal_axis.index()]]
        } else {
            self.action_bounds.to_vec()
        }
    }

    pub fn action_from_decision(&self, z: &[f64]) -> Action {
        if self.lateral_locked {
            match self.longitudinal_axis {
                Axis::X => Action::new(z[0], 0.0),
                Axis::Y => Action::new(0.0, z[0]),
            }
        } else {
            Action::new(z[0], z[1])
        }
    }

    pub fn decision_from_action(&self, a: Action) -> Vec<f64> {
        if self.lateral_locked {
            vec![a.component(self.longitudinal_axis)]
        } else {
            vec![a.ax, a.ay]
        }
    }

    /// Projects an action onto this agent's admissible action set.
    pub fn clamp_action(&self, a: Action) -> Action {
        let mut out = Action::new(self.action_bounds[0].clamp(a.ax), self.action_bounds[1].clamp(a.ay));
        if self.lateral_locked {
            match self.longitudinal_axis {
                Axis::X => out.ay = 0.0,
                Axis::Y => out.ax = 0.0,
            }
        }
        out
    }

    pub fn admits(&self, a: Action) -> bool {
        self.clamp_action(a) == a
    }

    /// Reflects targets about the vertical line `x = axis_x`.
    pub fn mirrored_x(&self, axis_x: f64) -> Self {
        let mut p = self.clone();
        p.desired_position = self.desired_position.map(|[x, y]| [2.0 * axis_x - x, y]);
        p.desired_velocity = [-self.desired_velocity[0], self.desired_velocity[1]];
        let bx = self.action_bounds[0];
        p.action_bounds[0] = Bounds::new(-bx.hi, -bx.lo);
        p
    }
}

/// One strategy per agent, all with a common horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointStrategy {
    pub strategies: Vec<Strategy>,
}

impl JointStrategy {
    pub fn new(strategies: Vec<Strategy>) -> Result<Self> {
        let joint = Self { strategies };
        joint.validate()?;
        Ok(joint)
    }

    pub fn from_actions(actions: &[Action], horizon_steps: usize) -> Self {
        Self {
            strategies: actions.iter().map(|&a| Strategy::new(a, horizon_steps)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.strategies.first().map_or(0, |s| s.horizon_steps)
    }

    pub fn actions(&self) -> Vec<Action> {
        self.strategies.iter().map(|s| s.action).collect()
    }

    pub fn action(&self, agent: usize) -> Action {
        self.strategies[agent].action
    }

    /// Copy with agent `agent`'s action replaced.
    pub fn with_action(&self, agent: usize, action: Action) -> Self {
        let mut out = self.clone();
        out.strategies[agent].action = action;
        out
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        if t == 0 {
            return Err(Error::config("joint strategy needs a positive horizon"));
        }
        if self.strategies.iter().any(|s| s.horizon_steps != t) {
            return Err(Error::config("all strategies must share one horizon"));
        }
        Ok(())
    }
}

/// Advances one agent by one sampling period.
pub fn step_dynamics(state: &VehicleState, action: &Action, dt: f64) -> Result<VehicleState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive and finite, got {dt}")));
    }
    if !state.is_finite() || !action.is_finite() {
        return Err(Error::CorruptedState(format!(
            "non-finite input {state:?} / {action:?}"
        )));
    }
    let next = state.advance(*action, dt);
    if !next.is_finite() {
        return Err(Error::CorruptedState(format!("state overflowed to {next:?}")));
    }
    Ok(next)
}

/// Rolls every agent forward under its strategy. Returns `T+1` states per agent,
/// the first being the initial state.
pub fn rollout(initial: &[VehicleState], joint: &JointStrategy, dt: f64) -> Result<Vec<Vec<VehicleState>>> {
    if initial.len() != joint.len() {
        return Err(Error::config(format!(
            "{} initial states but {} strategies",
            initial.len(),
            joint.len()
        )));
    }
    joint.validate()?;
    let sequences: Vec<Vec<Action>> = joint.strategies.iter().map(|s| s.actions().collect()).collect();
    rollout_sequences(initial, &sequences, dt)
}

/// Rollout with an arbitrary per-step action sequence for each agent.
pub fn rollout_sequences(initial: &[VehicleState], actions: &[Vec<Action>], dt: f64) -> Result<Vec<Vec<VehicleState>>> {
    if initial.len() != actions.len() {
        return Err(Error::config(format!(
            "{} initial states but {} action sequences",
            initial.len(),
            actions.len()
        )));
    }
    initial
        .iter()
        .zip(actions)
        .map(|(s0, seq)| {
            let mut traj = Vec::with_capacity(seq.len() + 1);
            traj.push(*s0);
            let mut s = *s0;
            for a in seq {
                s = step_dynamics(&s, a, dt)?;
                traj.push(s);
            }
            Ok(traj)
        })
        .collect()
}

/// Writes the first `out.len()` states (starting with `s0`) of a constant-action
/// rollout into `out`. No validation.
#[inline]
pub(crate) fn fill_trajectory(s0: VehicleState, action: Action, dt: f64, out: &mut [VehicleState]) {
    let mut s = s0;
    for slot in out.iter_mut() {
        *slot = s;
        s = s.advance(action, dt);
    }
}
