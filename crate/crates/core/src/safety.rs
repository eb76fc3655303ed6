//! Safe sets, interval reachability of the surrounding agents and the
//! certification filter for ego strategies.
//!
//! The surrounding agents' accelerations are only known up to the prediction
//! error ball of the corrector. Each ball is replaced by its bounding box per
//! axis and intersected with the agent's action limits, and the double
//! integrator is propagated in interval arithmetic. Because the dynamics are
//! linear with non-negative coefficients, the per-axis intervals are the exact
//! hull of the boxed input set.

use serde::{Deserialize, Serialize};

use crate::corrector::{error_bound, ErrorBoundParams};
use crate::costs::{GameContext, ResponseEvaluator};
use crate::error::{Error, Result};
use crate::game::search::for_each_grid_point;
use crate::model::{Action, AgentParams, Bounds, JointStrategy, Strategy, VehicleState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetySpec {
    /// Minimum admissible distance between vehicle centers (m).
    pub d_safe: f64,
    pub bound_params: ErrorBoundParams,
}

impl Default for SafetySpec {
    fn default() -> Self {
        Self {
            d_safe: 4.0,
            bound_params: ErrorBoundParams::default(),
        }
    }
}

impl SafetySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_safe > 0.0 && self.d_safe.is_finite()) {
            return Err(Error::config("d_safe must be positive"));
        }
        self.bound_params.validate()
    }
}

/// Axis-aligned position box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionBox {
    pub x: Bounds,
    pub y: Bounds,
}

impl PositionBox {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x.contains(p[0]) && self.y.contains(p[1])
    }

    pub fn encloses(&self, other: &PositionBox) -> bool {
        self.x.lo <= other.x.lo && self.x.hi >= other.x.hi && self.y.lo <= other.y.lo && self.y.hi >= other.y.hi
    }

    /// Euclidean distance from a point to the box (zero inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x.lo - p[0]).max(p[0] - self.x.hi).max(0.0);
        let dy = (self.y.lo - p[1]).max(p[1] - self.y.hi).max(0.0);
        dx.hypot(dy)
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x.lo + self.x.hi), 0.5 * (self.y.lo + self.y.hi)]
    }
}

/// Over-approximated reachable positions of each surrounding agent at steps
/// `t+1, …, t+T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachBox {
    /// `(agent index, boxes for steps 1..=T)`.
    pub agents: Vec<(usize, Vec<PositionBox>)>,
}

impl ReachBox {
    pub fn horizon(&self) -> usize {
        self.agents.first().map_or(0, |(_, b)| b.len())
    }
}

/// Interval propagation of one agent under `nominal ± radius(offset)` per axis.
fn propagate(
    state: &VehicleState,
    nominal: Action,
    params: &AgentParams,
    bounds: &ErrorBoundParams,
    dt: f64,
    horizon: usize,
) -> Vec<PositionBox> {
    let lateral_zero = |axis: usize| params.lateral_locked && axis != params.longitudinal_axis.index();
    let mut pos = [Bounds::new(state.x, state.x), Bounds::new(state.y, state.y)];
    let mut vel = [Bounds::new(state.vx, state.vx), Bounds::new(state.vy, state.vy)];
    let nominal = [nominal.ax, nominal.ay];
    let mut out = Vec::with_capacity(horizon);
    for offset in 1..=horizon {
        let r = error_bound(bounds, offset, dt);
        for axis in 0..2 {
            let limits = params.action_bounds[axis];
            let acc = if lateral_zero(axis) {
                Bounds::new(0.0, 0.0)
            } else {
                // the nominal is inside the limits, so the intersection is never empty
                Bounds::new(
                    (nominal[axis] - r).max(limits.lo).min(limits.hi),
                    (nominal[axis] + r).min(limits.hi).max(limits.lo),
                )
            };
            pos[axis] = Bounds::new(pos[axis].lo + vel[axis].lo * dt, pos[axis].hi + vel[axis].hi * dt);
            vel[axis] = Bounds::new(vel[axis].lo + acc.lo * dt, vel[axis].hi + acc.hi * dt);
        }
        out.push(PositionBox { x: pos[0], y: pos[1] });
    }
    out
}

/// Reachable boxes of every agent except `ego` under the corrected prediction.
pub fn reachable_boxes(
    states: &[VehicleState],
    corrected: &JointStrategy,
    params: &[AgentParams],
    ego: usize,
    spec: &SafetySpec,
    dt: f64,
) -> Result<ReachBox> {
    if states.len() != corrected.len() || states.len() != params.len() {
        return Err(Error::config(
            "states, strategies and params must cover the same agents",
        ));
    }
    let horizon = corrected.horizon();
    let agents = (0..states.len())
        .filter(|&j| j != ego)
        .map(|j| {
            let nominal = params[j].clamp_action(corrected.action(j));
            (
                j,
                propagate(&states[j], nominal, &params[j], &spec.bound_params, dt, horizon),
            )
        })
        .collect();
    Ok(ReachBox { agents })
}

/// Ego positions at steps `t+1, …, t+T`.
fn ego_positions(ego_state: &VehicleState, action: Action, dt: f64, horizon: usize) -> Vec<[f64; 2]> {
    let mut s = *ego_state;
    (0..horizon)
        .map(|_| {
            s = s.advance(action, dt);
            s.position()
        })
        .collect()
}

fn positions_safe(positions: &[[f64; 2]], boxes: &ReachBox, d_safe: f64) -> bool {
    boxes
        .agents
        .iter()
        .all(|(_, steps)| steps.iter().zip(positions).all(|(b, p)| b.distance_to(*p) >= d_safe))
}

/// True iff the ego keeps at least `d_safe` from every reachable box at every step.
pub fn is_safe_strategy(
    ego_strategy: &Strategy,
    ego_state: &VehicleState,
    boxes: &ReachBox,
    spec: &SafetySpec,
    dt: f64,
) -> bool {
    let horizon = boxes.horizon().min(ego_strategy.horizon_steps);
    positions_safe(
        &ego_positions(ego_state, ego_strategy.action, dt, horizon),
        boxes,
        spec.d_safe,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafeProbe {
    pub nonempty: bool,
    pub witness: Option<Strategy>,
}

fn decision_axes(params: &AgentParams, resolution: usize) -> Vec<Vec<f64>> {
    params
        .decision_bounds()
        .iter()
        .map(|b| b.grid(resolution).collect())
        .collect()
}

/// Samples the ego action box on a grid and returns the first safe strategy.
/// An empty result only means no grid point is safe.
pub fn safe_set_probe(
    ego_state: &VehicleState,
    boxes: &ReachBox,
    ego_params: &AgentParams,
    spec: &SafetySpec,
    dt: f64,
    grid_resolution: usize,
) -> SafeProbe {
    let horizon = boxes.horizon();
    let mut witness = None;
    let axes = decision_axes(ego_params, grid_resolution);
    for_each_grid_point(&axes, |z| {
        if witness.is_some() {
            return;
        }
        let a = ego_params.action_from_decision(z);
        if positions_safe(&ego_positions(ego_state, a, dt, horizon), boxes, spec.d_safe) {
            witness = Some(Strategy::new(a, horizon));
        }
    });
    SafeProbe {
        nonempty: witness.is_some(),
        witness,
    }
}

/// Outcome of the certification filter on the ego's best response.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedChoice {
    pub strategy: Strategy,
    pub probe_nonempty: bool,
    /// The played strategy passed [`is_safe_strategy`].
    pub certified: bool,
    /// The unconstrained best response was replaced by a safe grid strategy.
    pub replaced: bool,
}

/// Keeps `unconstrained` when it is certified safe; otherwise plays the cheapest
/// safe grid strategy under the ego's cost against `corrected`, if any exists.
pub fn certify_response(
    ctx: &GameContext<'_>,
    ego: usize,
    corrected: &JointStrategy,
    unconstrained: Strategy,
    boxes: &ReachBox,
    spec: &SafetySpec,
    grid_resolution: usize,
) -> CertifiedChoice {
    let ego_state = &ctx.states[ego];
    if is_safe_strategy(&unconstrained, ego_state, boxes, spec, ctx.dt) {
        return CertifiedChoice {
            strategy: unconstrained,
            probe_nonempty: true,
            certified: true,
            replaced: false,
        };
    }
    let params = &ctx.params[ego];
    let horizon = boxes.horizon();
    let mut ev = ResponseEvaluator::new(*ctx, ego, &corrected.actions());
    let mut best: Option<(f64, Action)> = None;
    for_each_grid_point(&decision_axes(params, grid_resolution), |z| {
        let a = params.action_from_decision(z);
        if positions_safe(&ego_positions(ego_state, a, ctx.dt, horizon), boxes, spec.d_safe) {
            let j = ev.eval(a);
            if best.is_none_or(|(bj, _)| j < bj) {
                best = Some((j, a));
            }
        }
    });
    match best {
        Some((_, a)) => CertifiedChoice {
            strategy: Strategy::new(a, unconstrained.horizon_steps),
            probe_nonempty: true,
            certified: true,
            replaced: true,
        },
        None => CertifiedChoice {
            strategy: unconstrained,
            probe_nonempty: false,
            certified: false,
            replaced: false,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    pub step: usize,
    pub agents: (usize, usize),
}

/// Earliest step at which two vehicle centers are closer than `d_safe`; ties go
/// to the lowest pair.
pub fn detect_collision(trajectories: &[Vec<VehicleState>], d_safe: f64) -> Option<Collision> {
    let steps = trajectories.iter().map(Vec::len).min().unwrap_or(0);
    (0..steps).find_map(|k| {
        for i in 0..trajectories.len() {
            for j in i + 1..trajectories.len() {
                if trajectories[i][k].distance_to(&trajectories[j][k]) < d_safe {
                    return Some(Collision {
                        step: k,
                        agents: (i, j),
                    });
                }
            }
        }
        None
    })
}

/// Smallest pairwise center distance at one instant.
pub fn min_pairwise_distance(states: &[VehicleState]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            d = d.min(states[i].distance_to(&states[j]));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Axis;

    fn params() -> AgentParams {
        AgentParams {
            theta: 1.0,
            q_weights: [0.0; 2],
            r_weights: [1.0; 2],
            desired_position: None,
            desired_velocity: [0.0; 2],
            action_bounds: [Bounds::symmetric(3.0); 2],
            longitudinal_axis: Axis::Y,
            lateral_locked: false,
        }
    }

    fn spec(k1: f64) -> SafetySpec {
        SafetySpec {
            d_safe: 4.0,
            bound_params: ErrorBoundParams { k1, k2: 0.0 },
        }
    }

    #[test]
    fn zero_bounds_give_the_nominal_trajectory() {
        let states = [VehicleState::default(), VehicleState::new(5.0, 20.0, 0.5, -4.0)];
        let joint = JointStrategy::from_actions(&[Action::ZERO, Action::new(1.0, -0.5)], 4);
        let rb = reachable_boxes(&states, &joint, &[params(), params()], 0, &spec(0.0), 0.5).unwrap();
        let traj = crate::model::rollout(
            &states[1..],
            &JointStrategy::from_actions(&[Action::new(1.0, -0.5)], 4),
            0.5,
        )
        .unwrap();
        assert_eq!(rb.agents.len(), 1);
        for (b, s) in rb.agents[0].1.iter().zip(&traj[0][1..]) {
            assert_eq!(b.x.lo, s.x);
            assert_eq!(b.x.hi, s.x);
            assert_eq!(b.y.lo, s.y);
            assert_eq!(b.y.hi, s.y);
        }
    }

    #[test]
    fn first_step_position_is_exact() {
        let states = [VehicleState::default(), VehicleState::new(10.0, 10.0, 0.0, 0.0)];
        let joint = JointStrategy::from_actions(&[Action::ZERO; 2], 3);
        let rb = reachable_boxes(&states, &joint, &[params(), params()], 0, &spec(2.0), 0.5).unwrap();
        let first = rb.agents[0].1[0];
        assert_eq!(first.x.width(), 0.0);
        assert_eq!(first.y.width(), 0.0);
        assert!(rb.agents[0].1[1].x.width() > 0.0 || rb.agents[0].1[2].x.width() > 0.0);
    }

    #[test]
    fn symmetric_errors_center_on_nominal() {
        let states = [VehicleState::default(), VehicleState::new(10.0, 10.0, 1.0, -2.0)];
        let joint = JointStrategy::from_actions(&[Action::ZERO; 2], 4);
        let rb = reachable_boxes(&states, &joint, &[params(), params()], 0, &spec(1.0), 0.5).unwrap();
        let nominal =
            crate::model::rollout(&states[1..], &JointStrategy::from_actions(&[Action::ZERO], 4), 0.5).unwrap();
        for (b, s) in rb.agents[0].1.iter().zip(&nominal[0][1..]) {
            let c = b.center();
            assert!((c[0] - s.x).abs() < 1e-12 && (c[1] - s.y).abs() < 1e-12);
        }
    }

    #[test]
    fn boxes_nest_under_larger_bounds() {
        let states = [VehicleState::default(), VehicleState::new(3.0, 12.0, 0.0, -5.0)];
        let joint = JointStrategy::from_actions(&[Action::ZERO, Action::new(0.5, 0.5)], 4);
        let ps = [params(), params()];
        let small = reachable_boxes(&states, &joint, &ps, 0, &spec(0.5), 0.5).unwrap();
        let large = reachable_boxes(&states, &joint, &ps, 0, &spec(2.0), 0.5).unwrap();
        for (a, b) in small.agents[0].1.iter().zip(&large.agents[0].1) {
            assert!(b.encloses(a));
        }
    }

    #[test]
    fn safety_verdicts() {
        let states = [VehicleState::default(), VehicleState::new(100.0, 0.0, 0.0, 0.0)];
        let joint = JointStrategy::from_actions(&[Action::ZERO; 2], 4);
        let sp = spec(1.0);
        let rb = reachable_boxes(&states, &joint, &[params(), params()], 0, &sp, 0.5).unwrap();
        assert!(is_safe_strategy(
            &Strategy::new(Action::ZERO, 4),
            &states[0],
            &rb,
            &sp,
            0.5
        ));

        let states = [
            VehicleState::new(0.0, 0.0, 0.0, 4.0),
            VehicleState::new(0.0, 8.0, 0.0, 0.0),
        ];
        let rb = reachable_boxes(&states, &joint, &[params(), params()], 0, &sp, 0.5).unwrap();
        assert!(!is_safe_strategy(
            &Strategy::new(Action::ZERO, 4),
            &states[0],
            &rb,
            &sp,
            0.5
        ));
    }

    #[test]
    fn tangency_is_safe() {
        let rb = ReachBox {
            agents: vec![(
                1,
                vec![PositionBox {
                    x: Bounds::new(4.0, 6.0),
                    y: Bounds::new(-1.0, 1.0),
                }],
            )],
        };
        let sp = spec(0.0);
        assert!(is_safe_strategy(
            &Strategy::new(Action::ZERO, 1),
            &VehicleState::default(),
            &rb,
            &sp,
            0.5
        ));
        let closer = VehicleState::new(0.5, 0.0, 0.0, 0.0);
        assert!(!is_safe_strategy(
            &Strategy::new(Action::ZERO, 1),
            &closer,
            &rb,
            &sp,
            0.5
        ));
    }

    #[test]
    fn probe_on_free_road_and_in_a_trap() {
        let sp = spec(0.0);
        let free = ReachBox {
            agents: vec![(
                1,
                vec![
                    PositionBox {
                        x: Bounds::new(500.0, 501.0),
                        y: Bounds::new(0.0, 1.0)
                    };
                    4
                ],
            )],
        };
        let probe = safe_set_probe(&VehicleState::default(), &free, &params(), &sp, 0.5, 7);
        assert!(probe.nonempty);
        let w = probe.witness.unwrap();
        assert!(is_safe_strategy(&w, &VehicleState::default(), &free, &sp, 0.5));

        // Enclosing box covering everything the ego can reach in 4 steps at ±3 m/s².
        let trap = ReachBox {
            agents: vec![(
                1,
                vec![
                    PositionBox {
                        x: Bounds::new(-10.0, 10.0),
                        y: Bounds::new(-10.0, 10.0)
                    };
                    4
                ],
            )],
        };
        let probe = safe_set_probe(&VehicleState::default(), &trap, &params(), &sp, 0.5, 7);
        assert!(!probe.nonempty);
        assert!(probe.witness.is_none());
    }

    #[test]
    fn collision_detection() {
        let lane = |x: f64, vy: f64| -> Vec<VehicleState> {
            (0..10).map(|k| VehicleState::new(x, vy * k as f64, 0.0, vy)).collect()
        };
        assert_eq!(detect_collision(&[lane(0.0, 5.0), lane(10.0, 5.0)], 4.0), None);

        let a: Vec<VehicleState> = (0..10)
            .map(|k| VehicleState::new(0.0, 5.0 * k as f64, 0.0, 5.0))
            .collect();
        // y-gaps 45, 35, ..., 5, -5: closest sampled distance is hypot(0.5, 5) > 4.
        let b: Vec<VehicleState> = (0..10)
            .map(|k| VehicleState::new(0.5, 45.0 - 5.0 * k as f64, 0.0, -5.0))
            .collect();
        assert_eq!(detect_collision(&[a.clone(), b], 4.0), None);
        let b2: Vec<VehicleState> = (0..10)
            .map(|k| VehicleState::new(0.5, 40.0 - 5.0 * k as f64, 0.0, -5.0))
            .collect();
        assert_eq!(
            detect_collision(&[a, b2], 4.0),
            Some(Collision {
                step: 4,
                agents: (0, 1)
            })
        );
    }
}
