//! Randomized property checks that can be run from the command line against a
//! build. Each check draws its own cases from a seeded generator and reports
//! the number of violations and the worst observed value of its statistic.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{pcca_solve, CbfParams, PccaNeighbor, QpProblem};
use crate::corrector::{error_bound, ErrorBoundParams};
use crate::costs::{agent_cost, potential_value, GameContext};
use crate::error::Result;
use crate::model::{Action, AgentParams, JointStrategy};
use crate::safety::{reachable_boxes, SafetySpec};
use crate::scenarios::{Family, Scenario, ScenarioSampler};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest value of the checked statistic (its meaning is per property).
    pub worst: f64,
    pub tolerance: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            cases: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records a statistic that must not exceed the tolerance.
    fn record(&mut self, value: f64) {
        self.cases += 1;
        self.worst = self.worst.max(value);
        if value.is_nan() || value > self.tolerance {
            self.failures += 1;
        }
    }

    fn finish(self) -> PropertyReport {
        PropertyReport {
            name: self.name.into(),
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

fn random_action(rng: &mut impl Rng, p: &AgentParams) -> Action {
    let [bx, by] = p.action_bounds;
    p.clamp_action(Action::new(
        rng.random_range(bx.lo..=bx.hi),
        rng.random_range(by.lo..=by.hi),
    ))
}

fn random_scenario(rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let family = if rng.random_bool(0.5) {
        Family::Oncoming
    } else {
        Family::Intersection
    };
    let mut s = ScenarioSampler::new(family, rng.random()).scenario(rng.random_range(0..10_000))?;
    // move everybody part of the way along their approach so the pair terms matter
    let progress = rng.random_range(0.0..0.8);
    let moved: Vec<_> = s
        .initial_states
        .iter()
        .map(|v| {
            let mut m = *v;
            m.x += v.vx * 6.0 * progress;
            m.y += v.vy * 4.0 * progress;
            m
        })
        .collect();
    let separated = moved
        .iter()
        .enumerate()
        .all(|(i, a)| moved[i + 1..].iter().all(|b| a.distance_to(b) > 1.0));
    if separated {
        s.initial_states = moved;
    }
    Ok(s)
}

/// `|ΔJ_i − ΔF| / (1 + |ΔJ_i|)` under random unilateral deviations.
fn potential_identity(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("potential identity", 1e-9);
    for _ in 0..cases {
        let s = random_scenario(rng)?;
        let ctx = GameContext::new(&s.initial_states, &s.true_params, &s.cost_cfg, s.dt, s.horizon_steps)?;
        let a: Vec<Action> = s.true_params.iter().map(|p| random_action(rng, p)).collect();
        let i = rng.random_range(0..a.len());
        let mut b = a.clone();
        b[i] = random_action(rng, &s.true_params[i]);
        let (ja, jb) = (ctx.joint(&a), ctx.joint(&b));
        let dj = agent_cost(&ctx, i, &jb) - agent_cost(&ctx, i, &ja);
        let df = potential_value(&ctx, &jb) - potential_value(&ctx, &ja);
        t.record((dj - df).abs() / (1.0 + dj.abs()));
    }
    Ok(t.finish())
}

/// Relative change of the potential when the whole game is mirrored in x.
fn mirror_symmetry(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("mirror symmetry", 1e-12);
    for _ in 0..cases {
        let s = random_scenario(rng)?;
        let axis = rng.random_range(-5.0..5.0);
        let m = s.mirrored_x(axis);
        let a: Vec<Action> = s.true_params.iter().map(|p| random_action(rng, p)).collect();
        let am: Vec<Action> = a.iter().map(Action::mirrored_x).collect();
        let ctx = GameContext::new(&s.initial_states, &s.true_params, &s.cost_cfg, s.dt, s.horizon_steps)?;
        let ctx_m = GameContext::new(&m.initial_states, &m.true_params, &m.cost_cfg, m.dt, m.horizon_steps)?;
        let f = potential_value(&ctx, &ctx.joint(&a));
        let fm = potential_value(&ctx_m, &ctx_m.joint(&am));
        t.record((f - fm).abs() / (1.0 + f.abs()));
    }
    Ok(t.finish())
}

/// Distance of exact rollouts under sampled admissible errors from their reach
/// boxes (zero when contained).
fn reach_containment(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("reach containment", 0.0);
    for _ in 0..cases {
        let s = random_scenario(rng)?;
        let spec = SafetySpec {
            d_safe: 4.0,
            bound_params: ErrorBoundParams {
                k1: rng.random_range(0.0..6.0),
                k2: rng.random_range(0.0..3.0),
            },
        };
        let nominal: Vec<Action> = s.assumed_params.iter().map(|p| random_action(rng, p)).collect();
        let joint = JointStrategy::from_actions(&nominal, s.horizon_steps);
        let boxes = reachable_boxes(&s.initial_states, &joint, &s.assumed_params, s.ego_index, &spec, s.dt)?;
        let mut worst: f64 = 0.0;
        for (j, steps) in &boxes.agents {
            let p = &s.assumed_params[*j];
            let mut x = s.initial_states[*j];
            for (offset, b) in (1..).zip(steps) {
                let r = error_bound(&spec.bound_params, offset, s.dt);
                let rho = r * rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let a = p.clamp_action(nominal[*j] + Action::new(rho * phi.cos(), rho * phi.sin()));
                x = x.advance(a, s.dt);
                worst = worst.max(b.distance_to(x.position()));
            }
        }
        t.record(worst);
    }
    Ok(t.finish())
}

/// Constraint violation plus the best objective decrease found by feasible
/// perturbations of radius 1e-3 around the returned point.
fn qp_optimality(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("qp optimality", 1e-8);
    for _ in 0..cases {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=4);
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let hessian = &l * l.transpose() + DMatrix::identity(n, n);
        let linear = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let rows = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        // feasible by construction: the rows hold with slack at a random point
        let anchor = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let rhs = &rows * &anchor - DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let qp = QpProblem {
            hessian,
            linear,
            constraint_rows: rows,
            constraint_rhs: rhs,
        };
        let Some(sol) = qp.solve()? else {
            t.record(f64::INFINITY);
            continue;
        };
        let base = qp.objective(&sol.z);
        let mut stat = (-qp.min_slack(&sol.z)).max(0.0);
        for _ in 0..200 {
            let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let z = &sol.z + d.normalize() * 1e-3;
            if qp.min_slack(&z) >= 0.0 {
                stat = stat.max(base - qp.objective(&z));
            }
        }
        t.record(stat);
    }
    Ok(t.finish())
}

/// Change of the PCCA solution when a far, inactive vehicle is added.
fn pairwise_only(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("pcca pairwise structure", 1e-8);
    let cbf = CbfParams::default();
    for _ in 0..cases {
        let s = ScenarioSampler::new(Family::Oncoming, rng.random()).scenario(rng.random_range(0..10_000))?;
        let params = &s.true_params;
        let mut near = s.initial_states[1];
        near.y = rng.random_range(6.0..30.0);
        let ego = s.initial_states[0];
        let mut far = near;
        far.y = 500.0;
        let nb = |state, prev| PccaNeighbor {
            state,
            params: &params[1],
            previous_action: prev,
            previous_copy: Action::ZERO,
        };
        let prev = random_action(rng, &params[1]);
        let nominal = random_action(rng, &params[0]);
        let one = pcca_solve(&ego, &params[0], &[nb(near, prev)], nominal, &cbf)?;
        let two = pcca_solve(
            &ego,
            &params[0],
            &[nb(near, prev), nb(far, Action::ZERO)],
            nominal,
            &cbf,
        )?;
        let diff =
            (one.unclipped - two.unclipped).norm() + (one.copies[0] - two.copies[0]).norm() + two.copies[1].norm();
        t.record(diff);
    }
    Ok(t.finish())
}

/// Counts offsets at which the error radius fails to grow strictly.
fn bound_monotonicity(rng: &mut ChaCha8Rng, cases: usize) -> Result<PropertyReport> {
    let mut t = Tally::new("error bound monotonicity", 0.0);
    for _ in 0..cases {
        let p = ErrorBoundParams {
            k1: rng.random_range(1e-3..10.0),
            k2: rng.random_range(0.0..10.0),
        };
        let dt = rng.random_range(0.01..1.0);
        let flat = (1..20)
            .filter(|&k| error_bound(&p, k + 1, dt) <= error_bound(&p, k, dt))
            .count();
        t.record(flat as f64);
    }
    Ok(t.finish())
}

/// Runs every property with `cases` draws each.
pub fn run_properties(cases: usize, seed: u64) -> Result<Vec<PropertyReport>> {
    type Check = fn(&mut ChaCha8Rng, usize) -> Result<PropertyReport>;
    let checks: [Check; 6] = [
        potential_identity,
        mirror_symmetry,
        reach_containment,
        qp_optimality,
        pairwise_only,
        bound_monotonicity,
    ];
    checks
        .iter()
        .enumerate()
        .map(|(k, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            check(&mut rng, cases)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_properties_hold() {
        for r in run_properties(60, 11).unwrap() {
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.cases, 60);
        }
    }
}
